#pragma once

#include "nda/image.hpp"
#include "nda/schedule.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nda {

enum class NoiseMode { seeded, zero };

struct NoiseSpec {
    NoiseMode mode = NoiseMode::seeded;
    std::uint64_t seed = 0;
    std::uint64_t draw_index = 0;
    // When set, the epsilon stream ignores the timestep, so every timestep of
    // one image shares a single draw.
    bool share_across_timesteps = false;
};

/// x_t = sqrt(abar_t) * x + sqrt(1 - abar_t) * eps, elementwise.
struct NoisyImage {
    const ImageTensor* base = nullptr;   // clean image x (borrowed)
    std::string id;
    int timestep = 0;
    double alpha_bar = 1.0;
    std::vector<float> epsilon;          // empty in zero mode
    ImageTensor noisy;                   // x_t, same shape as x

    bool zero_noise() const { return epsilon.empty(); }
};

/// Deterministic: the epsilon stream is keyed by (seed, image id, t, draw),
/// byte-identical across runs and independent of evaluation order.
NoisyImage noise_image(const ImageTensor& x, const std::string& id, int t,
                       const DiffusionSchedule& schedule, const NoiseSpec& spec);

} // namespace nda
