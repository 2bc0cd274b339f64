#pragma once

#include "nda/distance.hpp"
#include "nda/noise.hpp"
#include "nda/schedule.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace nda {

/// Full method configuration. Defaults reproduce the reference setup:
/// timesteps {100..500}, per-timestep patch sizes, k = 100, pooling window 2
/// and gamma = 0.75 at every timestep.
struct InfluenceConfig {
    std::vector<int> timesteps = {100, 200, 300, 400, 500};
    std::map<int, int> patch_size = {{100, 5}, {200, 7}, {300, 9}, {400, 21}, {500, 21}};
    std::map<int, int> patch_size_low = {{100, 8}, {200, 8}, {300, 10}, {400, 21}, {500, 21}};
    int window = 2;
    std::map<int, double> gamma = {{100, 0.75}, {200, 0.75}, {300, 0.75}, {400, 0.75}, {500, 0.75}};
    int top_k = 100;
    NoiseMode noise_mode = NoiseMode::seeded;
    std::uint64_t seed = 0;
    bool share_noise_across_timesteps = false;
    int draws = 1;                        // epsilon draws per (image, t), influence averaged
    DistanceBackend backend = DistanceBackend::fast;
    bool low_variance_rescale = false;
    int patch_batch = 32;                 // tiling only, excluded from the fingerprint

    int patch_size_at(int t) const;
    int patch_size_low_at(int t) const;
    double gamma_at(int t) const;

    // Throws config_error on any violated invariant.
    void validate(const DiffusionSchedule& schedule) const;

    // Canonical key=value serialization of every result-affecting field.
    std::string canonical_text() const;
};

/// Stable digest of everything that determines attribution bytes: the
/// influence configuration, schedule parameters and both id lists.
std::uint64_t config_fingerprint(const InfluenceConfig& cfg, const DiffusionSchedule& schedule,
                                 const std::vector<std::string>& train_ids,
                                 const std::vector<std::string>& query_ids);

} // namespace nda
