#include "nda/noise.hpp"

#include "nda/rng.hpp"

#include <cmath>

namespace nda {

NoisyImage noise_image(const ImageTensor& x, const std::string& id, int t,
                       const DiffusionSchedule& schedule, const NoiseSpec& spec) {
    schedule.check_timestep(t);
    const double abar = schedule.alpha_bar(t);
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);

    NoisyImage out;
    out.base = &x;
    out.id = id;
    out.timestep = t;
    out.alpha_bar = abar;
    out.noisy.channels = x.channels;
    out.noisy.side = x.side;
    out.noisy.range_min = x.range_min;
    out.noisy.range_max = x.range_max;
    out.noisy.data.resize(x.data.size());

    if (spec.mode == NoiseMode::zero) {
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            out.noisy.data[i] = static_cast<float>(signal * x.data[i]);
        }
        return out;
    }

    const std::uint64_t key_t = spec.share_across_timesteps ? 0 : static_cast<std::uint64_t>(t);
    const CounterRng rng(spec.seed, id, key_t, spec.draw_index);
    out.epsilon.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double eps = rng.normal(i);
        out.epsilon[i] = static_cast<float>(eps);
        out.noisy.data[i] = static_cast<float>(signal * x.data[i] + noise * eps);
    }
    return out;
}

} // namespace nda
