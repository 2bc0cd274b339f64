#include "nda/schedule.hpp"

#include "nda/errors.hpp"

#include <string>

namespace nda {

void DiffusionSchedule::check_timestep(int t) const {
    if (t < 1 || t > steps) {
        throw config_error("timestep " + std::to_string(t) + " outside [1, " +
                           std::to_string(steps) + "]");
    }
}

double DiffusionSchedule::beta(int t) const {
    check_timestep(t);
    return betas[t - 1];
}

double DiffusionSchedule::alpha(int t) const {
    check_timestep(t);
    return alphas[t - 1];
}

double DiffusionSchedule::alpha_bar(int t) const {
    if (t == 0) return 1.0;
    check_timestep(t);
    return alpha_bars[t];
}

DiffusionSchedule build_schedule(int steps, double beta_min, double beta_max) {
    if (steps < 1) {
        throw config_error("schedule needs at least 1 step, got " + std::to_string(steps));
    }
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw config_error("invalid beta bounds: need 0 < beta_min <= beta_max < 1, got [" +
                           std::to_string(beta_min) + ", " + std::to_string(beta_max) + "]");
    }

    DiffusionSchedule s;
    s.steps = steps;
    s.betas.resize(steps);
    s.alphas.resize(steps);
    s.alpha_bars.resize(steps + 1);
    s.alpha_bars[0] = 1.0;

    for (int t = 1; t <= steps; ++t) {
        const double frac = steps == 1 ? 0.0 : static_cast<double>(t - 1) / (steps - 1);
        const double beta = beta_min + frac * (beta_max - beta_min);
        s.betas[t - 1] = beta;
        s.alphas[t - 1] = 1.0 - beta;
        s.alpha_bars[t] = s.alpha_bars[t - 1] * s.alphas[t - 1];
    }
    return s;
}

} // namespace nda
