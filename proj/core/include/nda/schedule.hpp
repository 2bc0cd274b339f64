#pragma once

#include <vector>

namespace nda {

/// Forward-process variance schedule. Timesteps are 1-based: beta(t) for
/// t in [1, T]; alpha_bar(0) == 1 by definition.
struct DiffusionSchedule {
    int steps = 0;                     // T
    std::vector<double> betas;         // length T, index 0 <-> t = 1
    std::vector<double> alphas;        // 1 - beta_t
    std::vector<double> alpha_bars;    // length T + 1, alpha_bars[t] = prod_{s<=t} alpha_s

    double beta(int t) const;
    double alpha(int t) const;
    double alpha_bar(int t) const;     // accepts t in [0, T]

    void check_timestep(int t) const;  // throws config_error unless 1 <= t <= T
};

/// Linear interpolation beta_t = beta_min + (t-1)/(T-1) * (beta_max - beta_min);
/// T == 1 uses beta_min.
DiffusionSchedule build_schedule(int steps, double beta_min, double beta_max);

inline DiffusionSchedule default_schedule() { return build_schedule(1000, 1e-4, 0.02); }

} // namespace nda
