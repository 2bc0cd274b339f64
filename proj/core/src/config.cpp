#include "nda/config.hpp"

#include "nda/errors.hpp"
#include "nda/rng.hpp"

#include <sstream>

namespace nda {

namespace {

template <typename T>
T lookup(const std::map<int, T>& table, int t, const char* what) {
    auto it = table.find(t);
    if (it == table.end()) {
        throw config_error(std::string(what) + " has no entry for timestep " + std::to_string(t));
    }
    return it->second;
}

} // namespace

int InfluenceConfig::patch_size_at(int t) const { return lookup(patch_size, t, "patch_size"); }
int InfluenceConfig::patch_size_low_at(int t) const {
    return lookup(patch_size_low, t, "patch_size_low");
}
double InfluenceConfig::gamma_at(int t) const { return lookup(gamma, t, "gamma"); }

void InfluenceConfig::validate(const DiffusionSchedule& schedule) const {
    if (timesteps.empty()) {
        throw config_error("timestep set must be non-empty");
    }
    int prev = 0;
    for (int t : timesteps) {
        if (t <= prev) {
            throw config_error("timesteps must be strictly increasing");
        }
        prev = t;
        schedule.check_timestep(t);
        const int p = patch_size_at(t);
        if (p < 1) {
            throw config_error("patch size must be >= 1 at t=" + std::to_string(t));
        }
        const double g = gamma_at(t);
        if (g < 0.0 || g > 1.0) {
            throw config_error("gamma must lie in [0, 1] at t=" + std::to_string(t));
        }
        if (g < 1.0) {
            const int pl = patch_size_low_at(t);
            if (pl < window) {
                throw config_error("low-scale patch size " + std::to_string(pl) +
                                   " smaller than window " + std::to_string(window) + " at t=" +
                                   std::to_string(t));
            }
        }
    }
    if (window < 1) throw config_error("window must be >= 1");
    if (top_k < 1) throw config_error("top_k must be >= 1");
    if (draws < 1) throw config_error("draws must be >= 1");
    if (patch_batch < 1) throw config_error("patch_batch must be >= 1");
}

std::string InfluenceConfig::canonical_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "timesteps=";
    for (int t : timesteps) out << t << ",";
    out << "\npatch_size=";
    for (const auto& [t, p] : patch_size) out << t << ":" << p << ",";
    out << "\npatch_size_low=";
    for (const auto& [t, p] : patch_size_low) out << t << ":" << p << ",";
    out << "\nwindow=" << window;
    out << "\ngamma=";
    for (const auto& [t, g] : gamma) out << t << ":" << g << ",";
    out << "\ntop_k=" << top_k;
    out << "\nnoise=" << (noise_mode == NoiseMode::zero ? "zero" : "seeded");
    out << "\nseed=" << seed;
    out << "\nshare_noise=" << (share_noise_across_timesteps ? 1 : 0);
    out << "\ndraws=" << draws;
    out << "\nbackend=" << (backend == DistanceBackend::fast ? "fast" : "naive");
    out << "\nlow_variance_rescale=" << (low_variance_rescale ? 1 : 0);
    return out.str();
}

std::uint64_t config_fingerprint(const InfluenceConfig& cfg, const DiffusionSchedule& schedule,
                                 const std::vector<std::string>& train_ids,
                                 const std::vector<std::string>& query_ids) {
    std::ostringstream out;
    out.precision(17);
    out << cfg.canonical_text();
    out << "\nschedule=" << schedule.steps;
    if (schedule.steps > 0) {
        out << ":" << schedule.betas.front() << ":" << schedule.betas.back();
    }
    out << "\ntrain_ids=";
    for (const auto& id : train_ids) out << id << "\x1f";
    out << "\nquery_ids=";
    for (const auto& id : query_ids) out << id << "\x1f";
    return fnv1a64(out.str());
}

} // namespace nda
