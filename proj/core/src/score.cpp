#include "nda/score.hpp"

#include "nda/errors.hpp"
#include "nda/influence.hpp"

#include <cmath>
#include <limits>

namespace nda {

ScoreField global_score(const NoisyImage& x_t, const Dataset& trainset) {
    if (trainset.empty()) {
        throw config_error("global score needs a non-empty training set");
    }
    const ImageTensor& xt = x_t.noisy;
    const double abar = x_t.alpha_bar;
    const double signal = std::sqrt(abar);
    const double inv_var = 1.0 / (1.0 - abar);
    const std::size_t n_train = trainset.size();
    const std::size_t len = xt.value_count();

    std::vector<double> log_w(n_train);
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < n_train; ++n) {
        const ImageTensor& z = trainset[n];
        double d = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double diff = static_cast<double>(xt.data[i]) - signal * z.data[i];
            d += diff * diff;
        }
        log_w[n] = -d * 0.5 * inv_var;
        if (log_w[n] > max_lw) max_lw = log_w[n];
    }
    double sum = 0.0;
    for (double lw : log_w) sum += std::exp(lw - max_lw);
    const double lse = max_lw + std::log(sum);

    ScoreField field;
    field.mode = ScoreMode::global;
    field.timestep = x_t.timestep;
    field.channels = xt.channels;
    field.side = xt.side;
    field.values.assign(len, 0.0);
    for (std::size_t n = 0; n < n_train; ++n) {
        const double w = std::exp(log_w[n] - lse);
        const ImageTensor& z = trainset[n];
        for (std::size_t i = 0; i < len; ++i) {
            field.values[i] += w * (signal * z.data[i] - xt.data[i]) * inv_var;
        }
    }
    return field;
}

ScoreField local_score(const NoisyImage& x_t, const Dataset& trainset, int patch_size,
                       DistanceBackend backend) {
    if (trainset.empty()) {
        throw config_error("local score needs a non-empty training set");
    }
    const ImageTensor& xt = x_t.noisy;
    const int Lq = xt.side;
    const int Lt = trainset.side();
    const double signal = std::sqrt(x_t.alpha_bar);
    const double inv_var = 1.0 / (1.0 - x_t.alpha_bar);

    ScoreField field;
    field.mode = ScoreMode::local;
    field.timestep = x_t.timestep;
    field.channels = xt.channels;
    field.side = Lq;
    field.patch_size = patch_size;
    field.values.assign(xt.value_count(), 0.0);

    InfluenceParams params;
    params.top_k = Lt * Lt;              // exact: every training patch retained
    params.backend = backend;
    const ScaleSpec scale{patch_size, 1};

    for_each_patch_summary(x_t, trainset, scale, params, [&](PatchSummary& summary) {
        const int row = static_cast<int>(summary.center) / Lq;
        const int col = static_cast<int>(summary.center) % Lq;
        for (std::size_t n = 0; n < summary.image_count(); ++n) {
            const ImageTensor& z = trainset[n];
            for (const TopkEntry& e : summary.image_entries(n)) {
                const double w = std::exp(e.log_weight - summary.logsumexp);
                const int trow = static_cast<int>(e.center) / Lt;
                const int tcol = static_cast<int>(e.center) % Lt;
                for (int c = 0; c < xt.channels; ++c) {
                    field.values[(static_cast<std::size_t>(c) * Lq + row) * Lq + col] +=
                        w * (signal * z.at(c, trow, tcol) - xt.at(c, row, col)) * inv_var;
                }
            }
        }
    });
    return field;
}

} // namespace nda
