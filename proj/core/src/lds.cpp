#include "nda/lds.hpp"

#include "nda/errors.hpp"
#include "nda/rng.hpp"
#include "nda/spearman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nda {

void LDSInput::validate() const {
    if (subset_count < 2) {
        throw data_error("LDS needs at least 2 subsets, got " + std::to_string(subset_count));
    }
    if (masks.size() != subset_count * train_size) {
        throw data_error("mask table size mismatch");
    }
    if (outputs.size() != subset_count * query_ids.size()) {
        throw data_error("output table size mismatch");
    }
    for (std::size_t m = 0; m < subset_count; ++m) {
        std::size_t selected = 0;
        for (std::size_t n = 0; n < train_size; ++n) selected += mask_at(m, n);
        if (selected == 0) {
            throw data_error("subset " + std::to_string(m) + " selects no training examples");
        }
    }
    for (double f : outputs) {
        if (!std::isfinite(f)) throw data_error("non-finite model output in LDS input");
    }
}

double attribution_prediction(const AttributionMatrix& matrix, std::span<const std::uint8_t> mask,
                              const std::string& query_id) {
    if (mask.size() != matrix.cols()) {
        throw data_error("mask length " + std::to_string(mask.size()) +
                         " does not match training set size " + std::to_string(matrix.cols()));
    }
    const auto it = std::find(matrix.query_ids.begin(), matrix.query_ids.end(), query_id);
    if (it == matrix.query_ids.end()) {
        throw data_error("unknown query id: " + query_id);
    }
    const double* row = matrix.row(static_cast<std::size_t>(it - matrix.query_ids.begin()));
    double sum = 0.0;
    for (std::size_t n = 0; n < mask.size(); ++n) {
        if (mask[n]) sum += row[n];
    }
    return sum;
}

LDSReport lds(const AttributionMatrix& matrix, const LDSInput& input,
              const std::string& method_label) {
    input.validate();
    if (input.train_size != matrix.cols()) {
        throw data_error("LDS input covers " + std::to_string(input.train_size) +
                         " training images, matrix has " + std::to_string(matrix.cols()));
    }

    LDSReport report;
    report.method_label = method_label;
    report.subset_count = input.subset_count;
    report.per_query.reserve(input.query_ids.size());

    std::vector<double> predictions(input.subset_count);
    std::vector<double> outputs(input.subset_count);
    std::vector<double> kept;
    for (std::size_t q = 0; q < input.query_ids.size(); ++q) {
        for (std::size_t m = 0; m < input.subset_count; ++m) {
            predictions[m] = attribution_prediction(
                matrix, std::span(input.masks).subspan(m * input.train_size, input.train_size),
                input.query_ids[q]);
            outputs[m] = input.output_at(m, q);
        }
        const auto rho = spearman(outputs, predictions);
        report.per_query.push_back(rho);
        if (rho) {
            kept.push_back(*rho);
        } else {
            ++report.degenerate_count;
        }
    }

    if (!kept.empty()) {
        report.mean = std::accumulate(kept.begin(), kept.end(), 0.0) / kept.size();
        for (double r : kept) report.mean_abs += std::abs(r);
        report.mean_abs /= kept.size();
        if (kept.size() > 1) {
            double var = 0.0;
            for (double r : kept) var += (r - report.mean) * (r - report.mean);
            var /= static_cast<double>(kept.size() - 1);
            report.std_error = std::sqrt(var / static_cast<double>(kept.size()));
        }
    }
    return report;
}

LDSInput make_synthetic_lds(const AttributionMatrix& matrix, std::size_t subset_count,
                            double subset_fraction, double noise, std::uint64_t seed) {
    if (!(subset_fraction > 0.0 && subset_fraction < 1.0)) {
        throw config_error("subset fraction must lie in (0, 1)");
    }
    const std::size_t n_train = matrix.cols();
    const std::size_t n_query = matrix.rows();
    const std::size_t subset_size =
        std::max<std::size_t>(1, static_cast<std::size_t>(subset_fraction * n_train));

    LDSInput input;
    input.subset_count = subset_count;
    input.train_size = n_train;
    input.query_ids = matrix.query_ids;
    input.fingerprint = matrix.fingerprint;
    input.masks.assign(subset_count * n_train, 0);
    input.outputs.assign(subset_count * n_query, 0.0);

    for (std::size_t m = 0; m < subset_count; ++m) {
        // Deterministic partial Fisher-Yates: pick subset_size indices.
        const CounterRng rng(seed, "lds-subset", m, 0);
        std::vector<std::uint32_t> pool(n_train);
        std::iota(pool.begin(), pool.end(), 0u);
        for (std::size_t i = 0; i < subset_size; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.bits(i) % (n_train - i));
            std::swap(pool[i], pool[j]);
            input.masks[m * n_train + pool[i]] = 1;
        }
    }

    // Per-query output scale: the dispersion of the noise-free predictions.
    std::vector<double> g(subset_count);
    for (std::size_t q = 0; q < n_query; ++q) {
        for (std::size_t m = 0; m < subset_count; ++m) {
            g[m] = attribution_prediction(
                matrix, std::span(input.masks).subspan(m * n_train, n_train),
                matrix.query_ids[q]);
        }
        double mean = std::accumulate(g.begin(), g.end(), 0.0) / subset_count;
        double var = 0.0;
        for (double v : g) var += (v - mean) * (v - mean);
        const double sigma = std::sqrt(var / subset_count);

        const CounterRng rng(seed, "lds-noise", q, 1);
        for (std::size_t m = 0; m < subset_count; ++m) {
            double f;
            if (std::isinf(noise)) {
                f = rng.normal(m);
            } else if (noise == 0.0) {
                f = g[m];
            } else {
                f = g[m] + noise * sigma * rng.normal(m);
            }
            input.outputs[m * n_query + q] = f;
        }
    }
    return input;
}

} // namespace nda
