#pragma once

#include "nda/attribution.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nda {

/// Linear-datamodeling evaluation inputs: M subset membership masks over the
/// training set and the externally supplied model output per (subset, query).
struct LDSInput {
    std::size_t subset_count = 0;            // M
    std::size_t train_size = 0;              // N
    std::vector<std::uint8_t> masks;         // M x N, row-major, 0/1
    std::vector<std::string> query_ids;
    std::vector<double> outputs;             // M x Q, row-major
    std::uint64_t fingerprint = 0;           // 0 = externally supplied, unchecked

    bool mask_at(std::size_t m, std::size_t n) const { return masks[m * train_size + n] != 0; }
    double output_at(std::size_t m, std::size_t q) const {
        return outputs[m * query_ids.size() + q];
    }

    void validate() const;                   // throws data_error
};

struct LDSReport {
    std::vector<std::optional<double>> per_query;  // rho; nullopt when degenerate
    double mean = 0.0;                             // over non-degenerate queries
    double std_error = 0.0;
    double mean_abs = 0.0;                         // sign-convention-proof aggregate
    std::size_t degenerate_count = 0;
    std::size_t subset_count = 0;
    std::string method_label;
};

/// Sum of the query's attribution scores over the masked training images.
double attribution_prediction(const AttributionMatrix& matrix, std::span<const std::uint8_t> mask,
                              const std::string& query_id);

/// Per query, the Spearman correlation between model outputs across subsets
/// and the attribution-based subset predictions; aggregated as mean +/- SE.
LDSReport lds(const AttributionMatrix& matrix, const LDSInput& input,
              const std::string& method_label = "attribution");

/// Self-test generator: masks drawn at the given fraction, outputs equal to
/// the attribution prediction plus scaled Gaussian noise. noise == 0 makes
/// every per-query correlation exactly 1; an infinite noise level replaces
/// the outputs with pure noise.
LDSInput make_synthetic_lds(const AttributionMatrix& matrix, std::size_t subset_count,
                            double subset_fraction, double noise, std::uint64_t seed);

} // namespace nda
