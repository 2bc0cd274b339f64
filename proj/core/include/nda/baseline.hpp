#pragma once

#include "nda/attribution.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace nda {

enum class PixelMetric { dot, cosine };

struct BaselineResult {
    AttributionMatrix matrix;
    // (query row, train col) pairs where cosine hit a zero-norm image; their
    // cells hold 0 instead of a silent NaN.
    std::vector<std::pair<std::size_t, std::size_t>> degenerate_pairs;
};

/// Raw-pixel similarity baseline over flattened images: dot product or
/// cosine. Cosine is symmetric and self-similarity equals 1.
BaselineResult raw_pixel_baseline(const Dataset& queries, const Dataset& trainset,
                                  PixelMetric metric);

} // namespace nda
