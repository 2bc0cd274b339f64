#pragma once

#include <optional>
#include <span>
#include <vector>

namespace nda {

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation. Tie-free inputs use the exact rank-difference
/// formula (so +/-1 come out exact); ties fall back to Pearson on average
/// ranks. A constant input is degenerate and yields nullopt rather than NaN.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

} // namespace nda
