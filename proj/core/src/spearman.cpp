#include "nda/spearman.hpp"

#include "nda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nda {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
        i = j;
    }
    return ranks;
}

namespace {

// Tie-free ranks are a permutation of 1..n; ties show up as repeats.
bool has_ties(const std::vector<double>& ranks) {
    std::vector<double> sorted = ranks;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
}

bool is_constant(std::span<const double> v) {
    for (double x : v) {
        if (x != v.front()) return false;
    }
    return true;
}

} // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw config_error("spearman inputs differ in length: " + std::to_string(a.size()) +
                           " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw config_error("spearman needs at least 2 observations");
    }
    if (is_constant(a) || is_constant(b)) {
        return std::nullopt;
    }

    const std::vector<double> ra = average_ranks(a);
    const std::vector<double> rb = average_ranks(b);
    const std::size_t n = a.size();

    if (ra == rb) return 1.0;

    if (!has_ties(ra) && !has_ties(rb)) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = ra[i] - rb[i];
            d2 += d * d;
        }
        const double nn = static_cast<double>(n);
        return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
    }

    // Pearson on ranks for tied data.
    const double mean = 0.5 * (static_cast<double>(n) + 1.0);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = ra[i] - mean;
        const double db = rb[i] - mean;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    const double rho = cov / std::sqrt(va * vb);
    return std::clamp(rho, -1.0, 1.0);
}

} // namespace nda
