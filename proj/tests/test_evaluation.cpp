#include "nda/baseline.hpp"
#include "nda/errors.hpp"
#include "nda/lds.hpp"
#include "nda/rng.hpp"
#include "nda/spearman.hpp"

#include <doctest.h>

#include "test_helpers.hpp"

#include <cmath>
#include <limits>
#include <numeric>

using namespace nda;

namespace {

AttributionMatrix synthetic_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    AttributionMatrix m;
    for (std::size_t r = 0; r < rows; ++r) m.query_ids.push_back("q" + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) m.train_ids.push_back("t" + std::to_string(c));
    m.scores.resize(rows * cols);
    const CounterRng rng(seed, "matrix", 0, 0);
    for (std::size_t i = 0; i < m.scores.size(); ++i) m.scores[i] = rng.uniform(i);
    m.fingerprint = seed;
    return m;
}

} // namespace

TEST_CASE("attribution prediction sums the masked columns") {
    AttributionMatrix m;
    m.query_ids = {"q"};
    m.train_ids = {"t0", "t1", "t2"};
    m.scores = {0.5, 0.2, 0.9};

    CHECK(attribution_prediction(m, std::vector<std::uint8_t>{0, 0, 0}, "q") == 0.0);
    CHECK(attribution_prediction(m, std::vector<std::uint8_t>{1, 1, 1}, "q") ==
          doctest::Approx(1.6));
    CHECK(attribution_prediction(m, std::vector<std::uint8_t>{1, 0, 1}, "q") ==
          doctest::Approx(1.4));
    CHECK_THROWS_AS(attribution_prediction(m, std::vector<std::uint8_t>{1, 0}, "q"), data_error);
    CHECK_THROWS_AS(attribution_prediction(m, std::vector<std::uint8_t>{1, 0, 1}, "nope"),
                    data_error);
}

TEST_CASE("spearman unit values") {
    CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 1.0);
    CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == -1.0);
    const auto rho =
        *spearman(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 1, 4, 3, 5});
    CHECK(std::abs(rho - 0.8) <= 1e-12);
}

TEST_CASE("tied ranks match the reference implementation") {
    // Frozen from scipy.stats.spearmanr.
    const auto rho1 = *spearman(std::vector<double>{1, 2, 2, 4, 5},
                                std::vector<double>{2, 1, 3, 3, 5});
    CHECK(rho1 == doctest::Approx(0.76315789473684215).epsilon(1e-12));
    const auto rho2 = *spearman(std::vector<double>{3, 3, 3, 1},
                                std::vector<double>{2, 5, 1, 0.5});
    CHECK(rho2 == doctest::Approx(0.7745966692414834).epsilon(1e-12));
}

TEST_CASE("constant inputs are flagged, never NaN") {
    const auto rho = spearman(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
    CHECK_FALSE(rho.has_value());
    CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), config_error);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}),
                    config_error);
}

TEST_CASE("spearman is symmetric, bounded, and transform-invariant") {
    const CounterRng rng(40, "spearman", 0, 0);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> a(12), b(12);
        for (int i = 0; i < 12; ++i) {
            a[i] = rng.uniform(rep * 100 + i);
            b[i] = rng.uniform(rep * 100 + 50 + i);
            if (rep % 3 == 0 && i > 5) {
                a[i] = a[i - 1];   // inject ties
            }
        }
        const auto ab = spearman(a, b);
        const auto ba = spearman(b, a);
        REQUIRE(ab.has_value());
        CHECK(*ab == *ba);
        CHECK(*ab >= -1.0);
        CHECK(*ab <= 1.0);
        CHECK(*spearman(a, a) == 1.0);

        // Rank correlation ignores monotone transforms.
        std::vector<double> transformed(12);
        for (int i = 0; i < 12; ++i) transformed[i] = std::exp(3.0 * b[i]) + 7.0;
        CHECK(*spearman(a, transformed) == doctest::Approx(*ab).epsilon(1e-12));
    }
}

TEST_CASE("lds on noise-free synthetic input is exactly one") {
    const AttributionMatrix m = synthetic_matrix(20, 50, 77);
    const LDSInput input = make_synthetic_lds(m, 16, 0.5, 0.0, 5);
    const LDSReport report = lds(m, input);
    CHECK(report.degenerate_count == 0);
    for (const auto& rho : report.per_query) {
        REQUIRE(rho.has_value());
        CHECK(*rho == 1.0);
    }
    CHECK(report.mean == 1.0);
}

TEST_CASE("negated outputs flip the correlation to minus one") {
    const AttributionMatrix m = synthetic_matrix(8, 40, 78);
    LDSInput input = make_synthetic_lds(m, 16, 0.5, 0.0, 6);
    for (double& f : input.outputs) f = -f;
    const LDSReport report = lds(m, input);
    for (const auto& rho : report.per_query) {
        REQUIRE(rho.has_value());
        CHECK(*rho == -1.0);
    }
}

TEST_CASE("pure-noise outputs hover near zero") {
    const AttributionMatrix m = synthetic_matrix(100, 120, 79);
    const LDSInput input =
        make_synthetic_lds(m, 64, 0.5, std::numeric_limits<double>::infinity(), 7);
    const LDSReport report = lds(m, input);
    CHECK(std::abs(report.mean) < 3.0 * report.std_error);
}

TEST_CASE("lds sees ranks only") {
    const AttributionMatrix m = synthetic_matrix(10, 30, 80);
    const LDSInput input = make_synthetic_lds(m, 16, 0.5, 0.8, 8);
    const LDSReport base = lds(m, input);

    AttributionMatrix scaled = m;
    for (double& v : scaled.scores) v = 3.5 * v + 11.0;
    // Predictions g are affine in the matrix: positive scaling preserves
    // subset ranks, so every per-query rho is unchanged.
    const LDSReport same = lds(scaled, input);
    for (std::size_t q = 0; q < base.per_query.size(); ++q) {
        REQUIRE(base.per_query[q].has_value());
        CHECK(*same.per_query[q] == doctest::Approx(*base.per_query[q]).epsilon(1e-12));
    }
}

TEST_CASE("synthetic masks hit the requested fraction") {
    const AttributionMatrix m = synthetic_matrix(4, 101, 81);
    const LDSInput input = make_synthetic_lds(m, 64, 0.5, 0.0, 9);
    CHECK(input.subset_count == 64);
    for (std::size_t s = 0; s < input.subset_count; ++s) {
        std::size_t size = 0;
        for (std::size_t n = 0; n < input.train_size; ++n) size += input.mask_at(s, n);
        CHECK(size == 50);   // floor(101 / 2)
    }
    CHECK(input.fingerprint == m.fingerprint);
    CHECK_NOTHROW(input.validate());
    CHECK_THROWS_AS(make_synthetic_lds(m, 8, 0.0, 0.0, 1), config_error);
    CHECK_THROWS_AS(make_synthetic_lds(m, 8, 1.0, 0.0, 1), config_error);
}

TEST_CASE("raw pixel baselines") {
    Dataset trainset = test::random_dataset(4, 3, 6, 3000);
    Dataset queries;
    queries.images.push_back(trainset.images[2]);
    queries.ids.push_back("dup");

    SUBCASE("cosine self-similarity is the row maximum at 1") {
        const BaselineResult r = raw_pixel_baseline(queries, trainset, PixelMetric::cosine);
        CHECK(r.matrix.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t n = 0; n < 4; ++n) {
            if (n != 2) CHECK(r.matrix.at(0, 2) > r.matrix.at(0, n));
        }
        CHECK(r.degenerate_pairs.empty());
    }

    SUBCASE("orthogonal images have zero dot product") {
        Dataset basis;
        ImageTensor e0, e1;
        e0.channels = e1.channels = 1;
        e0.side = e1.side = 2;
        e0.data = {1.0f, 0.0f, 0.0f, 0.0f};
        e1.data = {0.0f, 1.0f, 0.0f, 0.0f};
        basis.images = {e0, e1};
        basis.ids = {"e0", "e1"};
        Dataset q;
        q.images = {e0};
        q.ids = {"q"};
        const BaselineResult r = raw_pixel_baseline(q, basis, PixelMetric::dot);
        CHECK(r.matrix.at(0, 0) == doctest::Approx(1.0));
        CHECK(r.matrix.at(0, 1) == 0.0);
    }

    SUBCASE("cosine is symmetric") {
        const BaselineResult r = raw_pixel_baseline(trainset, trainset, PixelMetric::cosine);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(r.matrix.at(i, j) == doctest::Approx(r.matrix.at(j, i)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("zero-norm cosine pairs are recorded, not NaN") {
        Dataset with_zero = trainset;
        ImageTensor zero;
        zero.channels = 3;
        zero.side = 6;
        zero.data.assign(zero.value_count(), 0.0f);
        with_zero.images.push_back(zero);
        with_zero.ids.push_back("zero");
        const BaselineResult r = raw_pixel_baseline(queries, with_zero, PixelMetric::cosine);
        REQUIRE(r.degenerate_pairs.size() == 1);
        CHECK(r.degenerate_pairs[0] == std::pair<std::size_t, std::size_t>{0, 4});
        CHECK(r.matrix.at(0, 4) == 0.0);
        for (double v : r.matrix.scores) CHECK(std::isfinite(v));
    }
}

TEST_CASE("lds input validation") {
    LDSInput input;
    input.subset_count = 2;
    input.train_size = 3;
    input.masks = {1, 0, 1, 0, 0, 0};   // second subset empty
    input.query_ids = {"q"};
    input.outputs = {0.1, 0.2};
    CHECK_THROWS_AS(input.validate(), data_error);
    input.masks = {1, 0, 1, 0, 1, 0};
    CHECK_NOTHROW(input.validate());
    input.outputs[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(input.validate(), data_error);
}
