#include "nda/distance.hpp"
#include "nda/errors.hpp"
#include "nda/rng.hpp"

#include <doctest.h>

#include "test_helpers.hpp"

#include <cmath>

using namespace nda;

namespace {

// Independent oracle: raw index arithmetic straight off the image buffers,
// sharing no code with the library paths.
double loop_oracle(const ImageTensor& query, int qrow, int qcol, const ImageTensor& train,
                   int trow, int tcol, int P, double abar) {
    const int off = (P - 1) / 2;
    const double s = std::sqrt(abar);
    double acc = 0.0;
    for (int c = 0; c < query.channels; ++c) {
        for (int dy = 0; dy < P; ++dy) {
            for (int dx = 0; dx < P; ++dx) {
                const int qy = qrow - off + dy, qx = qcol - off + dx;
                const int ty = trow - off + dy, tx = tcol - off + dx;
                const double qv =
                    (qy >= 0 && qy < query.side && qx >= 0 && qx < query.side)
                        ? query.data[(static_cast<std::size_t>(c) * query.side + qy) *
                                         query.side +
                                     qx]
                        : 0.0;
                const double tv =
                    (ty >= 0 && ty < train.side && tx >= 0 && tx < train.side)
                        ? train.data[(static_cast<std::size_t>(c) * train.side + ty) *
                                         train.side +
                                     tx]
                        : 0.0;
                const double diff = qv - s * tv;
                acc += diff * diff;
            }
        }
    }
    return acc;
}

} // namespace

TEST_CASE("all-zero inputs give zero distance everywhere") {
    ImageTensor zero;
    zero.channels = 1;
    zero.side = 4;
    zero.data.assign(16, 0.0f);
    const PatchView patch = extract_patch(zero, 1, 1, 3);
    const DistanceMap map = distance_map_naive(patch, zero, 1.0);
    for (float v : map.values) CHECK(v == 0.0f);
}

TEST_CASE("1x1 scalar case") {
    ImageTensor q, z;
    q.channels = z.channels = 1;
    q.side = z.side = 1;
    q.data = {0.7f};
    z.data = {-0.3f};
    const double abar = 0.64;
    const PatchView patch = extract_patch(q, 0, 0, 1);
    const DistanceMap map = distance_map_naive(patch, z, abar);
    const double expected = (0.7 - std::sqrt(abar) * -0.3) * (0.7 - std::sqrt(abar) * -0.3);
    CHECK(map.values[0] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("naive map matches the raw loop oracle") {
    const ImageTensor query = test::random_image(3, 8, 100);
    const ImageTensor train = test::random_image(3, 8, 101);
    const double abar = 0.9;
    const int P = 5;
    for (int center : {0, 9, 27, 63}) {
        const PatchView patch = extract_patch(query, center / 8, center % 8, P);
        const DistanceMap map = distance_map_naive(patch, train, abar);
        for (int c = 0; c < 64; ++c) {
            const double expected =
                loop_oracle(query, center / 8, center % 8, train, c / 8, c % 8, P, abar);
            CHECK(std::abs(map.values[c] - expected) <= 1e-5);
        }
    }
}

TEST_CASE("fast equals naive over random instances at both scales") {
    const CounterRng pick(5, "cases", 0, 0);
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        const int L = (pick.bits(4 * rep) % 2) ? 8 : 16;
        const int C = (pick.bits(4 * rep + 1) % 2) ? 1 : 3;
        const int P = 3 + 2 * static_cast<int>(pick.bits(4 * rep + 2) % 3);
        const int window = rep % 3 == 2 ? 2 : 1;
        const double abar = 0.3 + 0.69 * pick.uniform(4 * rep + 3);
        const ImageTensor query = test::random_image(C, L, 3000 + rep);
        const ImageTensor train = test::random_image(C, L, 4000 + rep);
        const ScaleSpec scale{window == 1 ? P : P + 1, window};
        const int center = static_cast<int>(pick.bits(4 * rep + 5) % (L * L));

        const QueryPatchKernel kernel = make_query_kernel(query, center / L, center % L, scale);
        std::vector<double> naive(static_cast<std::size_t>(L) * L), fast(naive.size());
        distance_plane_naive(kernel, train, scale, abar, naive.data());
        const TrainImageContext ctx = make_train_context(train, scale);
        distance_plane_fast(kernel, ctx, abar, fast.data());
        for (std::size_t i = 0; i < naive.size(); ++i) {
            worst = std::max(worst, std::abs(naive[i] - fast[i]));
            CHECK(fast[i] >= 0.0);
            CHECK(std::isfinite(fast[i]));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("batched maps equal the single-patch path bit-for-bit") {
    const ImageTensor query = test::random_image(3, 8, 200);
    const ImageTensor train = test::random_image(3, 8, 201);
    const double abar = 0.5;
    std::vector<PatchView> batch;
    for (int c = 0; c < 64; c += 7) {
        batch.push_back(extract_patch(query, c / 8, c % 8, 5));
    }
    const auto maps = distance_map_fast(batch, train, abar);
    REQUIRE(maps.size() == batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto single = distance_map_fast(std::span(&batch[b], 1), train, abar);
        CHECK(maps[b].values == single[0].values);
    }
}

TEST_CASE("context reuse changes nothing") {
    const ImageTensor query = test::random_image(1, 8, 210);
    const ImageTensor train = test::random_image(1, 8, 211);
    std::vector<PatchView> batch{extract_patch(query, 3, 3, 3)};
    const ScaleSpec scale{3, 1};
    const TrainImageContext ctx = make_train_context(train, scale);
    const auto fresh = distance_map_fast(batch, train, 0.7);
    const auto reused = distance_map_fast(batch, train, ctx, 0.7);
    CHECK(fresh[0].values == reused[0].values);
}

TEST_CASE("channel mismatch is rejected") {
    const ImageTensor query = test::random_image(3, 4, 220);
    const ImageTensor train = test::random_image(1, 4, 221);
    const PatchView patch = extract_patch(query, 1, 1, 3);
    CHECK_THROWS_AS(distance_map_naive(patch, train, 0.9), config_error);
}

TEST_CASE("scale spec validation") {
    CHECK_THROWS_AS((ScaleSpec{0, 1}.validate(8)), config_error);
    CHECK_THROWS_AS((ScaleSpec{3, 0}.validate(8)), config_error);
    CHECK_THROWS_AS((ScaleSpec{1, 2}.validate(8)), config_error);
    CHECK_NOTHROW((ScaleSpec{4, 2}.validate(8)));
}

TEST_CASE("pooled distance equals pooling both patches explicitly") {
    // The fast low-scale path samples a window-sum image; verify against
    // extract-then-downsample on both sides.
    const ImageTensor query = test::random_image(2, 8, 230);
    const ImageTensor train = test::random_image(2, 8, 231);
    const ScaleSpec scale{6, 2};
    const double abar = 0.45;
    const double s = std::sqrt(abar);

    const QueryPatchKernel kernel = make_query_kernel(query, 2, 5, scale);
    const TrainImageContext ctx = make_train_context(train, scale);
    std::vector<double> fast(64);
    distance_plane_fast(kernel, ctx, abar, fast.data());

    const PatchView qp = downsample(extract_patch(query, 2, 5, 6), 2);
    for (int c = 0; c < 64; ++c) {
        const PatchView tp = downsample(extract_patch(train, c / 8, c % 8, 6), 2);
        double acc = 0.0;
        for (std::size_t i = 0; i < qp.values.size(); ++i) {
            const double diff = static_cast<double>(qp.values[i]) - s * tp.values[i];
            acc += diff * diff;
        }
        CHECK(std::abs(fast[c] - acc) <= 1e-5);
    }
}
