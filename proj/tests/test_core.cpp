#include "nda/errors.hpp"
#include "nda/image.hpp"
#include "nda/noise.hpp"
#include "nda/rng.hpp"
#include "nda/schedule.hpp"

#include <doctest.h>

#include "test_helpers.hpp"

#include <cmath>

using namespace nda;

TEST_CASE("linear schedule matches the scalar-loop product") {
    const DiffusionSchedule s = build_schedule(1000, 1e-4, 0.02);
    // Frozen from an independent 10-line loop run before the build.
    CHECK(s.alpha_bar(1000) == doctest::Approx(4.0358297653756754e-05).epsilon(1e-10));
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.betas.front() == doctest::Approx(1e-4));
    CHECK(s.betas.back() == doctest::Approx(0.02));
}

TEST_CASE("schedule endpoint cases") {
    CHECK(build_schedule(1, 0.5, 0.5).alpha_bar(1) == doctest::Approx(0.5));
    CHECK(build_schedule(2, 0.1, 0.1).alpha_bar(2) == doctest::Approx(0.81));
}

TEST_CASE("schedule rejects invalid bounds") {
    CHECK_THROWS_AS(build_schedule(0, 1e-4, 0.02), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.02), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.02, 0.01), config_error);
    CHECK_THROWS_AS(build_schedule(10, 0.5, 1.0), config_error);
}

TEST_CASE("alpha_bar is the running product and strictly decreases") {
    const DiffusionSchedule s = build_schedule(500, 2e-4, 0.015);
    double prod = 1.0;
    for (int t = 1; t <= s.steps; ++t) {
        prod *= 1.0 - s.beta(t);
        CHECK(std::abs(s.alpha_bar(t) - prod) <= 1e-12 * prod);
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    }
}

TEST_CASE("zero-noise mode scales the image by sqrt(alpha_bar)") {
    const DiffusionSchedule s = build_schedule(2, 0.1, 0.1);   // abar_2 = 0.81
    const ImageTensor x = test::random_image(3, 4, 1);
    const NoisyImage noised = noise_image(x, "x", 2, s, {NoiseMode::zero});
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        CHECK(noised.noisy.data[i] == doctest::Approx(0.9f * x.data[i]).epsilon(1e-6));
    }
    CHECK(noised.zero_noise());
}

TEST_CASE("seeded noise is deterministic in its key") {
    const DiffusionSchedule s = default_schedule();
    const ImageTensor x = test::random_image(3, 8, 2);
    NoiseSpec spec;
    spec.seed = 42;
    const NoisyImage a = noise_image(x, "img", 300, s, spec);
    const NoisyImage b = noise_image(x, "img", 300, s, spec);
    CHECK(a.noisy.data == b.noisy.data);
    CHECK(a.epsilon == b.epsilon);

    const NoisyImage other_t = noise_image(x, "img", 301, s, spec);
    CHECK(a.noisy.data != other_t.noisy.data);
    const NoisyImage other_id = noise_image(x, "img2", 300, s, spec);
    CHECK(a.noisy.data != other_id.noisy.data);
    NoiseSpec draw1 = spec;
    draw1.draw_index = 1;
    CHECK(a.noisy.data != noise_image(x, "img", 300, s, draw1).noisy.data);
}

TEST_CASE("shared-epsilon mode reuses one draw across timesteps") {
    const DiffusionSchedule s = default_schedule();
    const ImageTensor x = test::random_image(1, 4, 3);
    NoiseSpec spec;
    spec.seed = 5;
    spec.share_across_timesteps = true;
    const NoisyImage a = noise_image(x, "img", 100, s, spec);
    const NoisyImage b = noise_image(x, "img", 500, s, spec);
    CHECK(a.epsilon == b.epsilon);
}

TEST_CASE("noise moments match the forward-process closed form") {
    // x = 0 at t = T: x_t ~ N(0, (1 - abar_T) I). Monte Carlo over 1e4 draws.
    const DiffusionSchedule s = default_schedule();
    ImageTensor x;
    x.channels = 1;
    x.side = 1;
    x.data = {0.0f};
    NoiseSpec spec;
    spec.seed = 7;
    const int draws = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int d = 0; d < draws; ++d) {
        spec.draw_index = static_cast<std::uint64_t>(d);
        const double v = noise_image(x, "mc", s.steps, s, spec).noisy.data[0];
        sum += v;
        sum_sq += v * v;
    }
    const double variance = 1.0 - s.alpha_bar(s.steps);
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    CHECK(std::abs(mean) <= 3.0 * std::sqrt(variance / draws));
    CHECK(std::abs(var - variance) <= 0.05 * variance);
}

TEST_CASE("noising is linear in the clean image under a shared draw") {
    const DiffusionSchedule s = default_schedule();
    const ImageTensor x = test::random_image(1, 6, 9);
    ImageTensor half = x;
    for (float& v : half.data) v *= 0.5f;

    NoiseSpec spec;
    spec.seed = 11;
    const int t = 400;
    const NoisyImage nx = noise_image(x, "lin", t, s, spec);
    const NoisyImage nh = noise_image(half, "lin", t, s, spec);
    CHECK(nx.epsilon == nh.epsilon);

    const double signal = std::sqrt(s.alpha_bar(t));
    const double noise = std::sqrt(1.0 - s.alpha_bar(t));
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double expected = signal * 0.5 * x.data[i] + noise * nx.epsilon[i];
        CHECK(nh.noisy.data[i] == doctest::Approx(expected).epsilon(1e-5));
    }
}

TEST_CASE("timestep bounds are enforced") {
    const DiffusionSchedule s = build_schedule(10, 1e-4, 0.02);
    const ImageTensor x = test::random_image(1, 2, 1);
    CHECK_THROWS_AS(noise_image(x, "x", 0, s, {NoiseMode::zero}), config_error);
    CHECK_THROWS_AS(noise_image(x, "x", 11, s, {NoiseMode::zero}), config_error);
}

TEST_CASE("interior patch extraction returns the full window") {
    const ImageTensor img = test::random_image(2, 3, 20);
    const PatchView p = extract_patch(img, 1, 1, 3);
    CHECK(p.size == 3);
    for (int c = 0; c < 2; ++c) {
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 3; ++x) {
                CHECK(p.at(c, y, x) == img.at(c, y, x));
            }
        }
    }
    CHECK(p.center_pixel[0] == img.at(0, 1, 1));
    CHECK(p.at(0, 1, 1) == p.center_pixel[0]);
}

TEST_CASE("corner patches are zero-padded") {
    const ImageTensor img = test::random_image(1, 3, 21);
    const PatchView p = extract_patch(img, 0, 0, 3);
    // Top-left corner at offset 1: first row and column of the patch fall
    // outside the image.
    for (int i = 0; i < 3; ++i) {
        CHECK(p.at(0, 0, i) == 0.0f);
        CHECK(p.at(0, i, 0) == 0.0f);
    }
    CHECK(p.at(0, 1, 1) == img.at(0, 0, 0));
    CHECK(p.at(0, 1, 2) == img.at(0, 0, 1));
    CHECK(p.at(0, 2, 1) == img.at(0, 1, 0));
    CHECK(p.at(0, 2, 2) == img.at(0, 1, 1));
}

TEST_CASE("single-pixel image and patch") {
    ImageTensor img;
    img.channels = 1;
    img.side = 1;
    img.data = {0.25f};
    const PatchView p = extract_patch(img, 0, 0, 1);
    CHECK(p.values.size() == 1);
    CHECK(p.values[0] == 0.25f);
    CHECK(p.center_pixel[0] == 0.25f);
}

TEST_CASE("patch centers hold u0 and every extraction is total") {
    const int L = 7;
    const ImageTensor img = test::random_image(1, L, 22);
    for (int P : {1, 2, 3, 4, 5}) {
        const int off = patch_offset(P);
        std::vector<int> coverage(L * L, 0);
        for (int cy = 0; cy < L; ++cy) {
            for (int cx = 0; cx < L; ++cx) {
                const PatchView p = extract_patch(img, cy, cx, P);
                CHECK(p.at(0, off, off) == p.center_pixel[0]);
                for (int dy = 0; dy < P; ++dy) {
                    for (int dx = 0; dx < P; ++dx) {
                        const int y = cy - off + dy;
                        const int x = cx - off + dx;
                        if (y >= 0 && y < L && x >= 0 && x < L) coverage[y * L + x]++;
                    }
                }
            }
        }
        // Interior pixels (>= floor(P/2) from every border) are covered by
        // exactly P^2 patches.
        const int margin = P / 2;
        for (int y = margin; y < L - margin; ++y) {
            for (int x = margin; x < L - margin; ++x) {
                CHECK(coverage[y * L + x] == P * P);
            }
        }
    }
}

TEST_CASE("downsample examples") {
    SUBCASE("2x2 mean") {
        const std::vector<float> patch{1, 2, 3, 4};
        const auto pooled = downsample(patch, 1, 2, 2);
        REQUIRE(pooled.size() == 1);
        CHECK(pooled[0] == doctest::Approx(2.5));
    }
    SUBCASE("window 1 is identity") {
        const ImageTensor img = test::random_image(2, 4, 23);
        const auto pooled = downsample(img.data, 2, 4, 1);
        CHECK(pooled == img.data);
    }
    SUBCASE("trailing rows and columns are dropped") {
        const std::vector<float> ones(9, 1.0f);
        const auto pooled = downsample(ones, 1, 3, 2);
        REQUIRE(pooled.size() == 1);
        CHECK(pooled[0] == doctest::Approx(1.0));
    }
    SUBCASE("window larger than the patch is an error") {
        CHECK_THROWS_AS(downsample(std::vector<float>{1, 2, 3, 4}, 1, 2, 3), config_error);
    }
}

TEST_CASE("downsample preserves the covered-region mean") {
    const int P = 7, w = 2;
    const ImageTensor img = test::random_image(3, P, 24);
    const auto pooled = downsample(img.data, 3, P, w);
    const int Q = P / w;
    double pooled_mean = 0.0;
    for (float v : pooled) pooled_mean += v;
    pooled_mean /= pooled.size();

    double covered = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < Q * w; ++y) {
            for (int x = 0; x < Q * w; ++x) covered += img.at(c, y, x);
        }
    }
    covered /= 3.0 * (Q * w) * (Q * w);
    CHECK(pooled_mean == doctest::Approx(covered).epsilon(1e-6));
}

TEST_CASE("dataset validation") {
    Dataset ds = test::random_dataset(3, 1, 4, 30);
    CHECK_NOTHROW(ds.validate());

    SUBCASE("duplicate ids rejected") {
        ds.ids[1] = ds.ids[0];
        CHECK_THROWS_AS(ds.validate(), data_error);
    }
    SUBCASE("shape mismatch rejected") {
        ds.images[2] = test::random_image(1, 5, 31);
        CHECK_THROWS_AS(ds.validate(), data_error);
    }
}

TEST_CASE("image range check names the offender") {
    ImageTensor img = test::random_image(1, 2, 32);
    img.data[3] = 1.5f;
    CHECK_THROWS_AS(img.check_range("test"), data_error);
}

TEST_CASE("counter rng streams are order-independent") {
    const CounterRng rng(9, "stream", 3, 0);
    const double a = rng.normal(17);
    const double b = rng.normal(4);
    CHECK(rng.normal(17) == a);
    CHECK(rng.normal(4) == b);
    CHECK(a != b);
}
