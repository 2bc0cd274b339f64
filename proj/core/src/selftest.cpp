#include "nda/selftest.hpp"

#include "nda/distance.hpp"
#include "nda/image.hpp"
#include "nda/influence.hpp"
#include "nda/noise.hpp"
#include "nda/rng.hpp"
#include "nda/schedule.hpp"
#include "nda/score.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

namespace nda {

namespace {

struct FixtureCase {
    const char* name;
    std::uint64_t image_seed;     // train image stream
    std::uint64_t query_seed;     // query image stream
    int center_row;
    int center_col;
    int patch_size;
    int window;
    double alpha_bar;
    int probe_centers[4];         // flat centers checked against frozen values
    double expected[4];           // naive-oracle distances, frozen
};

#include "selftest_fixtures.inc"

constexpr int kFixtureSide = 8;
constexpr int kFixtureChannels = 3;

ImageTensor fixture_image(std::uint64_t seed) {
    ImageTensor img;
    img.channels = kFixtureChannels;
    img.side = kFixtureSide;
    img.data.resize(img.value_count());
    const CounterRng rng(seed, "selftest-image", 0, 0);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<float>(2.0 * rng.uniform(i) - 1.0);
    }
    return img;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace

std::vector<CheckResult> run_score_checks(const ScoreCheckOptions& opts) {
    std::vector<CheckResult> results;
    auto record = [&](const std::string& name, bool ok, const std::string& detail) {
        results.push_back({name, ok, detail});
    };

    // Frozen oracle distances plus fast-vs-naive agreement per fixture case.
    bool perturbation_spent = false;
    for (const FixtureCase& fc : kFixtureCases) {
        const ImageTensor train = fixture_image(fc.image_seed);
        const ImageTensor query = fixture_image(fc.query_seed);
        const ScaleSpec scale{fc.patch_size, fc.window};
        const QueryPatchKernel kernel =
            make_query_kernel(query, fc.center_row, fc.center_col, scale);

        const std::size_t plane_len = static_cast<std::size_t>(kFixtureSide) * kFixtureSide;
        std::vector<double> naive(plane_len), fast(plane_len);
        distance_plane_naive(kernel, train, scale, fc.alpha_bar, naive.data());
        const TrainImageContext ctx = make_train_context(train, scale);
        distance_plane_fast(kernel, ctx, fc.alpha_bar, fast.data());

        if (!perturbation_spent && opts.inject_perturbation != 0.0) {
            fast[plane_len / 2] += opts.inject_perturbation;
            perturbation_spent = true;
        }

        double max_diff = 0.0;
        for (std::size_t i = 0; i < plane_len; ++i) {
            max_diff = std::max(max_diff, std::abs(fast[i] - naive[i]));
        }
        record(std::string("fast-vs-naive/") + fc.name, max_diff <= 1e-4,
               "max |fast - naive| = " + format_double(max_diff));

        double frozen_naive = 0.0, frozen_fast = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int c = fc.probe_centers[i];
            frozen_naive = std::max(frozen_naive, std::abs(naive[c] - fc.expected[i]));
            frozen_fast = std::max(frozen_fast, std::abs(fast[c] - fc.expected[i]));
        }
        record(std::string("frozen-oracle/") + fc.name,
               frozen_naive <= 1e-6 && frozen_fast <= 1e-4,
               "naive drift " + format_double(frozen_naive) + ", fast drift " +
                   format_double(frozen_fast));
    }

    const DiffusionSchedule schedule = default_schedule();

    // Softmax mass over an exhaustively retained patch set.
    {
        Dataset trainset;
        for (int n = 0; n < 3; ++n) {
            trainset.images.push_back(fixture_image(100 + n));
            trainset.ids.push_back("train-" + std::to_string(n));
        }
        const ImageTensor query = fixture_image(7);
        NoiseSpec spec;
        spec.seed = 11;
        const NoisyImage noisy = noise_image(query, "query-0", 300, schedule, spec);

        InfluenceParams params;
        params.top_k = kFixtureSide * kFixtureSide;
        params.workers = opts.workers;
        double worst = 0.0;
        for (int window : {1, 2}) {
            const ScaleSpec scale{window == 1 ? 5 : 6, window};
            const auto summaries = patch_influence(noisy, trainset, scale, params);
            for (const PatchSummary& s : summaries) {
                double mass = 0.0;
                for (const TopkEntry& e : s.entries) {
                    mass += std::exp(e.log_weight - s.logsumexp);
                }
                worst = std::max(worst, std::abs(mass - 1.0));
            }
        }
        record("softmax-mass/8x8", worst <= 1e-6, "max |mass - 1| = " + format_double(worst));
    }

    // Local score equals global score on single-pixel instances.
    {
        Dataset trainset;
        const CounterRng rng(42, "selftest-scalar", 0, 0);
        for (int n = 0; n < 6; ++n) {
            ImageTensor z;
            z.channels = 1;
            z.side = 1;
            z.data = {static_cast<float>(2.0 * rng.uniform(n) - 1.0)};
            trainset.images.push_back(std::move(z));
            trainset.ids.push_back("z" + std::to_string(n));
        }
        ImageTensor x;
        x.channels = 1;
        x.side = 1;
        x.data = {0.3f};
        NoiseSpec spec;
        spec.seed = 5;
        double worst = 0.0;
        for (int t : {100, 500, 900}) {
            const NoisyImage noisy = noise_image(x, "q", t, schedule, spec);
            const ScoreField g = global_score(noisy, trainset);
            const ScoreField l = local_score(noisy, trainset, 1);
            worst = std::max(worst, std::abs(g.values[0] - l.values[0]));
        }
        record("local-vs-global/L1", worst <= 1e-10,
               "max |local - global| = " + format_double(worst));
    }

    // Singleton training set: score has the closed form (sqrt(abar) z - x) / (1 - abar).
    {
        Dataset trainset;
        trainset.images.push_back(fixture_image(55));
        trainset.ids.push_back("only");
        const ImageTensor query = fixture_image(56);
        NoiseSpec spec;
        spec.seed = 3;
        const NoisyImage noisy = noise_image(query, "q", 400, schedule, spec);
        const ScoreField g = global_score(noisy, trainset);
        const double abar = noisy.alpha_bar;
        double worst = 0.0;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double expected =
                (std::sqrt(abar) * trainset[0].data[i] - noisy.noisy.data[i]) / (1.0 - abar);
            worst = std::max(worst, std::abs(g.values[i] - expected));
        }
        record("singleton-score", worst <= 1e-10, "max deviation = " + format_double(worst));
    }

    // Schedule product against the frozen scalar-loop value.
    {
        const double expected = 4.0358297653756754e-05;
        const double got = schedule.alpha_bar(1000);
        const bool ok = std::abs(got - expected) <= 1e-12 * expected + 1e-18;
        bool monotone = true;
        for (int t = 1; t <= schedule.steps; ++t) {
            if (!(schedule.alpha_bar(t) < schedule.alpha_bar(t - 1))) monotone = false;
        }
        record("schedule/alpha-bar", ok && monotone,
               "alpha_bar(1000) = " + format_double(got));
    }

    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const CheckResult& r : results) {
        if (!r.passed) return false;
    }
    return true;
}

} // namespace nda
