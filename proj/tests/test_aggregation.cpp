#include "nda/attribution.hpp"
#include "nda/errors.hpp"
#include "nda/matrix_io.hpp"
#include "nda/schedule.hpp"

#include <doctest.h>

#include "test_helpers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace nda;

namespace {

InfluenceConfig small_config(int t, int p, int p_low, double gamma, int k) {
    InfluenceConfig cfg;
    cfg.timesteps = {t};
    cfg.patch_size = {{t, p}};
    cfg.patch_size_low = {{t, p_low}};
    cfg.gamma = {{t, gamma}};
    cfg.top_k = k;
    cfg.noise_mode = NoiseMode::zero;
    return cfg;
}

// Brute-force image-level attribution for zero-noise single-timestep
// configs: direct patch loops, full softmax, explicit sort-based top-k.
// Shares no code with the engine path.
std::vector<double> brute_force_row(const ImageTensor& query, const Dataset& trainset,
                                    const DiffusionSchedule& schedule,
                                    const InfluenceConfig& cfg) {
    const int L = query.side;
    const int C = query.channels;
    const std::size_t n_train = trainset.size();
    std::vector<double> tau(n_train, 0.0);

    for (int t : cfg.timesteps) {
        const double abar = schedule.alpha_bar(t);
        const double signal = std::sqrt(abar);
        std::vector<float> noisy(query.data.size());
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            noisy[i] = static_cast<float>(signal * query.data[i]);
        }
        auto pixel = [&](const std::vector<float>& data, int side, int c, int y, int x) {
            if (y < 0 || y >= side || x < 0 || x >= side) return 0.0;
            return static_cast<double>(
                data[(static_cast<std::size_t>(c) * side + y) * side + x]);
        };
        auto pooled_patch = [&](const std::vector<float>& data, int side, int cy, int cx,
                                int P, int w) {
            const int off = (P - 1) / 2;
            const int Q = P / w;
            std::vector<double> out(static_cast<std::size_t>(C) * Q * Q);
            for (int c = 0; c < C; ++c) {
                for (int i = 0; i < Q; ++i) {
                    for (int j = 0; j < Q; ++j) {
                        double acc = 0.0;
                        for (int a = 0; a < w; ++a) {
                            for (int b = 0; b < w; ++b) {
                                acc += pixel(data, side, c, cy - off + i * w + a,
                                             cx - off + j * w + b);
                            }
                        }
                        out[(static_cast<std::size_t>(c) * Q + i) * Q + j] = acc / (w * w);
                    }
                }
            }
            return out;
        };

        struct ScalePass {
            int patch, window;
            double factor;
        };
        std::vector<ScalePass> passes;
        const double g = cfg.gamma_at(t);
        if (g > 0.0) passes.push_back({cfg.patch_size_at(t), 1, g});
        if (g < 1.0) passes.push_back({cfg.patch_size_low_at(t), cfg.window, 1.0 - g});

        for (const ScalePass& pass : passes) {
            for (int cy = 0; cy < L; ++cy) {
                for (int cx = 0; cx < L; ++cx) {
                    const auto qp = pooled_patch(noisy, L, cy, cx, pass.patch, pass.window);
                    // All N * L^2 distances.
                    std::vector<std::vector<double>> lws(n_train);
                    double max_lw = -1e300;
                    for (std::size_t n = 0; n < n_train; ++n) {
                        lws[n].resize(static_cast<std::size_t>(L) * L);
                        for (int ty = 0; ty < L; ++ty) {
                            for (int tx = 0; tx < L; ++tx) {
                                const auto tp = pooled_patch(trainset[n].data, L, ty, tx,
                                                             pass.patch, pass.window);
                                double d = 0.0;
                                for (std::size_t i = 0; i < qp.size(); ++i) {
                                    const double diff = qp[i] - signal * tp[i];
                                    d += diff * diff;
                                }
                                const double lw = -d / (2.0 * (1.0 - abar));
                                lws[n][ty * L + tx] = lw;
                                max_lw = std::max(max_lw, lw);
                            }
                        }
                    }
                    double lse_sum = 0.0;
                    for (const auto& image_lws : lws) {
                        for (double lw : image_lws) lse_sum += std::exp(lw - max_lw);
                    }
                    const double lse = max_lw + std::log(lse_sum);

                    for (std::size_t n = 0; n < n_train; ++n) {
                        std::vector<double> sorted = lws[n];
                        std::sort(sorted.begin(), sorted.end(), std::greater<double>());
                        const std::size_t keep =
                            std::min<std::size_t>(cfg.top_k, sorted.size());
                        double mass = 0.0;
                        for (std::size_t i = 0; i < keep; ++i) {
                            mass += std::exp(sorted[i] - lse);
                        }
                        tau[n] += pass.factor * mass;
                    }
                }
            }
        }
    }
    for (double& v : tau) v /= static_cast<double>(cfg.timesteps.size());
    return tau;
}

} // namespace

TEST_CASE("engine row matches the brute-force oracle on a small instance") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(5, 1, 8, 1000);
    const ImageTensor query = test::random_image(1, 8, 1100);

    for (double gamma : {1.0, 0.75, 0.0}) {
        const InfluenceConfig cfg = small_config(300, 3, 4, gamma, 7);
        std::vector<double> row;
        QueryProvenance prov;
        attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
        const std::vector<double> expected = brute_force_row(query, trainset, schedule, cfg);
        REQUIRE(row.size() == expected.size());
        for (std::size_t n = 0; n < row.size(); ++n) {
            CHECK(row[n] == doctest::Approx(expected[n]).epsilon(1e-9));
        }
    }
}

TEST_CASE("a single training image with exhaustive k soaks up L^2 mass") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(1, 1, 8, 1200);
    const ImageTensor query = test::random_image(1, 8, 1201);

    const InfluenceConfig cfg = small_config(200, 3, 4, 0.5, 64);
    std::vector<double> row;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
    REQUIRE(row.size() == 1);
    CHECK(row[0] == doctest::Approx(64.0).epsilon(1e-9));
}

TEST_CASE("a duplicated query owns the row argmax") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(5, 1, 8, 1300);
    const ImageTensor query = test::random_image(1, 8, 9001301);
    trainset.images[3] = query;

    const InfluenceConfig cfg = small_config(100, 3, 4, 1.0, 10);
    std::vector<double> row;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
    for (std::size_t n = 0; n < row.size(); ++n) {
        if (n != 3) CHECK(row[3] > row[n]);
    }
}

TEST_CASE("row mass never exceeds L^2") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(4, 1, 8, 1400);
    const ImageTensor query = test::random_image(1, 8, 9001401);

    for (int k : {1, 3, 64}) {
        for (double gamma : {1.0, 0.3}) {
            const InfluenceConfig cfg = small_config(300, 3, 4, gamma, k);
            std::vector<double> row;
            QueryProvenance prov;
            attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
            const double total = std::accumulate(row.begin(), row.end(), 0.0);
            CHECK(total <= 64.0 + 1e-6);
            for (double v : row) CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("every matrix entry is non-decreasing in k") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(4, 1, 8, 1500);
    const ImageTensor query = test::random_image(1, 8, 9001501);

    std::vector<double> previous;
    for (int k : {1, 4, 16, 64}) {
        const InfluenceConfig cfg = small_config(300, 3, 4, 0.75, k);
        std::vector<double> row;
        QueryProvenance prov;
        attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
        if (!previous.empty()) {
            for (std::size_t n = 0; n < row.size(); ++n) {
                CHECK(row[n] >= previous[n] - 1e-12);
            }
        }
        previous = row;
    }
}

TEST_CASE("permuting the training set permutes the columns") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(5, 1, 8, 1600);
    const ImageTensor query = test::random_image(1, 8, 9001601);
    const InfluenceConfig cfg = small_config(300, 3, 4, 1.0, 5);

    std::vector<double> row;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);

    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    Dataset shuffled;
    for (std::size_t i : perm) {
        shuffled.images.push_back(trainset.images[i]);
        shuffled.ids.push_back(trainset.ids[i]);
    }
    std::vector<double> shuffled_row;
    attribute_image(query, "q", shuffled, schedule, cfg, {}, shuffled_row, prov);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(shuffled_row[i] == doctest::Approx(row[perm[i]]).epsilon(1e-9));
    }
}

TEST_CASE("a timestep set averages the per-timestep matrices") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 1700);
    const ImageTensor query = test::random_image(1, 8, 9001701);

    InfluenceConfig multi;
    multi.timesteps = {100, 300};
    multi.patch_size = {{100, 3}, {300, 5}};
    multi.patch_size_low = {{100, 4}, {300, 4}};
    multi.gamma = {{100, 1.0}, {300, 1.0}};
    multi.top_k = 10;
    multi.noise_mode = NoiseMode::zero;

    std::vector<double> combined;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, multi, {}, combined, prov);

    std::vector<std::vector<double>> singles;
    for (int t : multi.timesteps) {
        const InfluenceConfig cfg = small_config(t, multi.patch_size_at(t), 4, 1.0, 10);
        std::vector<double> row;
        attribute_image(query, "q", trainset, schedule, cfg, {}, row, prov);
        singles.push_back(row);
    }
    for (std::size_t n = 0; n < combined.size(); ++n) {
        const double mean = 0.5 * (singles[0][n] + singles[1][n]);
        CHECK(combined[n] == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("zero-noise draws collapse to a single draw") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 1800);
    const ImageTensor query = test::random_image(1, 8, 9001801);

    InfluenceConfig one = small_config(300, 3, 4, 1.0, 5);
    InfluenceConfig two = one;
    two.draws = 2;

    std::vector<double> row1, row2;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, one, {}, row1, prov);
    attribute_image(query, "q", trainset, schedule, two, {}, row2, prov);
    CHECK(row1 == row2);
}

TEST_CASE("seeded draws differ and average") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 1900);
    const ImageTensor query = test::random_image(1, 8, 9001901);

    InfluenceConfig cfg = small_config(500, 3, 4, 1.0, 5);
    cfg.noise_mode = NoiseMode::seeded;
    cfg.seed = 9;
    InfluenceConfig two = cfg;
    two.draws = 2;

    std::vector<double> row1, row2;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, {}, row1, prov);
    attribute_image(query, "q", trainset, schedule, two, {}, row2, prov);
    CHECK(row1 != row2);
}

TEST_CASE("identical queries produce identical rows in query order") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 2000);
    Dataset queries;
    const ImageTensor q = test::random_image(1, 8, 9002001);
    queries.images = {q, test::random_image(1, 8, 2002), q};
    queries.ids = {"a", "b", "c"};

    InfluenceConfig cfg = small_config(300, 3, 4, 1.0, 5);
    const AttributionResult result = attribute_batch(queries, trainset, schedule, cfg, {});
    CHECK(result.matrix.query_ids == queries.ids);
    // Zero-noise: rows depend only on pixel content, so row a == row c.
    for (std::size_t n = 0; n < trainset.size(); ++n) {
        CHECK(result.matrix.at(0, n) == result.matrix.at(2, n));
    }
}

TEST_CASE("interrupted runs resume bit-identically from checkpoints") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 2100);
    Dataset queries = test::random_dataset(3, 1, 8, 2200, "query");
    InfluenceConfig cfg = small_config(300, 3, 4, 0.75, 5);
    cfg.noise_mode = NoiseMode::seeded;
    cfg.seed = 17;

    const test::TempDir dir("checkpoint");

    BatchOptions uninterrupted;
    const AttributionResult full = attribute_batch(queries, trainset, schedule, cfg,
                                                   uninterrupted);

    BatchOptions stop_early;
    stop_early.checkpoint_dir = dir.str("rows");
    stop_early.on_row = [](std::size_t done, std::size_t) { return done < 1; };
    const AttributionResult partial =
        attribute_batch(queries, trainset, schedule, cfg, stop_early);
    CHECK_FALSE(partial.complete);
    CHECK(partial.rows_done == 1);

    BatchOptions resume;
    resume.checkpoint_dir = dir.str("rows");
    const AttributionResult resumed = attribute_batch(queries, trainset, schedule, cfg, resume);
    CHECK(resumed.complete);
    CHECK(resumed.rows_reused == 1);
    CHECK(resumed.matrix.scores == full.matrix.scores);
    CHECK(resumed.matrix.fingerprint == full.matrix.fingerprint);

    // Provenance restored from checkpoints matches the uninterrupted run.
    REQUIRE(resumed.provenance.size() == full.provenance.size());
    for (std::size_t r = 0; r < full.provenance.size(); ++r) {
        CHECK(resumed.provenance[r].query_id == full.provenance[r].query_id);
        CHECK(resumed.provenance[r].train_indices == full.provenance[r].train_indices);
    }
}

TEST_CASE("a stale checkpoint from another config is ignored") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(2, 1, 8, 2300);
    Dataset queries = test::random_dataset(1, 1, 8, 2400, "query");
    const test::TempDir dir("stale");

    InfluenceConfig a = small_config(300, 3, 4, 1.0, 5);
    BatchOptions opts;
    opts.checkpoint_dir = dir.str("rows");
    attribute_batch(queries, trainset, schedule, a, opts);

    InfluenceConfig b = small_config(300, 5, 4, 1.0, 5);
    const AttributionResult fresh = attribute_batch(queries, trainset, schedule, b, opts);
    CHECK(fresh.rows_reused == 0);
}

TEST_CASE("provenance respects its cap and sorts by weight") {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = test::random_dataset(3, 1, 8, 2500);
    const ImageTensor query = test::random_image(1, 8, 9002501);
    const InfluenceConfig cfg = small_config(300, 3, 4, 0.5, 8);

    AttributeOptions opts;
    opts.provenance_cap = 4;
    opts.provenance_top = 2;
    std::vector<double> row;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, opts, row, prov);

    CHECK(prov.train_indices.size() <= 2);
    for (const auto& entries : prov.entries) {
        CHECK(entries.size() <= 4);
        for (std::size_t i = 1; i < entries.size(); ++i) {
            CHECK(entries[i - 1].weight >= entries[i].weight);
        }
    }
    // Stored train images are the row's best scorers.
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t i = 0; i < prov.train_indices.size(); ++i) {
        CHECK(prov.train_indices[i] == order[i]);
    }
}

TEST_CASE("top_influencers ranks and breaks ties by index") {
    AttributionMatrix m;
    m.query_ids = {"q"};
    m.train_ids = {"t0", "t1", "t2"};
    m.scores = {0.5, 0.2, 0.9};

    CHECK(top_influencers(m, "q", 2, RankSign::proponents) ==
          std::vector<std::string>{"t2", "t0"});
    CHECK(top_influencers(m, "q", 3, RankSign::proponents) ==
          std::vector<std::string>{"t2", "t0", "t1"});
    CHECK(top_influencers(m, "q", 2, RankSign::opponents) ==
          std::vector<std::string>{"t1", "t0"});
    CHECK_THROWS_AS(top_influencers(m, "missing", 1, RankSign::proponents), data_error);
    CHECK_THROWS_AS(top_influencers(m, "q", 4, RankSign::proponents), config_error);
}

TEST_CASE("counterfactual-scale export returns the requested unique ids") {
    AttributionMatrix m;
    m.query_ids = {"q"};
    const std::size_t n = 5000;
    const CounterRng rng(3, "scores", 0, 0);
    m.train_ids.reserve(n);
    m.scores.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.train_ids.push_back("t" + std::to_string(i));
        m.scores.push_back(rng.uniform(i));
    }
    const auto ids = top_influencers(m, "q", 1000, RankSign::proponents);
    CHECK(ids.size() == 1000);
    std::vector<std::string> unique = ids;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    CHECK(unique.size() == 1000);
    // Descending scores.
    for (std::size_t i = 1; i < ids.size(); ++i) {
        const auto a = std::find(m.train_ids.begin(), m.train_ids.end(), ids[i - 1]);
        const auto b = std::find(m.train_ids.begin(), m.train_ids.end(), ids[i]);
        CHECK(m.scores[a - m.train_ids.begin()] >= m.scores[b - m.train_ids.begin()]);
    }
}

TEST_CASE("config validation catches every invariant") {
    const DiffusionSchedule schedule = default_schedule();
    InfluenceConfig cfg;
    CHECK_NOTHROW(cfg.validate(schedule));

    InfluenceConfig bad = cfg;
    bad.timesteps = {};
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
    bad = cfg;
    bad.timesteps = {200, 100};
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
    bad = cfg;
    bad.timesteps = {100, 2000};
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
    bad = cfg;
    bad.top_k = 0;
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
    bad = cfg;
    bad.gamma[300] = 1.5;
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
    bad = cfg;
    bad.draws = 0;
    CHECK_THROWS_AS(bad.validate(schedule), config_error);
}

TEST_CASE("fingerprints cover config, schedule and ids") {
    const DiffusionSchedule s1 = default_schedule();
    const DiffusionSchedule s2 = build_schedule(500, 1e-4, 0.02);
    InfluenceConfig cfg;
    const std::vector<std::string> train{"a", "b"}, query{"q"};

    const auto base = config_fingerprint(cfg, s1, train, query);
    CHECK(base == config_fingerprint(cfg, s1, train, query));
    CHECK(base != config_fingerprint(cfg, s2, train, query));

    InfluenceConfig other = cfg;
    other.top_k = 7;
    CHECK(base != config_fingerprint(other, s1, train, query));
    other = cfg;
    other.backend = DistanceBackend::naive;
    CHECK(base != config_fingerprint(other, s1, train, query));
    CHECK(base != config_fingerprint(cfg, s1, {"a", "c"}, query));

    // Tiling knobs do not affect results and stay out of the fingerprint.
    other = cfg;
    other.patch_batch = 64;
    CHECK(base == config_fingerprint(other, s1, train, query));
}
