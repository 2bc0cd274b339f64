#include "nda/acceptance.hpp"

#include "nda/attribution.hpp"
#include "nda/baseline.hpp"
#include "nda/distance.hpp"
#include "nda/errors.hpp"
#include "nda/influence.hpp"
#include "nda/lds.hpp"
#include "nda/matrix_io.hpp"
#include "nda/parallel.hpp"
#include "nda/rng.hpp"
#include "nda/schedule.hpp"
#include "nda/score.hpp"
#include "nda/spearman.hpp"

#include <json.hpp>
#include <sys/resource.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

namespace nda {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t peak_rss_bytes() {
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    return static_cast<std::size_t>(usage.ru_maxrss) * 1024;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

ImageTensor random_image(int channels, int side, std::uint64_t seed, const char* stream) {
    ImageTensor img;
    img.channels = channels;
    img.side = side;
    img.data.resize(img.value_count());
    const CounterRng rng(seed, stream, 0, 0);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<float>(2.0 * rng.uniform(i) - 1.0);
    }
    return img;
}

Dataset random_dataset(std::size_t count, int channels, int side, std::uint64_t seed,
                       const char* prefix) {
    Dataset ds;
    for (std::size_t n = 0; n < count; ++n) {
        ds.images.push_back(random_image(channels, side, seed + n, prefix));
        ds.ids.push_back(std::string(prefix) + "-" + std::to_string(n));
    }
    return ds;
}

// ---- criterion 1: fast-vs-naive oracle equivalence ------------------------

CriterionResult oracle_equivalence(int workers) {
    const auto start = Clock::now();
    const int sides[] = {8, 16};
    const int channel_counts[] = {1, 3};
    const int patch_sizes[] = {3, 5, 7};

    double max_diff = 0.0;
    int cases = 0;
    const CounterRng pick(2024, "acceptance-c1", 0, 0);
    for (int rep = 0; rep < 220; ++rep) {
        const int L = sides[pick.bits(4 * rep) % 2];
        const int C = channel_counts[pick.bits(4 * rep + 1) % 2];
        const int P = patch_sizes[pick.bits(4 * rep + 2) % 3];
        const double abar = 0.3 + 0.69 * pick.uniform(4 * rep + 3);
        const int window = rep % 4 == 3 ? 2 : 1;   // extra pooled-scale coverage

        const ImageTensor train = random_image(C, L, 9000 + rep, "c1-train");
        const ImageTensor query = random_image(C, L, 9500 + rep, "c1-query");
        const int center = static_cast<int>(pick.bits(4 * rep + 7) % (L * L));
        const ScaleSpec scale{window == 1 ? P : std::max(P, window), window};
        const QueryPatchKernel kernel =
            make_query_kernel(query, center / L, center % L, scale);

        std::vector<double> naive(static_cast<std::size_t>(L) * L);
        std::vector<double> fast(naive.size());
        distance_plane_naive(kernel, train, scale, abar, naive.data());
        const TrainImageContext ctx = make_train_context(train, scale);
        distance_plane_fast(kernel, ctx, abar, fast.data());
        for (std::size_t i = 0; i < naive.size(); ++i) {
            max_diff = std::max(max_diff, std::abs(fast[i] - naive[i]));
        }
        ++cases;
    }
    (void)workers;
    const double elapsed = seconds_since(start);
    const bool ok = max_diff <= 1e-4 && elapsed < 30.0;
    return {1, "oracle-equivalence", ok,
            std::to_string(cases) + " cases, max |fast - naive| = " + fmt(max_diff) + ", " +
                fmt(elapsed) + " s"};
}

// ---- criterion 2: softmax mass ---------------------------------------------

CriterionResult softmax_mass(int workers) {
    const DiffusionSchedule schedule = default_schedule();
    double worst = 0.0;
    for (const auto& [n_train, side] : {std::pair{3, 8}, std::pair{9, 16}}) {
        Dataset trainset = random_dataset(n_train, 3, side, 100 + side, "c2-train");
        const ImageTensor query = random_image(3, side, 50 + side, "c2-query");
        NoiseSpec spec;
        spec.seed = 7;
        const NoisyImage noisy = noise_image(query, "q", 300, schedule, spec);

        InfluenceParams params;
        params.top_k = side * side;       // exhaustive: every patch retained
        params.workers = workers;
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
    }
    return {2, "softmax-mass", worst <= 1e-6, "max |mass - 1| = " + fmt(worst)};
}

// ---- criterion 3: score degeneracies ---------------------------------------

CriterionResult score_degeneracy(int) {
    const DiffusionSchedule schedule = default_schedule();
    double worst_local = 0.0;
    {
        Dataset trainset;
        const CounterRng rng(12, "c3-scalar", 0, 0);
        for (int n = 0; n < 8; ++n) {
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
        x.data = {-0.4f};
        NoiseSpec spec;
        spec.seed = 21;
        for (int t : {50, 100, 300, 500, 900}) {
            const NoisyImage noisy = noise_image(x, "q", t, schedule, spec);
            const ScoreField g = global_score(noisy, trainset);
            const ScoreField l = local_score(noisy, trainset, 1);
            worst_local = std::max(worst_local, std::abs(g.values[0] - l.values[0]));
        }
    }

    double worst_singleton = 0.0;
    {
        Dataset trainset;
        trainset.images.push_back(random_image(3, 8, 77, "c3-single"));
        trainset.ids.push_back("only");
        const ImageTensor query = random_image(3, 8, 78, "c3-query");
        NoiseSpec spec;
        spec.seed = 9;
        const NoisyImage noisy = noise_image(query, "q", 400, schedule, spec);
        const ScoreField g = global_score(noisy, trainset);
        const double abar = noisy.alpha_bar;
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double expected =
                (std::sqrt(abar) * trainset[0].data[i] - noisy.noisy.data[i]) / (1.0 - abar);
            worst_singleton = std::max(worst_singleton, std::abs(g.values[i] - expected));
        }
    }
    const bool ok = worst_local <= 1e-10 && worst_singleton <= 1e-10;
    return {3, "score-degeneracy", ok,
            "local-vs-global " + fmt(worst_local) + ", singleton " + fmt(worst_singleton)};
}

// ---- criterion 4: duplicate detection ---------------------------------------

CriterionResult duplicate_detection(int workers) {
    const auto start = Clock::now();
    const DiffusionSchedule schedule = default_schedule();
    const int side = 32, channels = 1;
    const std::size_t n_train = 500;

    InfluenceConfig cfg;
    cfg.timesteps = {100};
    cfg.patch_size = {{100, 3}};
    cfg.patch_size_low = {{100, 8}};
    cfg.gamma = {{100, 1.0}};
    cfg.top_k = 100;
    cfg.noise_mode = NoiseMode::zero;

    AttributeOptions opts;
    opts.workers = workers;
    opts.provenance_cap = 0;

    int hits = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        Dataset trainset =
            random_dataset(n_train, channels, side, 40000 + trial * 1000, "c4-train");
        const ImageTensor query =
            random_image(channels, side, 90000 + trial, "c4-query");
        const std::size_t dup = (static_cast<std::size_t>(trial) * 7919) % n_train;
        trainset.images[dup] = query;

        std::vector<double> row;
        QueryProvenance prov;
        attribute_image(query, "q", trainset, schedule, cfg, opts, row, prov);

        bool strict = true;
        for (std::size_t n = 0; n < n_train; ++n) {
            if (n != dup && row[n] >= row[dup]) {
                strict = false;
                break;
            }
        }
        if (strict) ++hits;
    }
    return {4, "duplicate-detection", hits == trials,
            std::to_string(hits) + "/" + std::to_string(trials) + " strict argmax trials, " +
                fmt(seconds_since(start)) + " s"};
}

// ---- criterion 5: multiscale endpoints --------------------------------------

CriterionResult multiscale_endpoints(int workers) {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = random_dataset(6, 3, 8, 300, "c5-train");
    Dataset queries = random_dataset(2, 3, 8, 350, "c5-query");

    auto run = [&](double g, int p_orig, int p_low) {
        InfluenceConfig cfg;
        cfg.timesteps = {200};
        cfg.patch_size = {{200, p_orig}};
        cfg.patch_size_low = {{200, p_low}};
        cfg.gamma = {{200, g}};
        cfg.top_k = 10;
        cfg.seed = 4;
        BatchOptions opts;
        opts.workers = workers;
        return attribute_batch(queries, trainset, schedule, cfg, opts).matrix.scores;
    };

    // At gamma = 1 the unused low-scale patch size must not leak into the
    // scores; symmetrically for gamma = 0 and the original patch size.
    const auto orig_a = run(1.0, 5, 4);
    const auto orig_b = run(1.0, 5, 8);
    const auto low_a = run(0.0, 5, 6);
    const auto low_b = run(0.0, 3, 6);

    const bool ok = orig_a == orig_b && low_a == low_b;
    return {5, "multiscale-endpoints", ok,
            ok ? "gamma endpoints reproduce single-scale runs bit-for-bit"
               : "endpoint runs differ"};
}

// ---- criterion 6: LDS protocol ----------------------------------------------

CriterionResult lds_protocol(int) {
    AttributionMatrix matrix;
    const std::size_t n_query = 100, n_train = 200;
    const CounterRng rng(606, "c6-matrix", 0, 0);
    for (std::size_t q = 0; q < n_query; ++q) matrix.query_ids.push_back("q" + std::to_string(q));
    for (std::size_t n = 0; n < n_train; ++n) matrix.train_ids.push_back("t" + std::to_string(n));
    matrix.scores.resize(n_query * n_train);
    for (std::size_t i = 0; i < matrix.scores.size(); ++i) {
        matrix.scores[i] = rng.uniform(i);
    }

    const LDSInput clean = make_synthetic_lds(matrix, 64, 0.5, 0.0, 17);
    const LDSReport clean_report = lds(matrix, clean);
    const bool exact = clean_report.mean == 1.0 && clean_report.degenerate_count == 0;

    const LDSInput noisy =
        make_synthetic_lds(matrix, 64, 0.5, std::numeric_limits<double>::infinity(), 18);
    const LDSReport null_report = lds(matrix, noisy);
    const bool null_ok = std::abs(null_report.mean) < 3.0 * null_report.std_error;

    return {6, "lds-protocol", exact && null_ok,
            "noise-free mean = " + fmt(clean_report.mean * 100.0) + "%, null mean = " +
                fmt(null_report.mean * 100.0) + "% (3 SE = " +
                fmt(3.0 * null_report.std_error * 100.0) + "%)"};
}

// ---- criterion 7: spearman unit values --------------------------------------

CriterionResult spearman_units(int) {
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    const auto inv = spearman(a, b);
    const std::vector<double> c{1, 2, 3, 4, 5}, d{2, 1, 4, 3, 5};
    const auto worked = spearman(c, d);
    const bool ok = inv && *inv == -1.0 && worked && std::abs(*worked - 0.8) <= 1e-12;
    return {7, "spearman-units", ok,
            "reversed = " + (inv ? fmt(*inv) : "degenerate") + ", worked example = " +
                (worked ? fmt(*worked) : "degenerate")};
}

// ---- criterion 8: determinism under parallelism ------------------------------

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

CriterionResult worker_determinism(int) {
    const DiffusionSchedule schedule = default_schedule();
    Dataset trainset = random_dataset(24, 3, 16, 800, "c8-train");
    Dataset queries = random_dataset(3, 3, 16, 850, "c8-query");

    InfluenceConfig cfg;
    cfg.timesteps = {100, 300};
    cfg.patch_size = {{100, 5}, {300, 7}};
    cfg.patch_size_low = {{100, 6}, {300, 8}};
    cfg.gamma = {{100, 0.75}, {300, 0.75}};
    cfg.top_k = 20;
    cfg.seed = 31;

    const auto dir = std::filesystem::temp_directory_path() /
                     ("nda-c8-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::vector<std::vector<char>> outputs;
    for (int workers : {1, 4, 8}) {
        BatchOptions opts;
        opts.workers = workers;
        const AttributionResult result = attribute_batch(queries, trainset, schedule, cfg, opts);
        const std::string path = (dir / ("w" + std::to_string(workers) + ".ndam")).string();
        save_matrix(result.matrix, path);
        outputs.push_back(file_bytes(path));
    }
    std::filesystem::remove_all(dir);
    const bool ok = outputs[0] == outputs[1] && outputs[1] == outputs[2];
    return {8, "worker-determinism", ok,
            ok ? "1/4/8 workers produced byte-identical matrix files"
               : "matrix files differ across worker counts"};
}

// ---- criterion 9: performance and memory budget ------------------------------

struct PerfOutcome {
    double seconds = 0.0;
    std::size_t rss = 0;
    std::size_t bound = 0;
    std::uint64_t distances = 0;
};

PerfOutcome run_perf_workload() {
    const DiffusionSchedule schedule = default_schedule();
    const int side = 32, channels = 3;
    const std::size_t n_train = 500;
    Dataset trainset = random_dataset(n_train, channels, side, 70000, "c9-train");
    const ImageTensor query = random_image(channels, side, 70777, "c9-query");

    InfluenceConfig cfg;
    cfg.timesteps = {300};
    cfg.patch_size = {{300, 9}};
    cfg.patch_size_low = {{300, 8}};
    cfg.gamma = {{300, 1.0}};
    cfg.top_k = 100;
    cfg.seed = 1;

    std::uint64_t distances = 0;
    AttributeOptions opts;
    opts.workers = 0;
    opts.distance_counter = &distances;

    const auto start = Clock::now();
    std::vector<double> row;
    QueryProvenance prov;
    attribute_image(query, "q", trainset, schedule, cfg, opts, row, prov);
    PerfOutcome out;
    out.seconds = seconds_since(start);
    out.rss = peak_rss_bytes();
    const std::size_t trainset_bytes =
        n_train * static_cast<std::size_t>(channels) * side * side * sizeof(float);
    out.bound = 4 * trainset_bytes +
                static_cast<std::size_t>(cfg.patch_batch) * n_train * side * side * sizeof(float);
    out.distances = distances;
    return out;
}

CriterionResult perf_budget(const std::string& self_exe) {
    PerfOutcome outcome;
    std::string mode;
    if (!self_exe.empty()) {
        const std::string cmd = "\"" + self_exe + "\" --inner-perf";
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe) {
            return {9, "performance-budget", false, "cannot spawn " + cmd};
        }
        std::string output;
        char buf[512];
        while (fgets(buf, sizeof(buf), pipe)) output += buf;
        const int status = pclose(pipe);
        if (status != 0) {
            return {9, "performance-budget", false, "inner-perf child failed"};
        }
        try {
            const auto j = nlohmann::json::parse(output);
            outcome.seconds = j.at("seconds").get<double>();
            outcome.rss = j.at("peak_rss_bytes").get<std::size_t>();
            outcome.bound = j.at("bound_bytes").get<std::size_t>();
            outcome.distances = j.at("distances").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            return {9, "performance-budget", false,
                    std::string("bad inner-perf output: ") + e.what()};
        }
        mode = "child process";
    } else {
        outcome = run_perf_workload();
        mode = "in-process";
    }
    const bool ok = outcome.seconds <= 60.0 && outcome.rss <= outcome.bound;
    return {9, "performance-budget", ok,
            fmt(outcome.seconds) + " s, peak RSS " + fmt(outcome.rss / 1048576.0) + " MiB vs " +
                fmt(outcome.bound / 1048576.0) + " MiB bound, " +
                fmt(outcome.distances / std::max(outcome.seconds, 1e-9) / 1e6) +
                " M patch-distances/s (" + mode + ")"};
}

// ---- criterion 10: baseline ordering sanity ----------------------------------

CriterionResult baseline_ordering(int workers) {
    const int side = 8, channels = 3;
    const int per_class = 20, n_classes = 3, queries_per_class = 10;
    const double class_levels[n_classes][3] = {
        {-0.6, 0.0, 0.6}, {0.6, -0.6, 0.0}, {0.0, 0.6, -0.6}};

    auto toy_image = [&](int cls, std::uint64_t seed, const char* stream) {
        ImageTensor img;
        img.channels = channels;
        img.side = side;
        img.data.resize(img.value_count());
        const CounterRng rng(seed, stream, cls, 0);
        for (int c = 0; c < channels; ++c) {
            for (int p = 0; p < side * side; ++p) {
                const std::size_t i = static_cast<std::size_t>(c) * side * side + p;
                const double noise = 0.15 * rng.normal(i);
                img.data[i] = static_cast<float>(
                    std::clamp(class_levels[cls][c] + noise, -0.999, 0.999));
            }
        }
        return img;
    };

    Dataset trainset, queries;
    std::vector<int> train_class, query_class;
    for (int cls = 0; cls < n_classes; ++cls) {
        for (int i = 0; i < per_class; ++i) {
            trainset.images.push_back(toy_image(cls, 1000 + cls * 100 + i, "c10-train"));
            trainset.ids.push_back("t" + std::to_string(cls) + "-" + std::to_string(i));
            train_class.push_back(cls);
        }
        for (int i = 0; i < queries_per_class; ++i) {
            queries.images.push_back(toy_image(cls, 5000 + cls * 100 + i, "c10-query"));
            queries.ids.push_back("q" + std::to_string(cls) + "-" + std::to_string(i));
            query_class.push_back(cls);
        }
    }

    const DiffusionSchedule schedule = default_schedule();
    InfluenceConfig cfg;
    cfg.timesteps = {100};
    cfg.patch_size = {{100, 5}};
    cfg.patch_size_low = {{100, 8}};
    cfg.gamma = {{100, 1.0}};
    cfg.top_k = side * side;
    cfg.noise_mode = NoiseMode::zero;
    BatchOptions opts;
    opts.workers = workers;
    const AttributionMatrix nda_matrix =
        attribute_batch(queries, trainset, schedule, cfg, opts).matrix;
    const AttributionMatrix cos_matrix =
        raw_pixel_baseline(queries, trainset, PixelMetric::cosine).matrix;

    auto evaluate = [&](const AttributionMatrix& m, int& separated, double& mean_rank) {
        separated = 0;
        double rank_sum = 0.0;
        std::size_t rank_count = 0;
        for (std::size_t q = 0; q < queries.size(); ++q) {
            const double* row = m.row(q);
            std::vector<std::size_t> order(trainset.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (row[a] != row[b]) return row[a] > row[b];
                return a < b;
            });
            bool perfect = true;
            for (std::size_t r = 0; r < order.size(); ++r) {
                const bool same = train_class[order[r]] == query_class[q];
                if (same) {
                    rank_sum += static_cast<double>(r + 1);
                    ++rank_count;
                    if (r >= static_cast<std::size_t>(per_class)) perfect = false;
                }
            }
            if (perfect) ++separated;
        }
        mean_rank = rank_sum / static_cast<double>(rank_count);
    };

    int nda_sep = 0, cos_sep = 0;
    double nda_rank = 0.0, cos_rank = 0.0;
    evaluate(nda_matrix, nda_sep, nda_rank);
    evaluate(cos_matrix, cos_sep, cos_rank);

    const int threshold = static_cast<int>(0.9 * static_cast<double>(queries.size()));
    const bool ok = nda_sep >= threshold && cos_sep >= threshold && nda_rank <= cos_rank;
    return {10, "baseline-ordering", ok,
            "class separated queries: attribution " + std::to_string(nda_sep) + "/" +
                std::to_string(queries.size()) + ", cosine " + std::to_string(cos_sep) + "/" +
                std::to_string(queries.size()) + "; mean within-class rank " + fmt(nda_rank) +
                " vs " + fmt(cos_rank)};
}

} // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    std::vector<CriterionResult> results;
    auto wanted = [&](int n) {
        return opts.only.empty() ||
               std::find(opts.only.begin(), opts.only.end(), n) != opts.only.end();
    };
    if (wanted(1)) results.push_back(oracle_equivalence(opts.workers));
    if (wanted(2)) results.push_back(softmax_mass(opts.workers));
    if (wanted(3)) results.push_back(score_degeneracy(opts.workers));
    if (wanted(4)) results.push_back(duplicate_detection(opts.workers));
    if (wanted(5)) results.push_back(multiscale_endpoints(opts.workers));
    if (wanted(6)) results.push_back(lds_protocol(opts.workers));
    if (wanted(7)) results.push_back(spearman_units(opts.workers));
    if (wanted(8)) results.push_back(worker_determinism(opts.workers));
    if (wanted(9)) results.push_back(perf_budget(opts.self_exe));
    if (wanted(10)) results.push_back(baseline_ordering(opts.workers));
    return results;
}

bool report_acceptance(const std::vector<CriterionResult>& results) {
    bool ok = true;
    for (const CriterionResult& r : results) {
        std::printf("[%s] criterion %d (%s): %s\n", r.passed ? "PASS" : "FAIL", r.number,
                    r.name.c_str(), r.detail.c_str());
        ok = ok && r.passed;
    }
    return ok;
}

int inner_perf_main() {
    const PerfOutcome outcome = run_perf_workload();
    nlohmann::json j;
    j["seconds"] = outcome.seconds;
    j["peak_rss_bytes"] = outcome.rss;
    j["bound_bytes"] = outcome.bound;
    j["distances"] = outcome.distances;
    std::printf("%s\n", j.dump().c_str());
    return 0;
}

} // namespace nda
