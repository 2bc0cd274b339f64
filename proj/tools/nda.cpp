// Patch-based data attribution for diffusion-style image generation.
//
// Subcommands: attribute, lds, baseline, score-check, heatmap,
// counterfactual-export, selftest. Exit codes: 0 success, 2 configuration
// error, 3 data/format error, 4 compute error.

#include "nda/acceptance.hpp"
#include "nda/attribution.hpp"
#include "nda/baseline.hpp"
#include "nda/errors.hpp"
#include "nda/heatmap.hpp"
#include "nda/lds.hpp"
#include "nda/lds_io.hpp"
#include "nda/matrix_io.hpp"
#include "nda/provenance_io.hpp"
#include "nda/run_config.hpp"
#include "nda/selftest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitCompute = 4;

void print_error_record(const std::string& type, const std::string& message) {
    nlohmann::json record;
    record["error"] = {{"type", type}, {"message", message}};
    std::cerr << record.dump() << "\n";
}

// Keys shared by the config file and the command line; unset flags leave the
// file (or default) value in place.
const std::vector<std::pair<std::string, std::string>> kConfigKeys = {
    {"train.kind", "training dataset kind: cifar_binary | image_directory | raw_tensor"},
    {"train.path", "training dataset path"},
    {"train.labels", "cifar label filter, e.g. 1,7"},
    {"train.crop", "center-crop side before resize (image_directory)"},
    {"train.resize", "bilinear resize target side (image_directory)"},
    {"train.channels", "declared channels (raw_tensor)"},
    {"train.side", "declared side (raw_tensor)"},
    {"train.limit", "keep only the first n images"},
    {"query.kind", "query dataset kind"},
    {"query.path", "query dataset path"},
    {"query.labels", "cifar label filter"},
    {"query.crop", "center-crop side before resize"},
    {"query.resize", "bilinear resize target side"},
    {"query.channels", "declared channels (raw_tensor)"},
    {"query.side", "declared side (raw_tensor)"},
    {"query.limit", "keep only the first n images"},
    {"schedule.steps", "diffusion steps T (default 1000)"},
    {"schedule.beta_min", "first beta (default 1e-4)"},
    {"schedule.beta_max", "last beta (default 0.02)"},
    {"influence.timesteps", "timestep set (default 100,200,300,400,500)"},
    {"influence.patch_size", "patch size, single value or t:v list (default 100:5,200:7,300:9,400:21,500:21)"},
    {"influence.patch_size_low", "low-scale patch size before pooling (default 100:8,200:8,300:10,400:21,500:21)"},
    {"influence.window", "average-pool window for the low scale (default 2)"},
    {"influence.gamma", "original-scale weight, single value or t:v list (default 0.75)"},
    {"influence.k", "top patches kept per training image (default 100)"},
    {"influence.noise", "noise mode: seeded | zero (default seeded)"},
    {"influence.seed", "noise seed (default 0)"},
    {"influence.share_noise", "share epsilon across timesteps (default off)"},
    {"influence.draws", "epsilon draws per (image, t), averaged (default 1)"},
    {"influence.backend", "distance backend: fast | naive (default fast)"},
    {"influence.low_variance_rescale", "experimental: shrink the low-scale variance by window^2"},
    {"influence.patch_batch", "query patches per work item (default 32; no effect on results)"},
    {"run.output", "output directory (default nda-out)"},
    {"run.workers", "worker threads, 0 = all cores"},
    {"run.checkpoint", "per-row checkpointing on/off (default on)"},
    {"run.csv", "also export matrix.csv (default off)"},
    {"run.provenance_cap", "patch entries kept per (query, train) pair (default 16)"},
    {"run.provenance_top", "training images stored per query, 0 = all (default 8)"},
};

struct ConfigCapture {
    std::string config_path;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "key=value config file; flags override");
        for (const auto& [key, help] : kConfigKeys) {
            options[key] = cmd->add_option("--" + key, values[key], help)
                               ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        }
    }

    nda::RunConfig resolve() const {
        std::map<std::string, std::string> file_values;
        if (!config_path.empty()) {
            file_values = nda::parse_key_value_file(config_path);
        }
        std::map<std::string, std::string> overrides;
        for (const auto& [key, opt] : options) {
            if (opt->count() > 0) overrides[key] = values.at(key);
        }
        return nda::make_run_config(file_values, overrides);
    }
};

int cmd_attribute(const ConfigCapture& capture) {
    const nda::RunConfig cfg = capture.resolve();
    const nda::DiffusionSchedule schedule =
        nda::build_schedule(cfg.schedule_steps, cfg.beta_min, cfg.beta_max);
    cfg.influence.validate(schedule);

    const nda::Dataset trainset = cfg.train.load();
    const nda::Dataset queries = cfg.query.load();
    std::filesystem::create_directories(cfg.output_dir);
    const auto out = std::filesystem::path(cfg.output_dir);

    {
        std::ofstream echo(out / "run_config.txt", std::ios::trunc);
        echo << cfg.influence.canonical_text() << "\n";
    }

    std::uint64_t distances = 0;
    const auto start = std::chrono::steady_clock::now();

    nda::BatchOptions opts;
    opts.workers = cfg.workers;
    opts.provenance_cap = cfg.provenance_cap;
    opts.provenance_top = cfg.provenance_top;
    opts.distance_counter = &distances;
    if (cfg.checkpoint) opts.checkpoint_dir = (out / "checkpoints").string();
    opts.on_row = [&](std::size_t done, std::size_t total) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("query %zu/%zu done, %.3g M patch-distances/s\n", done, total,
                    distances / std::max(elapsed, 1e-9) / 1e6);
        std::fflush(stdout);
        return true;
    };

    const nda::AttributionResult result =
        nda::attribute_batch(queries, trainset, schedule, cfg.influence, opts);
    if (!result.complete) {
        throw nda::compute_error("attribution run did not complete all rows");
    }

    nda::save_matrix(result.matrix, (out / "matrix.ndam").string());
    if (cfg.write_csv) nda::save_matrix_csv(result.matrix, (out / "matrix.csv").string());
    nda::save_provenance(result.provenance, result.matrix.fingerprint, trainset.ids,
                         (out / "provenance.json").string());
    std::printf("wrote %s (%zu x %zu, fingerprint %016llx)\n",
                (out / "matrix.ndam").string().c_str(), result.matrix.rows(),
                result.matrix.cols(),
                static_cast<unsigned long long>(result.matrix.fingerprint));
    return kExitOk;
}

int cmd_lds(const std::string& matrix_path, const std::string& input_path,
            const std::string& out_dir, const std::string& label) {
    const nda::AttributionMatrix matrix = nda::load_matrix(matrix_path);
    const nda::LDSInput input = nda::load_lds_input(input_path);
    if (input.fingerprint != 0 && input.fingerprint != matrix.fingerprint) {
        throw nda::data_error("LDS input fingerprint does not match the matrix fingerprint; "
                              "refusing to mix artifacts from different runs");
    }
    const nda::LDSReport report = nda::lds(matrix, input, label);

    std::filesystem::create_directories(out_dir);
    const auto out = std::filesystem::path(out_dir);
    nda::save_lds_report(report, input.query_ids, (out / "lds_per_query.csv").string(),
                         (out / "lds_summary.txt").string());
    std::printf("LDS mean %.4f%% +/- %.4f%% over %zu subsets (%zu queries, %zu degenerate)\n",
                report.mean * 100.0, report.std_error * 100.0, report.subset_count,
                input.query_ids.size(), report.degenerate_count);
    return kExitOk;
}

int cmd_baseline(const ConfigCapture& capture, const std::string& metric,
                 const std::string& out_dir) {
    const nda::RunConfig cfg = capture.resolve();
    nda::PixelMetric m;
    if (metric == "dot") {
        m = nda::PixelMetric::dot;
    } else if (metric == "cosine") {
        m = nda::PixelMetric::cosine;
    } else {
        throw nda::config_error("unknown metric '" + metric + "' (use dot or cosine)");
    }
    const nda::Dataset trainset = cfg.train.load();
    const nda::Dataset queries = cfg.query.load();
    const nda::BaselineResult result = nda::raw_pixel_baseline(queries, trainset, m);

    std::filesystem::create_directories(out_dir);
    const auto out = std::filesystem::path(out_dir);
    nda::save_matrix(result.matrix, (out / "matrix.ndam").string());
    nda::save_matrix_csv(result.matrix, (out / "matrix.csv").string());
    if (!result.degenerate_pairs.empty()) {
        std::printf("note: %zu zero-norm pairs recorded as 0\n", result.degenerate_pairs.size());
    }
    std::printf("wrote %s\n", (out / "matrix.ndam").string().c_str());
    return kExitOk;
}

int cmd_score_check(double perturbation, int workers) {
    nda::ScoreCheckOptions opts;
    opts.inject_perturbation = perturbation;
    opts.workers = workers;
    const auto results = nda::run_score_checks(opts);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        ok = ok && r.passed;
    }
    if (!ok) throw nda::compute_error("score-check failed");
    return kExitOk;
}

int cmd_heatmap(const ConfigCapture& capture, const std::string& matrix_path,
                const std::string& prov_path, const std::string& query_id,
                const nda::HeatmapOptions& opts, const std::string& out_dir) {
    const nda::RunConfig cfg = capture.resolve();
    const nda::AttributionMatrix matrix = nda::load_matrix(matrix_path);
    const nda::ProvenanceStore store = nda::load_provenance(prov_path);
    const nda::Dataset trainset = cfg.train.load();
    const nda::Dataset queries = cfg.query.load();
    nda::write_heatmap(store, matrix, trainset, queries, query_id, opts, out_dir);
    std::printf("wrote overlays and composite for %s to %s\n", query_id.c_str(),
                out_dir.c_str());
    return kExitOk;
}

int cmd_counterfactual(const std::string& matrix_path, const std::string& query_id,
                       std::size_t count, const std::string& out_path) {
    const nda::AttributionMatrix matrix = nda::load_matrix(matrix_path);
    const auto ids = nda::top_influencers(matrix, query_id, count, nda::RankSign::proponents);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw nda::data_error("cannot write " + out_path);
    for (const std::string& id : ids) out << id << "\n";
    std::printf("wrote %zu ids to %s\n", ids.size(), out_path.c_str());
    return kExitOk;
}

int cmd_selftest(const std::string& self_exe, int workers, const std::vector<int>& only) {
    bool ok = true;
    if (only.empty()) {
        std::printf("-- score checks --\n");
        const auto checks = nda::run_score_checks({0.0, workers});
        for (const auto& r : checks) {
            std::printf("[%s] %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                        r.detail.c_str());
            ok = ok && r.passed;
        }
        std::printf("-- acceptance criteria --\n");
    }
    nda::AcceptanceOptions opts;
    opts.self_exe = self_exe;
    opts.workers = workers;
    opts.only = only;
    ok = nda::report_acceptance(nda::run_acceptance(opts)) && ok;
    if (!ok) throw nda::compute_error("selftest failed");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    if (argc > 1 && std::string(argv[1]) == "--inner-perf") {
        return nda::inner_perf_main();
    }

    CLI::App app{"patch-based data attribution for diffusion-style image generation"};
    app.require_subcommand(1);

    ConfigCapture attribute_cfg;
    auto* attribute = app.add_subcommand("attribute", "compute an attribution matrix");
    attribute_cfg.attach(attribute);

    auto* lds_cmd = app.add_subcommand("lds", "evaluate a matrix with the linear datamodeling score");
    std::string lds_matrix, lds_input, lds_out = "lds-out", lds_label = "attribution";
    lds_cmd->add_option("--matrix", lds_matrix, "matrix.ndam path")->required();
    lds_cmd->add_option("--input", lds_input, "LDS input manifest path")->required();
    lds_cmd->add_option("--out", lds_out, "output directory");
    lds_cmd->add_option("--label", lds_label, "method label for the report");

    ConfigCapture baseline_cfg;
    auto* baseline = app.add_subcommand("baseline", "raw-pixel similarity baseline matrix");
    baseline_cfg.attach(baseline);
    std::string baseline_metric = "cosine", baseline_out = "baseline-out";
    baseline->add_option("--metric", baseline_metric, "dot | cosine (default cosine)");
    baseline->add_option("--out", baseline_out, "output directory");

    auto* score_check = app.add_subcommand("score-check", "validation harness over the fixture set");
    double perturbation = 0.0;
    int sc_workers = 0;
    score_check->add_option("--inject-perturbation", perturbation,
                            "testing hook: offset one computed distance");
    score_check->add_option("--workers", sc_workers, "worker threads, 0 = all cores");

    ConfigCapture heatmap_cfg;
    auto* heatmap = app.add_subcommand("heatmap", "render influence overlays for one query");
    heatmap_cfg.attach(heatmap);
    std::string hm_matrix, hm_prov, hm_query, hm_out = "heatmap-out";
    nda::HeatmapOptions hm_opts;
    heatmap->add_option("--matrix", hm_matrix, "matrix.ndam path")->required();
    heatmap->add_option("--provenance", hm_prov, "provenance.json path")->required();
    heatmap->add_option("--query-id", hm_query, "query id to render")->required();
    heatmap->add_option("--top", hm_opts.top_m, "training images in the composite (default 5)");
    heatmap->add_option("--dim", hm_opts.dim, "brightness outside patches (default 0.35)");
    heatmap->add_option("--max-rects", hm_opts.max_rects, "patch rectangles per overlay");
    heatmap->add_option("--gutter", hm_opts.gutter, "pixels between composite tiles");
    heatmap->add_option("--out", hm_out, "output directory");

    auto* counterfactual =
        app.add_subcommand("counterfactual-export", "export top proponents for removal studies");
    std::string cf_matrix, cf_query, cf_out = "removal_ids.txt";
    std::size_t cf_count = 1000;
    counterfactual->add_option("--matrix", cf_matrix, "matrix.ndam path")->required();
    counterfactual->add_option("--query-id", cf_query, "query id")->required();
    counterfactual->add_option("--count", cf_count, "ids to export (default 1000)");
    counterfactual->add_option("--out", cf_out, "output file, one id per line");

    auto* selftest = app.add_subcommand("selftest", "score checks plus the acceptance criteria");
    int st_workers = 0;
    std::vector<int> st_only;
    selftest->add_option("--workers", st_workers, "worker threads, 0 = all cores");
    selftest->add_option("--only", st_only, "run only these criterion numbers");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);   // --help
        print_error_record("config", e.what());
        return kExitConfig;
    }

    try {
        if (*attribute) return cmd_attribute(attribute_cfg);
        if (*lds_cmd) return cmd_lds(lds_matrix, lds_input, lds_out, lds_label);
        if (*baseline) return cmd_baseline(baseline_cfg, baseline_metric, baseline_out);
        if (*score_check) return cmd_score_check(perturbation, sc_workers);
        if (*heatmap) {
            return cmd_heatmap(heatmap_cfg, hm_matrix, hm_prov, hm_query, hm_opts, hm_out);
        }
        if (*counterfactual) return cmd_counterfactual(cf_matrix, cf_query, cf_count, cf_out);
        if (*selftest) return cmd_selftest(argv[0], st_workers, st_only);
    } catch (const nda::config_error& e) {
        print_error_record("config", e.what());
        return kExitConfig;
    } catch (const nda::data_error& e) {
        print_error_record("data", e.what());
        return kExitData;
    } catch (const nda::compute_error& e) {
        print_error_record("compute", e.what());
        return kExitCompute;
    } catch (const std::exception& e) {
        print_error_record("compute", e.what());
        return kExitCompute;
    }
    return kExitConfig;
}
