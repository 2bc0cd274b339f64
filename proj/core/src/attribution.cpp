#include "nda/attribution.hpp"

#include "nda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

namespace nda {

namespace {

struct ProvCandidate {
    ProvenanceEntry entry;
    std::uint64_t order;                 // insertion order breaks weight ties
};

// Bounded keep-largest set per (query, train) pair.
struct ProvHeap {
    std::vector<ProvCandidate> items;    // min-heap by (weight, -order)

    static bool less(const ProvCandidate& a, const ProvCandidate& b) {
        if (a.entry.weight != b.entry.weight) return a.entry.weight < b.entry.weight;
        return a.order > b.order;        // older entry wins a tie
    }

    void push(const ProvenanceEntry& e, std::uint64_t order, std::size_t cap) {
        if (cap == 0) return;
        const ProvCandidate cand{e, order};
        auto cmp = [](const ProvCandidate& a, const ProvCandidate& b) { return !less(a, b); };
        if (items.size() < cap) {
            items.push_back(cand);
            std::push_heap(items.begin(), items.end(), cmp);
        } else if (less(items.front(), cand)) {
            std::pop_heap(items.begin(), items.end(), cmp);
            items.back() = cand;
            std::push_heap(items.begin(), items.end(), cmp);
        }
    }

    std::vector<ProvenanceEntry> sorted() const {
        std::vector<ProvCandidate> copy = items;
        std::sort(copy.begin(), copy.end(),
                  [](const ProvCandidate& a, const ProvCandidate& b) { return less(b, a); });
        std::vector<ProvenanceEntry> out;
        out.reserve(copy.size());
        for (const auto& c : copy) out.push_back(c.entry);
        return out;
    }
};

void accumulate_scale(const NoisyImage& noisy, const Dataset& trainset, const ScaleSpec& scale,
                      const InfluenceConfig& cfg, const AttributeOptions& opts,
                      double row_factor, double prov_factor, std::vector<double>& tau,
                      std::vector<ProvHeap>& prov, std::uint64_t& prov_order) {
    InfluenceParams params;
    params.top_k = cfg.top_k;
    params.backend = cfg.backend;
    params.workers = opts.workers;
    params.patch_batch = cfg.patch_batch;
    params.low_variance_rescale = cfg.low_variance_rescale;

    for_each_patch_summary(
        noisy, trainset, scale, params,
        [&](PatchSummary& summary) {
            for (std::size_t n = 0; n < summary.image_count(); ++n) {
                double mass = 0.0;
                for (const TopkEntry& e : summary.image_entries(n)) {
                    const double w = std::exp(e.log_weight - summary.logsumexp);
                    mass += w;
                    prov[n].push(ProvenanceEntry{summary.center, e.center, summary.timestep,
                                                 scale.tag(), scale.patch_size,
                                                 prov_factor * w},
                                 prov_order++, static_cast<std::size_t>(opts.provenance_cap));
                }
                tau[n] += row_factor * mass;
            }
        },
        opts.distance_counter);
}

} // namespace

void attribute_image(const ImageTensor& query, const std::string& query_id,
                     const Dataset& trainset, const DiffusionSchedule& schedule,
                     const InfluenceConfig& cfg, const AttributeOptions& opts,
                     std::vector<double>& row_out, QueryProvenance& provenance_out) {
    cfg.validate(schedule);
    if (trainset.empty()) {
        throw config_error("attribution needs a non-empty training set");
    }

    const std::size_t n_train = trainset.size();
    std::vector<double> tau(n_train, 0.0);
    std::vector<ProvHeap> prov(n_train);
    std::uint64_t prov_order = 0;

    const double inv_t = 1.0 / static_cast<double>(cfg.timesteps.size());
    const double inv_draws = 1.0 / static_cast<double>(cfg.draws);

    // Per-draw rows are averaged, so identical draws collapse exactly.
    std::vector<double> draw_tau(n_train);
    for (int draw = 0; draw < cfg.draws; ++draw) {
        std::fill(draw_tau.begin(), draw_tau.end(), 0.0);
        for (int t : cfg.timesteps) {
            NoiseSpec spec;
            spec.mode = cfg.noise_mode;
            spec.seed = cfg.seed;
            spec.draw_index = static_cast<std::uint64_t>(draw);
            spec.share_across_timesteps = cfg.share_noise_across_timesteps;
            const NoisyImage noisy = noise_image(query, query_id, t, schedule, spec);

            const double g = cfg.gamma_at(t);
            if (g > 0.0) {
                accumulate_scale(noisy, trainset, ScaleSpec{cfg.patch_size_at(t), 1}, cfg, opts,
                                 g * inv_t, g * inv_t * inv_draws, draw_tau, prov, prov_order);
            }
            if (g < 1.0) {
                accumulate_scale(noisy, trainset, ScaleSpec{cfg.patch_size_low_at(t), cfg.window},
                                 cfg, opts, (1.0 - g) * inv_t, (1.0 - g) * inv_t * inv_draws,
                                 draw_tau, prov, prov_order);
            }
        }
        for (std::size_t n = 0; n < n_train; ++n) tau[n] += draw_tau[n];
    }
    for (std::size_t n = 0; n < n_train; ++n) tau[n] *= inv_draws;

    row_out = std::move(tau);

    provenance_out.query_id = query_id;
    provenance_out.train_indices.clear();
    provenance_out.entries.clear();

    std::vector<std::uint32_t> order(n_train);
    std::iota(order.begin(), order.end(), 0u);
    if (opts.provenance_top > 0 && static_cast<std::size_t>(opts.provenance_top) < n_train) {
        std::partial_sort(order.begin(), order.begin() + opts.provenance_top, order.end(),
                          [&](std::uint32_t a, std::uint32_t b) {
                              if (row_out[a] != row_out[b]) return row_out[a] > row_out[b];
                              return a < b;
                          });
        order.resize(opts.provenance_top);
    }
    for (std::uint32_t n : order) {
        if (prov[n].items.empty()) continue;
        provenance_out.train_indices.push_back(n);
        provenance_out.entries.push_back(prov[n].sorted());
    }
}

namespace {

constexpr char kRowMagic[4] = {'N', 'D', 'A', 'R'};
constexpr std::uint32_t kRowVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return static_cast<bool>(in);
}

std::filesystem::path row_path(const std::string& dir, std::size_t row) {
    return std::filesystem::path(dir) / ("row_" + std::to_string(row) + ".ndar");
}

void save_row(const std::string& dir, std::size_t row, std::uint64_t fingerprint,
              const std::vector<double>& values, const QueryProvenance& prov) {
    const auto final_path = row_path(dir, row);
    const auto tmp_path = final_path.string() + ".tmp";
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw data_error("cannot write checkpoint " + tmp_path);
        out.write(kRowMagic, 4);
        write_pod(out, kRowVersion);
        write_pod(out, fingerprint);
        write_pod(out, static_cast<std::uint64_t>(row));
        write_pod(out, static_cast<std::uint64_t>(values.size()));
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
        write_pod(out, static_cast<std::uint64_t>(prov.train_indices.size()));
        for (std::size_t i = 0; i < prov.train_indices.size(); ++i) {
            write_pod(out, prov.train_indices[i]);
            write_pod(out, static_cast<std::uint64_t>(prov.entries[i].size()));
            for (const ProvenanceEntry& e : prov.entries[i]) {
                write_pod(out, e.query_center);
                write_pod(out, e.train_center);
                write_pod(out, static_cast<std::int32_t>(e.timestep));
                write_pod(out, static_cast<std::uint8_t>(e.scale == ScaleTag::low ? 1 : 0));
                write_pod(out, static_cast<std::int32_t>(e.patch_size));
                write_pod(out, e.weight);
            }
        }
        if (!out) throw data_error("short write on checkpoint " + tmp_path);
    }
    std::filesystem::rename(tmp_path, final_path);
}

bool load_row(const std::string& dir, std::size_t row, std::uint64_t fingerprint,
              std::size_t expected_cols, std::vector<double>& values, QueryProvenance& prov) {
    std::ifstream in(row_path(dir, row), std::ios::binary);
    if (!in) return false;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kRowMagic, 4) != 0) return false;
    std::uint32_t version = 0;
    std::uint64_t fp = 0, row_idx = 0, cols = 0;
    if (!read_pod(in, version) || version != kRowVersion) return false;
    if (!read_pod(in, fp) || fp != fingerprint) return false;
    if (!read_pod(in, row_idx) || row_idx != row) return false;
    if (!read_pod(in, cols) || cols != expected_cols) return false;
    values.resize(cols);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(cols * sizeof(double)));
    if (!in) return false;
    std::uint64_t n_train = 0;
    if (!read_pod(in, n_train)) return false;
    prov.train_indices.resize(n_train);
    prov.entries.assign(n_train, {});
    for (std::uint64_t i = 0; i < n_train; ++i) {
        std::uint64_t n_entries = 0;
        if (!read_pod(in, prov.train_indices[i]) || !read_pod(in, n_entries)) return false;
        prov.entries[i].resize(n_entries);
        for (std::uint64_t j = 0; j < n_entries; ++j) {
            ProvenanceEntry& e = prov.entries[i][j];
            std::uint8_t tag = 0;
            std::int32_t ts = 0, ps = 0;
            if (!read_pod(in, e.query_center) || !read_pod(in, e.train_center) ||
                !read_pod(in, ts) || !read_pod(in, tag) || !read_pod(in, ps) ||
                !read_pod(in, e.weight)) {
                return false;
            }
            e.timestep = ts;
            e.scale = tag ? ScaleTag::low : ScaleTag::original;
            e.patch_size = ps;
        }
    }
    return true;
}

} // namespace

AttributionResult attribute_batch(const Dataset& queries, const Dataset& trainset,
                                  const DiffusionSchedule& schedule, const InfluenceConfig& cfg,
                                  const BatchOptions& opts) {
    cfg.validate(schedule);
    queries.validate();
    trainset.validate();
    if (queries.empty()) throw config_error("query set is empty");
    if (trainset.empty()) throw config_error("training set is empty");

    const std::size_t n_rows = queries.size();
    const std::size_t n_cols = trainset.size();
    const std::uint64_t fingerprint =
        config_fingerprint(cfg, schedule, trainset.ids, queries.ids);

    if (!opts.checkpoint_dir.empty()) {
        std::filesystem::create_directories(opts.checkpoint_dir);
    }

    AttributionResult result;
    result.matrix.query_ids = queries.ids;
    result.matrix.train_ids = trainset.ids;
    result.matrix.fingerprint = fingerprint;
    result.matrix.scores.assign(n_rows * n_cols, 0.0);
    result.provenance.resize(n_rows);

    for (std::size_t r = 0; r < n_rows; ++r) {
        std::vector<double> row;
        QueryProvenance prov;
        bool reused = false;
        if (!opts.checkpoint_dir.empty() &&
            load_row(opts.checkpoint_dir, r, fingerprint, n_cols, row, prov)) {
            prov.query_id = queries.ids[r];
            reused = true;
            ++result.rows_reused;
        } else {
            attribute_image(queries[r], queries.ids[r], trainset, schedule, cfg, opts, row, prov);
            if (!opts.checkpoint_dir.empty()) {
                save_row(opts.checkpoint_dir, r, fingerprint, row, prov);
            }
        }
        std::copy(row.begin(), row.end(), result.matrix.scores.begin() + r * n_cols);
        result.provenance[r] = std::move(prov);
        result.rows_done = r + 1;
        (void)reused;
        if (opts.on_row && !opts.on_row(r + 1, n_rows)) {
            result.complete = (r + 1 == n_rows);
            return result;
        }
    }
    result.complete = true;
    return result;
}

std::vector<std::string> top_influencers(const AttributionMatrix& matrix,
                                         const std::string& query_id, std::size_t count,
                                         RankSign sign) {
    const auto it = std::find(matrix.query_ids.begin(), matrix.query_ids.end(), query_id);
    if (it == matrix.query_ids.end()) {
        throw data_error("unknown query id: " + query_id);
    }
    if (count > matrix.cols()) {
        throw config_error("requested " + std::to_string(count) + " influencers from " +
                           std::to_string(matrix.cols()) + " training images");
    }
    const std::size_t r = static_cast<std::size_t>(it - matrix.query_ids.begin());
    const double* row = matrix.row(r);

    std::vector<std::size_t> order(matrix.cols());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool descending = sign == RankSign::proponents;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row[a] != row[b]) return descending ? row[a] > row[b] : row[a] < row[b];
        return a < b;
    });

    std::vector<std::string> ids;
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ids.push_back(matrix.train_ids[order[i]]);
    return ids;
}

} // namespace nda
