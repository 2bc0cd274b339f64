#pragma once

#include "nda/config.hpp"
#include "nda/image.hpp"
#include "nda/influence.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace nda {

/// Query x train attribution scores plus the digest of everything that
/// produced them. Scores from the influence engine are sums of softmax
/// weights and therefore non-negative; each row sums to at most L^2.
struct AttributionMatrix {
    std::vector<std::string> query_ids;
    std::vector<std::string> train_ids;
    std::vector<double> scores;          // rows x cols, row-major
    std::uint64_t fingerprint = 0;

    std::size_t rows() const { return query_ids.size(); }
    std::size_t cols() const { return train_ids.size(); }
    double at(std::size_t r, std::size_t c) const { return scores[r * cols() + c]; }
    const double* row(std::size_t r) const { return scores.data() + r * cols(); }
};

/// One retained patch match behind a (query, train) score: where it was, at
/// which timestep and scale, and how much it contributed to the matrix cell.
struct ProvenanceEntry {
    std::uint32_t query_center = 0;
    std::uint32_t train_center = 0;
    int timestep = 0;
    ScaleTag scale = ScaleTag::original;
    int patch_size = 0;                  // support side in original pixels
    double weight = 0.0;                 // contribution to the matrix cell
};

/// Per-query provenance: the strongest entries for each retained training
/// image, sorted by descending weight.
struct QueryProvenance {
    std::string query_id;
    std::vector<std::uint32_t> train_indices;
    std::vector<std::vector<ProvenanceEntry>> entries;   // parallel to train_indices
};

struct AttributeOptions {
    int workers = 0;                     // 0 = hardware concurrency
    int provenance_cap = 16;             // entries kept per (query, train) pair
    int provenance_top = 8;              // train images stored per query; 0 = all
    std::uint64_t* distance_counter = nullptr;
};

/// Multiscale image-level attribution of one query against the training set:
/// tau(x, z_n) averaged over the configured timesteps, with per-patch top-k
/// truncation and gamma mixing of the two scales.
void attribute_image(const ImageTensor& query, const std::string& query_id,
                     const Dataset& trainset, const DiffusionSchedule& schedule,
                     const InfluenceConfig& cfg, const AttributeOptions& opts,
                     std::vector<double>& row_out, QueryProvenance& provenance_out);

struct BatchOptions : AttributeOptions {
    std::string checkpoint_dir;          // empty = in-memory only
    // Called after each finished row; return false to stop early. Rows done
    // so far stay checkpointed and a resumed run completes bit-identically.
    std::function<bool(std::size_t rows_done, std::size_t rows_total)> on_row;
};

struct AttributionResult {
    AttributionMatrix matrix;
    std::vector<QueryProvenance> provenance;   // one per completed row
    bool complete = true;
    std::size_t rows_done = 0;
    std::size_t rows_reused = 0;               // restored from checkpoints
};

/// Row-at-a-time driver with optional per-row checkpointing. Matrix row
/// order follows the query dataset order; a finalized matrix requires every
/// row, and interrupted runs resume from the checkpoint directory.
AttributionResult attribute_batch(const Dataset& queries, const Dataset& trainset,
                                  const DiffusionSchedule& schedule, const InfluenceConfig& cfg,
                                  const BatchOptions& opts = {});

enum class RankSign { proponents, opponents };

/// Ranked training ids for one query row: proponents are the m largest
/// scores descending, opponents the m smallest ascending; ties break toward
/// the lower training index.
std::vector<std::string> top_influencers(const AttributionMatrix& matrix,
                                         const std::string& query_id, std::size_t count,
                                         RankSign sign);

} // namespace nda
