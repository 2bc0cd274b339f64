#pragma once

#include "nda/distance.hpp"
#include "nda/image.hpp"
#include "nda/noise.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nda {

/// One retained training patch: log of its unnormalized Gaussian weight,
/// -d^2 / (2 (1 - abar)), plus its center in the training image.
struct TopkEntry {
    double log_weight;
    std::uint32_t center;        // row * L + col in the training image
};

/// Softmax summary for a single query patch: the exact log-normalizer over
/// all N * L^2 training patches plus, per training image, the k
/// smallest-distance patches (ties resolved toward the lower row-major
/// center). Entries are stored concatenated, ascending by center within
/// each image. The normalized weight of entry e is
/// exp(e.log_weight - logsumexp); weights of non-retained patches are never
/// materialized.
struct PatchSummary {
    std::uint32_t center = 0;    // row * L + col in the query image
    int timestep = 0;
    ScaleTag scale = ScaleTag::original;
    double logsumexp = 0.0;
    std::vector<TopkEntry> entries;
    std::vector<std::uint32_t> offsets;   // image n owns [offsets[n], offsets[n+1])

    std::size_t image_count() const { return offsets.empty() ? 0 : offsets.size() - 1; }
    std::span<const TopkEntry> image_entries(std::size_t n) const {
        return std::span<const TopkEntry>(entries.data() + offsets[n],
                                          offsets[n + 1] - offsets[n]);
    }
};

struct InfluenceParams {
    int top_k = 100;
    DistanceBackend backend = DistanceBackend::fast;
    int workers = 1;
    int patch_batch = 32;        // engine tiling only; never changes results
    // Experiment knob: divide the low-scale exponent denominator by window^2
    // (pooling shrinks the noise variance by that factor). Off by default:
    // the low-scale weight uses 2 (1 - abar) exactly as at the original scale.
    bool low_variance_rescale = false;
};

/// Streams one PatchSummary per query patch center, in row-major order.
/// Deterministic for any worker count or patch batch: per-image partials are
/// folded in training-index order and within-image scans are row-major.
void for_each_patch_summary(const NoisyImage& query, const Dataset& trainset,
                            const ScaleSpec& scale, const InfluenceParams& params,
                            const std::function<void(PatchSummary&)>& consume,
                            std::uint64_t* distance_counter = nullptr);

/// Materialized form of the stream; intended for small instances and tests.
/// Throws config_error on an empty training set or k < 1.
std::vector<PatchSummary> patch_influence(const NoisyImage& query, const Dataset& trainset,
                                          const ScaleSpec& scale, const InfluenceParams& params);

/// gamma-combined per-patch influence over the union of the two retained
/// sets; a patch missing from one scale contributes zero for that scale.
/// gamma == 1 returns exactly the original-scale entries, gamma == 0 the
/// low-scale entries.
struct MultiscaleEntry {
    std::uint32_t train_index;
    std::uint32_t center;
    double weight;
};

std::vector<MultiscaleEntry> multiscale_influence(const PatchSummary& original,
                                                  const PatchSummary& low, double gamma);

} // namespace nda
