#pragma once

#include "nda/image.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nda {

enum class ScaleTag { original, low };
enum class DistanceBackend { naive, fast };

/// One distance evaluation scale. window == 1 compares raw patches of size
/// patch_size; window > 1 mean-pools both sides to (patch_size / window)^2
/// before the squared distance.
struct ScaleSpec {
    int patch_size = 3;
    int window = 1;

    int pooled_size() const { return patch_size / window; }
    int offset() const { return patch_offset(patch_size); }
    ScaleTag tag() const { return window == 1 ? ScaleTag::original : ScaleTag::low; }

    void validate(int image_side) const;   // throws config_error
};

/// Squared distances from one query patch to every patch center of one
/// training image. Values are clamped at zero and always finite.
struct DistanceMap {
    std::uint32_t train_index = 0;
    int query_row = 0;
    int query_col = 0;
    int timestep = 0;
    ScaleTag scale = ScaleTag::original;
    int side = 0;                        // training image side
    std::vector<float> values;           // side * side, row-major
};

/// Query patch prepared as a correlation kernel: pooled values plus the
/// double-precision squared norm shared by both backends.
struct QueryPatchKernel {
    std::uint32_t center = 0;            // row * L + col in the query image
    int channels = 0;
    int size = 0;                        // pooled side Q
    std::vector<float> values;           // channels * Q * Q
    double norm_sq = 0.0;
};

QueryPatchKernel make_query_kernel(const ImageTensor& image, int center_row, int center_col,
                                   const ScaleSpec& scale);

/// Per-training-image precomputation reused across every query patch:
/// the window-sum filtered image and the sliding pooled-patch squared norms.
/// Building it costs O(C L^2 Q^2); afterwards each distance plane is one
/// cross-correlation plus two cheap vector ops, and the C*P^2-per-center
/// unfolded patch tensor is never materialized.
struct TrainImageContext {
    int side = 0;
    int channels = 0;
    int window = 1;
    int pooled = 0;
    int offset = 0;
    int filtered_side = 0;               // side + window - 1, origin shifted by window - 1
    std::vector<float> filtered;         // channels * filtered_side^2 window sums
    std::vector<double> norm_sq;         // side^2 pooled-patch squared norms
};

TrainImageContext make_train_context(const ImageTensor& train, const ScaleSpec& scale);

/// Reference path: direct per-center patch loop, zero-padded, pooled when
/// window > 1, accumulated in double. out must hold side^2 doubles.
void distance_plane_naive(const QueryPatchKernel& kernel, const ImageTensor& train,
                          const ScaleSpec& scale, double alpha_bar, double* out);

/// Accelerated path: ||x||^2 - 2 sqrt(abar) <x, u> + abar ||u||^2 with the
/// inner products from one cross-correlation pass over the filtered image.
void distance_plane_fast(const QueryPatchKernel& kernel, const TrainImageContext& ctx,
                         double alpha_bar, double* out);

/// Spec-facing single-patch oracle (original scale).
DistanceMap distance_map_naive(const PatchView& query_patch, const ImageTensor& train,
                               double alpha_bar);

/// Batched accelerated maps; identical values to the naive oracle per patch.
/// The context overload reuses a previously built TrainImageContext.
std::vector<DistanceMap> distance_map_fast(std::span<const PatchView> query_patches,
                                           const ImageTensor& train, double alpha_bar);
std::vector<DistanceMap> distance_map_fast(std::span<const PatchView> query_patches,
                                           const ImageTensor& train, const TrainImageContext& ctx,
                                           double alpha_bar);

} // namespace nda
