#include "nda/distance.hpp"

#include "nda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nda {

void ScaleSpec::validate(int image_side) const {
    if (patch_size < 1) {
        throw config_error("patch size must be >= 1, got " + std::to_string(patch_size));
    }
    if (window < 1) {
        throw config_error("downsample window must be >= 1, got " + std::to_string(window));
    }
    if (patch_size < window) {
        throw config_error("patch size " + std::to_string(patch_size) + " smaller than window " +
                           std::to_string(window));
    }
    (void)image_side;
}

QueryPatchKernel make_query_kernel(const ImageTensor& image, int center_row, int center_col,
                                   const ScaleSpec& scale) {
    PatchView patch = extract_patch(image, center_row, center_col, scale.patch_size);
    QueryPatchKernel kernel;
    kernel.center = static_cast<std::uint32_t>(center_row) * image.side + center_col;
    kernel.channels = image.channels;
    kernel.size = scale.pooled_size();
    kernel.values = scale.window == 1
                        ? std::move(patch.values)
                        : downsample(patch.values, patch.channels, patch.size, scale.window);
    double acc = 0.0;
    for (float v : kernel.values) acc += static_cast<double>(v) * v;
    kernel.norm_sq = acc;
    return kernel;
}

TrainImageContext make_train_context(const ImageTensor& train, const ScaleSpec& scale) {
    scale.validate(train.side);
    const int L = train.side;
    const int C = train.channels;
    const int w = scale.window;
    const int Q = scale.pooled_size();
    const int off = scale.offset();
    const int Lf = L + w - 1;
    const int shift = w - 1;             // filtered[y + shift] holds position y

    TrainImageContext ctx;
    ctx.side = L;
    ctx.channels = C;
    ctx.window = w;
    ctx.pooled = Q;
    ctx.offset = off;
    ctx.filtered_side = Lf;
    ctx.filtered.assign(static_cast<std::size_t>(C) * Lf * Lf, 0.0f);

    // Window sums of the zero-padded image; for w == 1 this is the image itself.
    for (int c = 0; c < C; ++c) {
        for (int ys = 0; ys < Lf; ++ys) {
            const int y = ys - shift;
            for (int xs = 0; xs < Lf; ++xs) {
                const int x = xs - shift;
                double acc = 0.0;
                for (int a = 0; a < w; ++a) {
                    const int yy = y + a;
                    if (yy < 0 || yy >= L) continue;
                    for (int b = 0; b < w; ++b) {
                        const int xx = x + b;
                        if (xx < 0 || xx >= L) continue;
                        acc += train.at(c, yy, xx);
                    }
                }
                ctx.filtered[(static_cast<std::size_t>(c) * Lf + ys) * Lf + xs] =
                    static_cast<float>(acc);
            }
        }
    }

    // Sliding pooled-patch squared norms, one per center, reused by every
    // query patch at this scale.
    const double inv_w4 = 1.0 / (static_cast<double>(w) * w * w * w);
    ctx.norm_sq.assign(static_cast<std::size_t>(L) * L, 0.0);
    for (int cy = 0; cy < L; ++cy) {
        for (int cx = 0; cx < L; ++cx) {
            double acc = 0.0;
            for (int c = 0; c < C; ++c) {
                for (int i = 0; i < Q; ++i) {
                    const int ys = cy - off + i * w + shift;
                    if (ys < 0 || ys >= Lf) continue;
                    for (int j = 0; j < Q; ++j) {
                        const int xs = cx - off + j * w + shift;
                        if (xs < 0 || xs >= Lf) continue;
                        const double g =
                            ctx.filtered[(static_cast<std::size_t>(c) * Lf + ys) * Lf + xs];
                        acc += g * g;
                    }
                }
            }
            ctx.norm_sq[static_cast<std::size_t>(cy) * L + cx] = acc * inv_w4;
        }
    }
    return ctx;
}

void distance_plane_naive(const QueryPatchKernel& kernel, const ImageTensor& train,
                          const ScaleSpec& scale, double alpha_bar, double* out) {
    if (kernel.channels != train.channels) {
        throw config_error("query patch has " + std::to_string(kernel.channels) +
                           " channels, training image has " + std::to_string(train.channels));
    }
    const int L = train.side;
    const double s = std::sqrt(alpha_bar);

    for (int cy = 0; cy < L; ++cy) {
        for (int cx = 0; cx < L; ++cx) {
            PatchView tp = extract_patch(train, cy, cx, scale.patch_size);
            const std::vector<float>& tv =
                scale.window == 1 ? tp.values
                                  : downsample(tp.values, tp.channels, tp.size, scale.window);
            double acc = 0.0;
            for (std::size_t i = 0; i < kernel.values.size(); ++i) {
                const double diff = static_cast<double>(kernel.values[i]) - s * tv[i];
                acc += diff * diff;
            }
            out[static_cast<std::size_t>(cy) * L + cx] = acc;
        }
    }
}

void distance_plane_fast(const QueryPatchKernel& kernel, const TrainImageContext& ctx,
                         double alpha_bar, double* out) {
    if (kernel.channels != ctx.channels) {
        throw config_error("query patch has " + std::to_string(kernel.channels) +
                           " channels, training image has " + std::to_string(ctx.channels));
    }
    const int L = ctx.side;
    const int Lf = ctx.filtered_side;
    const int Q = ctx.pooled;
    const int w = ctx.window;
    const int off = ctx.offset;
    const int shift = w - 1;
    const std::size_t plane = static_cast<std::size_t>(L) * L;

    // Cross-correlation of the kernel over the filtered image. Taps are
    // spaced by the pooling stride; out-of-domain taps are exact zeros and
    // are skipped by clamping the center range.
    static thread_local std::vector<double> corr;
    corr.assign(plane, 0.0);
    for (int c = 0; c < kernel.channels; ++c) {
        for (int i = 0; i < Q; ++i) {
            const int base_y = i * w - off + shift;
            const int y0 = std::max(0, -base_y);
            const int y1 = std::min(L, Lf - base_y);
            for (int j = 0; j < Q; ++j) {
                const float k = kernel.values[(static_cast<std::size_t>(c) * Q + i) * Q + j];
                if (k == 0.0f) continue;
                const int base_x = j * w - off + shift;
                const int x0 = std::max(0, -base_x);
                const int x1 = std::min(L, Lf - base_x);
                const double kd = k;
                for (int cy = y0; cy < y1; ++cy) {
                    const float* grow =
                        ctx.filtered.data() +
                        (static_cast<std::size_t>(c) * Lf + cy + base_y) * Lf + base_x;
                    double* orow = corr.data() + static_cast<std::size_t>(cy) * L;
                    for (int cx = x0; cx < x1; ++cx) {
                        orow[cx] += kd * grow[cx];
                    }
                }
            }
        }
    }

    const double s = std::sqrt(alpha_bar);
    const double corr_scale = 2.0 * s / (static_cast<double>(w) * w);
    const double qn = kernel.norm_sq;
    for (std::size_t idx = 0; idx < plane; ++idx) {
        const double d = qn - corr_scale * corr[idx] + alpha_bar * ctx.norm_sq[idx];
        out[idx] = d > 0.0 ? d : 0.0;
    }
}

namespace {

QueryPatchKernel kernel_from_patch(const PatchView& patch) {
    QueryPatchKernel kernel;
    kernel.channels = patch.channels;
    kernel.size = patch.size;
    kernel.values = patch.values;
    double acc = 0.0;
    for (float v : kernel.values) acc += static_cast<double>(v) * v;
    kernel.norm_sq = acc;
    return kernel;
}

DistanceMap map_from_plane(const std::vector<double>& plane, int side, const PatchView& patch) {
    DistanceMap map;
    map.train_index = patch.source_index;
    map.query_row = patch.center_row;
    map.query_col = patch.center_col;
    map.scale = ScaleTag::original;
    map.side = side;
    map.values.resize(plane.size());
    for (std::size_t i = 0; i < plane.size(); ++i) {
        map.values[i] = static_cast<float>(plane[i]);
    }
    return map;
}

} // namespace

DistanceMap distance_map_naive(const PatchView& query_patch, const ImageTensor& train,
                               double alpha_bar) {
    const ScaleSpec scale{query_patch.size, 1};
    const QueryPatchKernel kernel = kernel_from_patch(query_patch);
    std::vector<double> plane(static_cast<std::size_t>(train.side) * train.side);
    distance_plane_naive(kernel, train, scale, alpha_bar, plane.data());
    return map_from_plane(plane, train.side, query_patch);
}

std::vector<DistanceMap> distance_map_fast(std::span<const PatchView> query_patches,
                                           const ImageTensor& train, double alpha_bar) {
    if (query_patches.empty()) return {};
    const ScaleSpec scale{query_patches.front().size, 1};
    const TrainImageContext ctx = make_train_context(train, scale);
    return distance_map_fast(query_patches, train, ctx, alpha_bar);
}

std::vector<DistanceMap> distance_map_fast(std::span<const PatchView> query_patches,
                                           const ImageTensor& train, const TrainImageContext& ctx,
                                           double alpha_bar) {
    std::vector<DistanceMap> maps;
    maps.reserve(query_patches.size());
    std::vector<double> plane(static_cast<std::size_t>(train.side) * train.side);
    for (const PatchView& patch : query_patches) {
        const QueryPatchKernel kernel = kernel_from_patch(patch);
        distance_plane_fast(kernel, ctx, alpha_bar, plane.data());
        maps.push_back(map_from_plane(plane, train.side, patch));
    }
    return maps;
}

} // namespace nda
