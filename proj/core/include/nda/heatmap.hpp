#pragma once

#include "nda/attribution.hpp"
#include "nda/image_codec.hpp"
#include "nda/provenance_io.hpp"

#include <string>
#include <vector>

namespace nda {

struct HeatmapOptions {
    int top_m = 5;               // attributed training images per composite
    double dim = 0.35;           // brightness factor outside highlighted patches
    int max_rects = 3;           // strongest entries drawn per (query, train) pair
    int gutter = 2;              // pixels between composite tiles
};

RasterImage tensor_to_raster(const ImageTensor& img);

/// Training image with the top-weight patch supports kept at full
/// brightness and everything else multiplied by dim. Patch rectangles
/// follow the extraction convention and clip at the image border.
RasterImage render_overlay(const ImageTensor& train, const std::vector<ProvenanceEntry>& entries,
                           double dim, int max_rects);

/// Query plus its top attributed training tiles side by side:
/// width = (1 + m) * L + m * gutter.
RasterImage render_composite(const ImageTensor& query,
                             const std::vector<const ImageTensor*>& attributed, int gutter);

/// Writes one overlay PNG per stored (query, train) pair of the given query
/// plus the composite strip. Store and matrix fingerprints must match.
void write_heatmap(const ProvenanceStore& store, const AttributionMatrix& matrix,
                   const Dataset& trainset, const Dataset& queries, const std::string& query_id,
                   const HeatmapOptions& opts, const std::string& out_dir);

} // namespace nda
