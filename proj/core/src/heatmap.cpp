#include "nda/heatmap.hpp"

#include "nda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace nda {

namespace {

std::uint8_t to_byte(float v) {
    const double scaled = (static_cast<double>(v) + 1.0) * 127.5;
    return static_cast<std::uint8_t>(std::clamp(std::lround(scaled), 0L, 255L));
}

std::string safe_name(const std::string& id) {
    std::string out = id;
    for (char& c : out) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')) c = '_';
    }
    return out;
}

} // namespace

RasterImage tensor_to_raster(const ImageTensor& img) {
    RasterImage raster;
    raster.width = img.side;
    raster.height = img.side;
    raster.channels = img.channels == 1 ? 1 : 3;
    raster.pixels.resize(static_cast<std::size_t>(img.side) * img.side * raster.channels);
    for (int y = 0; y < img.side; ++y) {
        for (int x = 0; x < img.side; ++x) {
            for (int c = 0; c < raster.channels; ++c) {
                const int src = std::min(c, img.channels - 1);
                raster.pixels[(static_cast<std::size_t>(y) * img.side + x) * raster.channels + c] =
                    to_byte(img.at(src, y, x));
            }
        }
    }
    return raster;
}

RasterImage render_overlay(const ImageTensor& train, const std::vector<ProvenanceEntry>& entries,
                           double dim, int max_rects) {
    const int L = train.side;
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(L) * L, 0);
    const int rects = std::min<int>(max_rects, static_cast<int>(entries.size()));
    for (int i = 0; i < rects; ++i) {
        const ProvenanceEntry& e = entries[i];
        const int row = static_cast<int>(e.train_center) / L;
        const int col = static_cast<int>(e.train_center) % L;
        const int off = patch_offset(e.patch_size);
        const int y0 = std::max(0, row - off);
        const int y1 = std::min(L, row - off + e.patch_size);
        const int x0 = std::max(0, col - off);
        const int x1 = std::min(L, col - off + e.patch_size);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) keep[static_cast<std::size_t>(y) * L + x] = 1;
        }
    }

    RasterImage raster = tensor_to_raster(train);
    for (int y = 0; y < L; ++y) {
        for (int x = 0; x < L; ++x) {
            if (keep[static_cast<std::size_t>(y) * L + x]) continue;
            for (int c = 0; c < raster.channels; ++c) {
                std::uint8_t& p =
                    raster.pixels[(static_cast<std::size_t>(y) * L + x) * raster.channels + c];
                p = static_cast<std::uint8_t>(std::clamp(std::lround(p * dim), 0L, 255L));
            }
        }
    }
    return raster;
}

RasterImage render_composite(const ImageTensor& query,
                             const std::vector<const ImageTensor*>& attributed, int gutter) {
    const int L = query.side;
    const int m = static_cast<int>(attributed.size());
    RasterImage out;
    out.height = L;
    out.width = (1 + m) * L + m * gutter;
    out.channels = query.channels == 1 ? 1 : 3;
    out.pixels.assign(static_cast<std::size_t>(out.width) * out.height * out.channels, 255);

    auto blit = [&](const RasterImage& tile, int x_off) {
        for (int y = 0; y < L; ++y) {
            for (int x = 0; x < L; ++x) {
                for (int c = 0; c < out.channels; ++c) {
                    out.pixels[(static_cast<std::size_t>(y) * out.width + x_off + x) *
                                   out.channels +
                               c] =
                        tile.pixels[(static_cast<std::size_t>(y) * L + x) * tile.channels +
                                    std::min(c, tile.channels - 1)];
                }
            }
        }
    };

    blit(tensor_to_raster(query), 0);
    for (int i = 0; i < m; ++i) {
        blit(tensor_to_raster(*attributed[i]), (1 + i) * (L + gutter));
    }
    return out;
}

void write_heatmap(const ProvenanceStore& store, const AttributionMatrix& matrix,
                   const Dataset& trainset, const Dataset& queries, const std::string& query_id,
                   const HeatmapOptions& opts, const std::string& out_dir) {
    if (store.fingerprint != matrix.fingerprint) {
        throw data_error("provenance store and matrix carry different fingerprints");
    }
    const QueryProvenance* prov = store.find(query_id);
    if (!prov) throw data_error("no provenance stored for query id: " + query_id);
    const std::ptrdiff_t q_idx = queries.find(query_id);
    if (q_idx < 0) throw data_error("query id not present in the query dataset: " + query_id);
    if (prov->train_indices.empty()) {
        throw data_error("provenance for query " + query_id + " is empty");
    }

    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);

    for (std::size_t i = 0; i < prov->train_indices.size(); ++i) {
        const std::uint32_t n = prov->train_indices[i];
        if (n >= trainset.size()) {
            throw data_error("provenance references train index " + std::to_string(n) +
                             " outside the training set");
        }
        const RasterImage overlay =
            render_overlay(trainset[n], prov->entries[i], opts.dim, opts.max_rects);
        write_png(overlay, (dir / ("overlay_" + safe_name(query_id) + "_" +
                                   safe_name(trainset.ids[n]) + ".png"))
                               .string());
    }

    const auto ranked = top_influencers(matrix, query_id, std::min<std::size_t>(
                                                              opts.top_m, matrix.cols()),
                                        RankSign::proponents);
    std::vector<const ImageTensor*> tiles;
    for (const std::string& id : ranked) {
        const std::ptrdiff_t idx = trainset.find(id);
        if (idx < 0) throw data_error("matrix train id missing from the dataset: " + id);
        tiles.push_back(&trainset[static_cast<std::size_t>(idx)]);
    }
    const RasterImage composite =
        render_composite(queries[static_cast<std::size_t>(q_idx)], tiles, opts.gutter);
    write_png(composite, (dir / ("composite_" + safe_name(query_id) + ".png")).string());
}

} // namespace nda
