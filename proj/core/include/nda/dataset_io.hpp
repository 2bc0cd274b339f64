#pragma once

#include "nda/image.hpp"

#include <optional>
#include <set>
#include <string>

namespace nda {

enum class SourceKind { cifar_binary, image_directory, raw_tensor };

/// Where a dataset comes from and how to shape it on the way in. Every
/// loader normalizes to [-1, 1] and produces a deterministic id order.
struct DatasetSource {
    SourceKind kind = SourceKind::raw_tensor;
    std::string path;
    // cifar_binary: optional label filter (keeps matching records in order)
    std::set<int> label_filter;
    // image_directory: optional center-crop side applied before resize
    std::optional<int> crop;
    // image_directory: optional output side (bilinear)
    std::optional<int> resize;
    // raw_tensor: declared shape
    int channels = 3;
    int side = 32;
    // all kinds: keep only the first n images after filtering (0 = all)
    std::size_t limit = 0;

    Dataset load() const;
};

/// Standard CIFAR-10 batch layout: records of 1 label byte + 3072
/// channel-major pixel bytes; pixels map to [-1, 1] via v / 127.5 - 1.
/// Ids are "<stem>:<record index>".
Dataset load_cifar_binary(const std::string& path, const std::set<int>& label_filter = {},
                          std::size_t limit = 0);

/// Lexicographically ordered directory of lossless 8-bit rasters (PNG or
/// binary PPM/PGM). Optional center-crop then bilinear resize.
Dataset load_image_directory(const std::string& path, std::optional<int> crop = {},
                             std::optional<int> resize = {}, std::size_t limit = 0);

/// Little-endian payload: u64 image count, then count * C * L * L float32
/// values, already normalized; the shape is declared by the caller.
Dataset load_raw_tensor(const std::string& path, int channels, int side, std::size_t limit = 0);

void save_raw_tensor(const Dataset& dataset, const std::string& path);

} // namespace nda
