#include "nda/dataset_io.hpp"

#include "nda/errors.hpp"
#include "nda/image_codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace nda {

namespace {

constexpr std::size_t kCifarRecord = 3073;   // 1 label byte + 3 * 1024 pixels
constexpr int kCifarSide = 32;

float byte_to_unit(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

ImageTensor raster_to_tensor(const RasterImage& raster) {
    ImageTensor img;
    img.channels = raster.channels;
    img.side = raster.width;
    img.data.resize(static_cast<std::size_t>(raster.channels) * raster.width * raster.height);
    for (int y = 0; y < raster.height; ++y) {
        for (int x = 0; x < raster.width; ++x) {
            for (int c = 0; c < raster.channels; ++c) {
                img.data[(static_cast<std::size_t>(c) * raster.height + y) * raster.width + x] =
                    byte_to_unit(
                        raster.pixels[(static_cast<std::size_t>(y) * raster.width + x) *
                                          raster.channels +
                                      c]);
            }
        }
    }
    return img;
}

ImageTensor center_crop(const ImageTensor& img, int crop, int height) {
    // Images may be non-square on ingestion; side holds width, height passed
    // separately until the tensor becomes square.
    const int y0 = (height - crop) / 2;
    const int x0 = (img.side - crop) / 2;
    if (y0 < 0 || x0 < 0) {
        throw data_error("crop " + std::to_string(crop) + " exceeds image size " +
                         std::to_string(img.side) + "x" + std::to_string(height));
    }
    ImageTensor out;
    out.channels = img.channels;
    out.side = crop;
    out.data.resize(static_cast<std::size_t>(img.channels) * crop * crop);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < crop; ++y) {
            for (int x = 0; x < crop; ++x) {
                out.data[(static_cast<std::size_t>(c) * crop + y) * crop + x] =
                    img.data[(static_cast<std::size_t>(c) * height + y0 + y) * img.side + x0 + x];
            }
        }
    }
    return out;
}

ImageTensor bilinear_resize(const ImageTensor& img, int height, int target) {
    ImageTensor out;
    out.channels = img.channels;
    out.side = target;
    out.data.resize(static_cast<std::size_t>(img.channels) * target * target);
    const double sy = static_cast<double>(height) / target;
    const double sx = static_cast<double>(img.side) / target;
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < target; ++y) {
            const double fy = (y + 0.5) * sy - 0.5;
            const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, height - 1);
            const int y1 = std::min(y0 + 1, height - 1);
            const double wy = std::clamp(fy - y0, 0.0, 1.0);
            for (int x = 0; x < target; ++x) {
                const double fx = (x + 0.5) * sx - 0.5;
                const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.side - 1);
                const int x1 = std::min(x0 + 1, img.side - 1);
                const double wx = std::clamp(fx - x0, 0.0, 1.0);
                auto px = [&](int yy, int xx) {
                    return static_cast<double>(
                        img.data[(static_cast<std::size_t>(c) * height + yy) * img.side + xx]);
                };
                const double top = px(y0, x0) * (1.0 - wx) + px(y0, x1) * wx;
                const double bot = px(y1, x0) * (1.0 - wx) + px(y1, x1) * wx;
                const double v = top * (1.0 - wy) + bot * wy;
                out.data[(static_cast<std::size_t>(c) * target + y) * target + x] =
                    static_cast<float>(std::clamp(v, -1.0, 1.0));
            }
        }
    }
    return out;
}

} // namespace

Dataset load_cifar_binary(const std::string& path, const std::set<int>& label_filter,
                          std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    in.seekg(0, std::ios::end);
    const std::size_t size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (size == 0 || size % kCifarRecord != 0) {
        throw data_error(path + ": size " + std::to_string(size) +
                         " is not a multiple of the 3073-byte record (offset " +
                         std::to_string(size % kCifarRecord) + " past the last full record)");
    }
    const std::size_t records = size / kCifarRecord;
    const std::string stem = std::filesystem::path(path).filename().string();

    Dataset ds;
    std::vector<std::uint8_t> record(kCifarRecord);
    for (std::size_t r = 0; r < records; ++r) {
        in.read(reinterpret_cast<char*>(record.data()), kCifarRecord);
        if (!in) throw data_error(path + ": short read at record " + std::to_string(r));
        const int label = record[0];
        if (!label_filter.empty() && !label_filter.count(label)) continue;

        ImageTensor img;
        img.channels = 3;
        img.side = kCifarSide;
        img.data.resize(3 * 1024);
        for (std::size_t i = 0; i < 3 * 1024; ++i) {
            img.data[i] = byte_to_unit(record[1 + i]);
        }
        ds.images.push_back(std::move(img));
        ds.ids.push_back(stem + ":" + std::to_string(r));
        if (limit && ds.images.size() >= limit) break;
    }
    ds.validate();
    return ds;
}

Dataset load_image_directory(const std::string& path, std::optional<int> crop,
                             std::optional<int> resize, std::size_t limit) {
    if (!std::filesystem::is_directory(path)) {
        throw data_error(path + " is not a directory");
    }
    std::vector<std::string> names;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (!entry.is_regular_file()) continue;
        names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());

    Dataset ds;
    for (const std::string& name : names) {
        const std::string full = (std::filesystem::path(path) / name).string();
        const RasterImage raster = read_raster(full);
        ImageTensor img = raster_to_tensor(raster);
        int height = raster.height;
        if (crop) {
            img = center_crop(img, *crop, height);
            height = *crop;
        }
        if (resize) {
            img = bilinear_resize(img, height, *resize);
            height = *resize;
        }
        if (height != img.side) {
            throw data_error(full + ": non-square image " + std::to_string(img.side) + "x" +
                             std::to_string(height) + " needs --crop or --resize");
        }
        ds.images.push_back(std::move(img));
        ds.ids.push_back(name);
        if (limit && ds.images.size() >= limit) break;
    }
    ds.validate();
    return ds;
}

Dataset load_raw_tensor(const std::string& path, int channels, int side, std::size_t limit) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open " + path);
    std::uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in) throw data_error(path + ": missing image count header");
    if (count == 0) throw data_error(path + ": empty dataset");

    in.seekg(0, std::ios::end);
    const std::size_t size = static_cast<std::size_t>(in.tellg());
    const std::size_t per_image = static_cast<std::size_t>(channels) * side * side;
    const std::size_t expected = 8 + count * per_image * sizeof(float);
    if (size != expected) {
        throw data_error(path + ": size " + std::to_string(size) + " does not match count " +
                         std::to_string(count) + " with declared shape " +
                         std::to_string(channels) + "x" + std::to_string(side) + " (expected " +
                         std::to_string(expected) + ")");
    }
    in.seekg(8);

    Dataset ds;
    const std::size_t take = limit ? std::min<std::size_t>(limit, count) : count;
    for (std::size_t i = 0; i < take; ++i) {
        ImageTensor img;
        img.channels = channels;
        img.side = side;
        img.data.resize(per_image);
        in.read(reinterpret_cast<char*>(img.data.data()),
                static_cast<std::streamsize>(per_image * sizeof(float)));
        if (!in) throw data_error(path + ": truncated at image " + std::to_string(i));
        for (std::size_t j = 0; j < per_image; ++j) {
            const float v = img.data[j];
            if (!std::isfinite(v) || v < img.range_min || v > img.range_max) {
                throw data_error(path + ": image " + std::to_string(i) + " value " +
                                 std::to_string(v) + " at index " + std::to_string(j) +
                                 " outside [-1, 1]");
            }
        }
        ds.images.push_back(std::move(img));
        ds.ids.push_back("raw:" + std::to_string(i));
    }
    ds.validate();
    return ds;
}

void save_raw_tensor(const Dataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot write " + path);
    const std::uint64_t count = dataset.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const ImageTensor& img : dataset.images) {
        out.write(reinterpret_cast<const char*>(img.data.data()),
                  static_cast<std::streamsize>(img.data.size() * sizeof(float)));
    }
    if (!out) throw data_error("short write on " + path);
}

Dataset DatasetSource::load() const {
    switch (kind) {
        case SourceKind::cifar_binary:
            return load_cifar_binary(path, label_filter, limit);
        case SourceKind::image_directory:
            return load_image_directory(path, crop, resize, limit);
        case SourceKind::raw_tensor:
            return load_raw_tensor(path, channels, side, limit);
    }
    throw config_error("unknown dataset source kind");
}

} // namespace nda
