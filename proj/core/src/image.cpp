#include "nda/image.hpp"

#include "nda/errors.hpp"

#include <cmath>
#include <unordered_set>

namespace nda {

ImageTensor::ImageTensor(int channels_, int side_, std::vector<float> data_,
                         float range_min_, float range_max_)
    : channels(channels_), side(side_), data(std::move(data_)),
      range_min(range_min_), range_max(range_max_) {
    if (channels <= 0 || side <= 0) {
        throw data_error("image shape must be positive, got C=" + std::to_string(channels) +
                         " L=" + std::to_string(side));
    }
    if (data.size() != value_count()) {
        throw data_error("image data length " + std::to_string(data.size()) +
                         " does not match C*L*L = " + std::to_string(value_count()));
    }
}

void ImageTensor::check_range(const std::string& context) const {
    for (std::size_t i = 0; i < data.size(); ++i) {
        const float v = data[i];
        if (!std::isfinite(v) || v < range_min || v > range_max) {
            throw data_error(context + ": value " + std::to_string(v) + " at flat index " +
                             std::to_string(i) + " outside [" + std::to_string(range_min) +
                             ", " + std::to_string(range_max) + "]");
        }
    }
}

void Dataset::validate() const {
    if (images.size() != ids.size()) {
        throw data_error("dataset has " + std::to_string(images.size()) + " images but " +
                         std::to_string(ids.size()) + " ids");
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
        if (!seen.insert(id).second) {
            throw data_error("duplicate dataset id: " + id);
        }
    }
    if (images.empty()) return;
    const int c = images.front().channels;
    const int l = images.front().side;
    for (std::size_t i = 1; i < images.size(); ++i) {
        if (images[i].channels != c || images[i].side != l) {
            throw data_error("dataset image '" + ids[i] + "' has shape " +
                             std::to_string(images[i].channels) + "x" + std::to_string(images[i].side) +
                             ", expected " + std::to_string(c) + "x" + std::to_string(l));
        }
    }
}

std::ptrdiff_t Dataset::find(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == id) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
}

PatchView extract_patch(const ImageTensor& img, int center_row, int center_col, int patch_size) {
    const int L = img.side;
    const int C = img.channels;
    const int off = patch_offset(patch_size);

    PatchView patch;
    patch.center_row = center_row;
    patch.center_col = center_col;
    patch.size = patch_size;
    patch.channels = C;
    patch.values.assign(static_cast<std::size_t>(C) * patch_size * patch_size, 0.0f);
    patch.center_pixel.resize(C);

    for (int c = 0; c < C; ++c) {
        for (int dy = 0; dy < patch_size; ++dy) {
            const int y = center_row - off + dy;
            if (y < 0 || y >= L) continue;
            for (int dx = 0; dx < patch_size; ++dx) {
                const int x = center_col - off + dx;
                if (x < 0 || x >= L) continue;
                patch.values[(static_cast<std::size_t>(c) * patch_size + dy) * patch_size + dx] =
                    img.at(c, y, x);
            }
        }
        patch.center_pixel[c] = img.at(c, center_row, center_col);
    }
    return patch;
}

std::vector<float> downsample(const std::vector<float>& values, int channels, int size, int window) {
    if (window < 1) {
        throw config_error("downsample window must be >= 1, got " + std::to_string(window));
    }
    if (size < window) {
        throw config_error("patch size " + std::to_string(size) +
                           " smaller than downsample window " + std::to_string(window));
    }
    const int out = size / window;
    std::vector<float> pooled(static_cast<std::size_t>(channels) * out * out);
    const double inv = 1.0 / (static_cast<double>(window) * window);
    for (int c = 0; c < channels; ++c) {
        for (int i = 0; i < out; ++i) {
            for (int j = 0; j < out; ++j) {
                double acc = 0.0;
                for (int a = 0; a < window; ++a) {
                    for (int b = 0; b < window; ++b) {
                        acc += values[(static_cast<std::size_t>(c) * size + i * window + a) * size +
                                      j * window + b];
                    }
                }
                pooled[(static_cast<std::size_t>(c) * out + i) * out + j] =
                    static_cast<float>(acc * inv);
            }
        }
    }
    return pooled;
}

PatchView downsample(const PatchView& patch, int window) {
    PatchView pooled;
    pooled.source_index = patch.source_index;
    pooled.center_row = patch.center_row;
    pooled.center_col = patch.center_col;
    pooled.channels = patch.channels;
    pooled.size = patch.size / window;
    pooled.values = downsample(patch.values, patch.channels, patch.size, window);
    pooled.center_pixel = patch.center_pixel;
    return pooled;
}

} // namespace nda
