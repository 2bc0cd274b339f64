#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace nda {

/// Dense C x L x L image, row-major per channel. All pixel math in this
/// project assumes values inside value_range (checked on ingestion).
struct ImageTensor {
    int channels = 0;
    int side = 0;
    std::vector<float> data;            // channels * side * side
    float range_min = -1.0f;
    float range_max = 1.0f;

    ImageTensor() = default;
    ImageTensor(int channels, int side, std::vector<float> data,
                float range_min = -1.0f, float range_max = 1.0f);

    std::size_t pixel_count() const { return static_cast<std::size_t>(side) * side; }
    std::size_t value_count() const { return static_cast<std::size_t>(channels) * pixel_count(); }

    float at(int c, int row, int col) const {
        return data[(static_cast<std::size_t>(c) * side + row) * side + col];
    }
    float& at(int c, int row, int col) {
        return data[(static_cast<std::size_t>(c) * side + row) * side + col];
    }

    // Throws data_error when a value falls outside value_range.
    void check_range(const std::string& context) const;
};

/// Ordered image collection; index order is the canonical column order of
/// every attribution matrix built from it.
struct Dataset {
    std::vector<ImageTensor> images;
    std::vector<std::string> ids;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
    int channels() const { return images.empty() ? 0 : images.front().channels; }
    int side() const { return images.empty() ? 0 : images.front().side; }

    const ImageTensor& operator[](std::size_t i) const { return images[i]; }

    // Validates shared shape and id uniqueness; throws data_error.
    void validate() const;

    // Index of an id, or -1.
    std::ptrdiff_t find(const std::string& id) const;
};

/// Square patch cut from an image, zero-filled where it leaves the bounds.
struct PatchView {
    std::uint32_t source_index = 0;       // image index within its dataset
    int center_row = 0;
    int center_col = 0;
    int size = 0;                         // P
    int channels = 0;
    std::vector<float> values;            // channels * size * size
    std::vector<float> center_pixel;      // channels

    float at(int c, int row, int col) const {
        return values[(static_cast<std::size_t>(c) * size + row) * size + col];
    }
};

/// P x P window whose top-left corner is center - floor((P-1)/2) per axis;
/// coordinates outside [0, L)^2 contribute exactly zero.
PatchView extract_patch(const ImageTensor& img, int center_row, int center_col, int patch_size);

inline int patch_offset(int patch_size) { return (patch_size - 1) / 2; }

/// Non-overlapping window x window mean pooling, stride = window; trailing
/// rows/cols that do not fill a window are dropped. window == 1 is identity.
std::vector<float> downsample(const std::vector<float>& values, int channels, int size, int window);

PatchView downsample(const PatchView& patch, int window);

} // namespace nda
