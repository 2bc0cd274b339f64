#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nda {

/// Interleaved 8-bit raster (RGB or grayscale).
struct RasterImage {
    int width = 0;
    int height = 0;
    int channels = 0;                    // 1 or 3
    std::vector<std::uint8_t> pixels;    // height * width * channels
};

/// Decodes PNG or binary PPM/PGM by extension. Throws data_error naming the
/// file on anything unreadable.
RasterImage read_raster(const std::string& path);

void write_png(const RasterImage& image, const std::string& path);
void write_ppm(const RasterImage& image, const std::string& path);

} // namespace nda
