#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ganad {

// 8-bit interleaved pixels, channels is 1 (gray) or 3 (RGB).
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

// Alpha is dropped, palettes and low bit depths are expanded, 16-bit is reduced
// to 8-bit. Throws FormatError on anything libpng rejects.
RawImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& image);

}  // namespace ganad
