#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace maae::img {

/// 8-bit image, row-major, `channels` interleaved (1 = gray, 3 = RGB).
struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

void writePng(const std::string& path, const Image8& image);
Image8 readPng(const std::string& path);

}  // namespace maae::img
