// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace waffle {

/// Row-major RGB8 image.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // 3 * width * height

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}

    bool empty() const { return width <= 0 || height <= 0; }
    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Single-channel image of doubles, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Any PNG colour type is converted to RGB8; alpha is dropped.
Image decode_png(std::string_view bytes);
std::string encode_png(const Image& image);
Image read_png(const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

/// Rec. 601 luma.
GrayImage to_grayscale(const Image& image);

/// Area-weighted resampling; returns the input unchanged when the size
/// already matches.
GrayImage resize_area(const GrayImage& image, int width, int height);

/// True when every pixel equals the first one.
bool is_uniform(const Image& image);

}  // namespace waffle
