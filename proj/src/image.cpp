// SPDX-License-Identifier: Apache-2.0

#include "waffle/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace waffle {
namespace {

struct ReadCursor {
    std::string_view bytes;
    std::size_t pos = 0;
};

void read_callback(png_structp png, png_bytep out, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + len > cur->bytes.size()) png_error(png, "truncated PNG");
    std::memcpy(out, cur->bytes.data() + cur->pos, len);
    cur->pos += len;
}

void write_callback(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

void flush_callback(png_structp) {}

[[noreturn]] void error_callback(png_structp, png_const_charp msg) { throw ImageError(std::string("png: ") + msg); }
void warning_callback(png_structp, png_const_charp) {}

// Weight of source cell [s, s+1) inside destination cell [d0, d1).
std::vector<std::vector<std::pair<int, double>>> area_weights(int src, int dst) {
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int d = 0; d < dst; ++d) {
        const double lo = d * scale;
        const double hi = (d + 1) * scale;
        for (int s = static_cast<int>(std::floor(lo)); s < std::min(src, static_cast<int>(std::ceil(hi))); ++s) {
            const double overlap = std::min<double>(hi, s + 1) - std::max<double>(lo, s);
            if (overlap > 0) w[static_cast<std::size_t>(d)].emplace_back(s, overlap / scale);
        }
    }
    return w;
}

}  // namespace

Image decode_png(std::string_view bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw ImageError("not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
    if (!png) throw ImageError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{bytes, 0};
    Image img;
    try {
        png_set_read_fn(png, &cursor, read_callback);
        png_read_info(png, info);
        const auto color = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
            if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
            png_set_gray_to_rgb(png);
        }
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
        png_read_update_info(png, info);
        img.width = static_cast<int>(png_get_image_width(png, info));
        img.height = static_cast<int>(png_get_image_height(png, info));
        if (png_get_rowbytes(png, info) != static_cast<png_size_t>(img.width) * 3) {
            throw ImageError("unexpected PNG row layout");
        }
        img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
        std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
        for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.at(0, y);
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

std::string encode_png(const Image& image) {
    if (image.empty()) throw ImageError("cannot encode an empty image");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_callback, warning_callback);
    if (!png) throw ImageError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    std::string out;
    try {
        png_set_write_fn(png, &out, write_callback, flush_callback);
        png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                     PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < image.height; ++y) {
            png_write_row(png, const_cast<png_bytep>(image.at(0, y)));
        }
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_png(buf.str());
}

void write_png(const Image& image, const std::filesystem::path& path) {
    const std::string bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ImageError("cannot write " + path.string());
}

GrayImage to_grayscale(const Image& image) {
    GrayImage g;
    g.width = image.width;
    g.height = image.height;
    g.values.resize(static_cast<std::size_t>(image.width) * image.height);
    for (std::size_t i = 0; i < g.values.size(); ++i) {
        const std::uint8_t* p = image.pixels.data() + 3 * i;
        g.values[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
    return g;
}

GrayImage resize_area(const GrayImage& image, int width, int height) {
    if (image.width == width && image.height == height) return image;
    if (image.width <= 0 || image.height <= 0 || width <= 0 || height <= 0) {
        throw ImageError("cannot resize an empty image");
    }
    const auto wx = area_weights(image.width, width);
    const auto wy = area_weights(image.height, height);
    // Horizontal pass, then vertical.
    std::vector<double> tmp(static_cast<std::size_t>(width) * image.height, 0.0);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0;
            for (const auto& [s, w] : wx[static_cast<std::size_t>(x)]) acc += w * image.at(s, y);
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    GrayImage out;
    out.width = width;
    out.height = height;
    out.values.assign(static_cast<std::size_t>(width) * height, 0.0);
    for (int y = 0; y < height; ++y) {
        for (const auto& [s, w] : wy[static_cast<std::size_t>(y)]) {
            for (int x = 0; x < width; ++x) out.at(x, y) += w * tmp[static_cast<std::size_t>(s) * width + x];
        }
    }
    return out;
}

bool is_uniform(const Image& image) {
    if (image.pixels.size() < 3) return true;
    const std::uint8_t* first = image.pixels.data();
    for (std::size_t i = 3; i < image.pixels.size(); i += 3) {
        if (std::memcmp(first, image.pixels.data() + i, 3) != 0) return false;
    }
    return true;
}

}  // namespace waffle
