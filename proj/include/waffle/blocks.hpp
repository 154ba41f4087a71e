// SPDX-License-Identifier: Apache-2.0
//
// Text blocks collected from a rendered page.

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace waffle {

struct BBox {
    double x = 0, y = 0, w = 0, h = 0;
    double center_x() const { return x + w / 2; }
    double center_y() const { return y + h / 2; }
    friend bool operator==(const BBox&, const BBox&) = default;
};

using Rgb = std::array<std::uint8_t, 3>;

struct TextBlock {
    std::string text;
    BBox bbox;  // CSS pixels
    Rgb color{0, 0, 0};
    friend bool operator==(const TextBlock&, const TextBlock&) = default;
};

using BlockList = std::vector<TextBlock>;

class BlockFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `[{"text": ..., "bbox": [x, y, w, h], "color": [r, g, b]}, ...]`.
/// Rejects negative sizes and colour components outside [0, 255].
BlockList blocks_from_json(const nlohmann::json& j);
nlohmann::json blocks_to_json(const BlockList& blocks);

}  // namespace waffle
