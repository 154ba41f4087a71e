// SPDX-License-Identifier: Apache-2.0

#include "waffle/blocks.hpp"

#include <cmath>

namespace waffle {

BlockList blocks_from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw BlockFormatError("block list must be a JSON array");
    BlockList out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        const std::string where = "block " + std::to_string(i) + ": ";
        try {
            TextBlock b;
            b.text = e.at("text").get<std::string>();
            const auto& box = e.at("bbox");
            if (!box.is_array() || box.size() != 4) throw BlockFormatError(where + "bbox needs 4 numbers");
            b.bbox = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
            if (!std::isfinite(b.bbox.x) || !std::isfinite(b.bbox.y) || !(b.bbox.w >= 0) || !(b.bbox.h >= 0) ||
                !std::isfinite(b.bbox.w) || !std::isfinite(b.bbox.h)) {
                throw BlockFormatError(where + "bbox must be finite with non-negative size");
            }
            const auto& color = e.at("color");
            if (!color.is_array() || color.size() != 3) throw BlockFormatError(where + "color needs 3 components");
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = color[c].get<double>();
                if (!(v >= 0 && v <= 255)) throw BlockFormatError(where + "color component out of range");
                b.color[c] = static_cast<std::uint8_t>(std::lround(v));
            }
            out.push_back(std::move(b));
        } catch (const nlohmann::json::exception& ex) {
            throw BlockFormatError(where + ex.what());
        }
    }
    return out;
}

nlohmann::json blocks_to_json(const BlockList& blocks) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& b : blocks) {
        out.push_back({{"text", b.text},
                       {"bbox", {b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h}},
                       {"color", {b.color[0], b.color[1], b.color[2]}}});
    }
    return out;
}

}  // namespace waffle
