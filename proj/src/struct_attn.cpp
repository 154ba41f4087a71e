// SPDX-License-Identifier: Apache-2.0

#include "waffle/struct_attn.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace waffle {
namespace {

constexpr char kMagic[4] = {'W', 'A', 'F', 'M'};
constexpr std::size_t kHeaderSize = 4 + 2 + 4;

std::uint32_t parse_u32(std::string_view s) {
    std::uint32_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::invalid_argument("not an unsigned integer: '" + std::string(s) + "'");
    }
    return v;
}

void check_alignment(const DomTree& tree, const TokenAlignment& a) {
    if (a.source_size != tree.source().size()) {
        throw AlignmentMismatch("alignment covers " + std::to_string(a.source_size) +
                                " bytes but the document has " + std::to_string(tree.source().size()));
    }
    if (a.node_of.size() != a.tokens.size()) {
        throw AlignmentMismatch("node_of has " + std::to_string(a.node_of.size()) + " entries for " +
                                std::to_string(a.tokens.size()) + " tokens");
    }
    std::size_t expected = 0;
    for (std::size_t i = 0; i < a.tokens.size(); ++i) {
        const ByteSpan s = a.tokens[i].span;
        if (s.begin != expected || s.empty() || s.end > a.source_size) {
            throw AlignmentMismatch("token " + std::to_string(i) + " does not continue the byte cover");
        }
        expected = s.end;
        const NodeId owner = tree.owner_of(s.begin);
        const NodeId want = owner == kNoNode ? kPrefixNode : owner;
        if (a.node_of[i] != want) {
            throw AlignmentMismatch("token " + std::to_string(i) + " is assigned to node " +
                                    std::to_string(a.node_of[i]) + " but its first byte belongs to " +
                                    std::to_string(want));
        }
    }
    if (expected != a.source_size) throw AlignmentMismatch("tokens do not cover the document");
}

// Category of key node w as seen from query node u (both real nodes).
void fill_relations(const DomTree& tree, NodeId u, const MaskConfig& config,
                    std::vector<CellCategory>& rel) {
    std::fill(rel.begin(), rel.end(), CellCategory::kDenied);
    rel[static_cast<std::size_t>(u)] = CellCategory::kSelf;
    const DomNode& node = tree.node(u);
    if (node.parent != kNoNode) {
        const DomNode& parent = tree.node(node.parent);
        for (std::size_t s = 0; s < node.sibling_index; ++s) {
            rel[static_cast<std::size_t>(parent.children[s])] = CellCategory::kSibling;
        }
    }
    std::size_t depth = 0;
    for (NodeId p = node.parent; p != kNoNode; p = tree.node(p).parent) {
        if (config.ancestor_depth && depth >= *config.ancestor_depth) break;
        rel[static_cast<std::size_t>(p)] = CellCategory::kParent;
        ++depth;
    }
}

AttnMaskSet empty_mask(std::size_t n_tokens, std::size_t n_prompt, const MaskConfig& config) {
    AttnMaskSet mask;
    mask.n_tokens = n_tokens;
    mask.n_prompt = n_prompt;
    mask.structural = TriangleBits(n_tokens);
    mask.provenance.assign(TriangleBits::cell_count(n_tokens), CellCategory::kDenied);
    mask.head_map = make_head_map(config);
    mask.config = config;
    return mask;
}

void fill_prompt_rows(AttnMaskSet& mask) {
    // Prompt tokens keep plain causal attention among themselves.
    for (std::size_t i = 0; i < mask.n_prompt; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            mask.structural.set(i, j, true);
            mask.provenance[TriangleBits::index(i, j)] = CellCategory::kPrompt;
        }
    }
}

}  // namespace

Fraction Fraction::parse(std::string_view text) {
    Fraction f;
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        f.num = parse_u32(text);
        f.den = 1;
    } else {
        f.num = parse_u32(text.substr(0, slash));
        f.den = parse_u32(text.substr(slash + 1));
    }
    if (f.den == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
    return f;
}

std::string Fraction::to_string() const {
    return std::to_string(num) + "/" + std::to_string(den);
}

std::size_t MaskConfig::structural_head_count() const {
    if (structural_fraction.den == 0 || structural_fraction.num == 0 ||
        structural_fraction.num > structural_fraction.den) {
        throw std::invalid_argument("structural fraction must lie in (0, 1], got " +
                                    structural_fraction.to_string());
    }
    const std::uint64_t num = std::uint64_t{structural_fraction.num} * n_heads;
    const std::size_t count = static_cast<std::size_t>((num + structural_fraction.den - 1) / structural_fraction.den);
    if (count == 0) throw std::invalid_argument("configuration yields no structural head");
    return count;
}

std::string_view to_string(CellCategory c) {
    switch (c) {
        case CellCategory::kDenied: return "denied";
        case CellCategory::kSelf: return "self";
        case CellCategory::kParent: return "parent";
        case CellCategory::kSibling: return "sibling";
        case CellCategory::kPrompt: return "prompt";
    }
    return "?";
}

HeadMap make_head_map(const MaskConfig& config) {
    const std::size_t structural = config.structural_head_count();
    HeadMap map(config.n_layers, std::vector<HeadKind>(config.n_heads, HeadKind::kFull));
    for (auto& layer : map) {
        std::fill_n(layer.begin(), structural, HeadKind::kStructural);
    }
    return map;
}

std::size_t TriangleBits::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

CellCategory AttnMaskSet::category(std::size_t query, std::size_t key) const {
    if (key > query) return CellCategory::kDenied;
    if (provenance.empty()) throw std::logic_error("mask carries no provenance");
    return provenance[TriangleBits::index(query, key)];
}

AttnMaskSet build_mask(const DomTree& tree, const TokenAlignment& alignment, const MaskConfig& config) {
    check_alignment(tree, alignment);
    const std::size_t n_prompt = alignment.n_prompt;
    const std::size_t n = alignment.sequence_length();
    AttnMaskSet mask = empty_mask(n, n_prompt, config);
    fill_prompt_rows(mask);

    // Slot tree.size() stands for the prefix/suffix pseudo-node.
    const std::size_t prefix_slot = tree.size();
    auto slot = [&](NodeId id) { return id == kPrefixNode ? prefix_slot : static_cast<std::size_t>(id); };
    std::vector<CellCategory> rel(tree.size() + 1, CellCategory::kDenied);
    NodeId cached = kNoNode;

    for (std::size_t t = 0; t < alignment.size(); ++t) {
        const std::size_t i = n_prompt + t;
        const NodeId u = alignment.node_of[t];
        if (u != cached) {
            if (u == kPrefixNode) {
                std::fill(rel.begin(), rel.end(), CellCategory::kDenied);
                rel[prefix_slot] = CellCategory::kSelf;
            } else {
                fill_relations(tree, u, config, rel);
                rel[prefix_slot] = CellCategory::kDenied;
            }
            cached = u;
        }
        const std::size_t row = TriangleBits::index(i, 0);
        if (config.prompt_visible) {
            for (std::size_t j = 0; j < n_prompt; ++j) {
                mask.structural.set(i, j, true);
                mask.provenance[row + j] = CellCategory::kPrompt;
            }
        }
        for (std::size_t s = 0; s <= t; ++s) {
            const CellCategory c = rel[slot(alignment.node_of[s])];
            if (c == CellCategory::kDenied) continue;
            mask.structural.set(i, n_prompt + s, true);
            mask.provenance[row + n_prompt + s] = c;
        }
    }
    return mask;
}

AttnMaskSet build_prompt_mask(std::size_t n_prompt, const MaskConfig& config) {
    AttnMaskSet mask = empty_mask(n_prompt, n_prompt, config);
    fill_prompt_rows(mask);
    return mask;
}

std::string encode_mask_bits(const TriangleBits& bits) {
    const std::size_t n = bits.n();
    if (n > 0xFFFFFFFFull) throw MaskFormatError("mask too large for the u32 token count");
    const std::size_t cells = TriangleBits::cell_count(n);
    std::string out(kHeaderSize + (cells + 7) / 8, '\0');
    std::copy(std::begin(kMagic), std::end(kMagic), out.begin());
    out[4] = static_cast<char>(kMaskFormatVersion & 0xFF);
    out[5] = static_cast<char>(kMaskFormatVersion >> 8);
    for (int b = 0; b < 4; ++b) out[6 + b] = static_cast<char>((n >> (8 * b)) & 0xFF);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++k) {
            if (bits.get(i, j)) {
                out[kHeaderSize + k / 8] = static_cast<char>(
                    static_cast<unsigned char>(out[kHeaderSize + k / 8]) | (1u << (k % 8)));
            }
        }
    }
    return out;
}

TriangleBits decode_mask_bits(std::string_view bytes) {
    if (bytes.size() < kHeaderSize || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw MaskFormatError("missing WAFM header");
    }
    auto byte = [&](std::size_t k) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[k])); };
    const std::uint32_t version = byte(4) | (byte(5) << 8);
    if (version != kMaskFormatVersion) {
        throw MaskFormatError("unsupported mask format version " + std::to_string(version));
    }
    std::size_t n = 0;
    for (int b = 0; b < 4; ++b) n |= static_cast<std::size_t>(byte(6 + static_cast<std::size_t>(b))) << (8 * b);
    const std::size_t cells = TriangleBits::cell_count(n);
    if (bytes.size() != kHeaderSize + (cells + 7) / 8) {
        throw MaskFormatError("payload size " + std::to_string(bytes.size() - kHeaderSize) +
                              " does not match " + std::to_string(n) + " tokens");
    }
    TriangleBits bits(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j, ++k) {
            if ((byte(kHeaderSize + k / 8) >> (k % 8)) & 1u) bits.set(i, j, true);
        }
    }
    for (; k < ((cells + 7) / 8) * 8; ++k) {
        if ((byte(kHeaderSize + k / 8) >> (k % 8)) & 1u) throw MaskFormatError("non-zero padding bits");
    }
    return bits;
}

nlohmann::json mask_sidecar(const AttnMaskSet& mask) {
    nlohmann::json j;
    j["n_heads"] = mask.config.n_heads;
    j["n_layers"] = mask.config.n_layers;
    j["structural_fraction"] = mask.config.structural_fraction.to_string();
    j["ancestor_depth"] = mask.config.ancestor_depth ? nlohmann::json(*mask.config.ancestor_depth)
                                                     : nlohmann::json("unbounded");
    j["prompt_visible"] = mask.config.prompt_visible;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : mask.head_map) {
        nlohmann::json heads = nlohmann::json::array();
        for (HeadKind h : layer) heads.push_back(h == HeadKind::kStructural ? "structural" : "full");
        layers.push_back(std::move(heads));
    }
    j["head_map"] = std::move(layers);
    j["n_prompt"] = mask.n_prompt;
    j["n_tokens"] = mask.n_tokens;
    return j;
}

void export_mask(const AttnMaskSet& mask, const std::filesystem::path& path) {
    const std::string payload = encode_mask_bits(mask.structural);
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    std::filesystem::path sidecar = path;
    sidecar += ".json";
    std::ofstream out(sidecar);
    if (!out) throw std::runtime_error("cannot write " + sidecar.string());
    out << mask_sidecar(mask).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + sidecar.string());
}

AttnMaskSet import_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    AttnMaskSet mask;
    mask.structural = decode_mask_bits(buf.str());
    mask.n_tokens = mask.structural.n();

    std::filesystem::path sidecar = path;
    sidecar += ".json";
    std::ifstream side(sidecar);
    if (!side) throw std::runtime_error("cannot read " + sidecar.string());
    try {
        const auto j = nlohmann::json::parse(side);
        mask.config.n_heads = j.at("n_heads").get<std::size_t>();
        mask.config.n_layers = j.value("n_layers", std::size_t{1});
        mask.config.structural_fraction = Fraction::parse(j.at("structural_fraction").get<std::string>());
        const auto& depth = j.at("ancestor_depth");
        if (depth.is_string()) {
            if (depth.get<std::string>() != "unbounded") throw MaskFormatError("bad ancestor_depth");
            mask.config.ancestor_depth.reset();
        } else {
            mask.config.ancestor_depth = depth.get<std::size_t>();
        }
        mask.config.prompt_visible = j.value("prompt_visible", true);
        mask.n_prompt = j.at("n_prompt").get<std::size_t>();
        for (const auto& layer : j.at("head_map")) {
            std::vector<HeadKind> heads;
            for (const auto& h : layer) {
                const auto s = h.get<std::string>();
                if (s != "structural" && s != "full") throw MaskFormatError("bad head kind '" + s + "'");
                heads.push_back(s == "structural" ? HeadKind::kStructural : HeadKind::kFull);
            }
            mask.head_map.push_back(std::move(heads));
        }
    } catch (const nlohmann::json::exception& e) {
        throw MaskFormatError(std::string("mask sidecar: ") + e.what());
    }
    return mask;
}

MaskStats mask_stats(const AttnMaskSet& mask) {
    MaskStats s;
    s.lower_cells = TriangleBits::cell_count(mask.n_tokens);
    s.allowed_cells = mask.structural.count();
    s.density = s.lower_cells == 0 ? 0.0 : static_cast<double>(s.allowed_cells) / static_cast<double>(s.lower_cells);
    for (CellCategory c : mask.provenance) {
        if (c != CellCategory::kDenied) ++s.per_category[c];
    }
    return s;
}

}  // namespace waffle
