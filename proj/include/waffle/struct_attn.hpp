// SPDX-License-Identifier: Apache-2.0
//
// Structure-aware attention masks.
//
// A query token whose node is u may attend to an earlier key token owned by
// w when one of the following holds:
//   self     w == u
//   parent   w is an ancestor of u, within ancestor_depth steps
//   sibling  w precedes u under the same parent (w's own tokens only,
//            never its descendants)
//   prompt   the key lies in the prompt region and prompt_visible is set
// Structural heads use this mask; the remaining heads stay fully causal.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "waffle/dom.hpp"
#include "waffle/token_align.hpp"

namespace waffle {

/// Positive rational p/q.
struct Fraction {
    std::uint32_t num = 1;
    std::uint32_t den = 4;

    /// Parses "p/q" or an integer; throws std::invalid_argument.
    static Fraction parse(std::string_view text);
    std::string to_string() const;
    friend bool operator==(const Fraction&, const Fraction&) = default;
};

struct MaskConfig {
    std::size_t n_heads = 8;
    std::size_t n_layers = 1;
    Fraction structural_fraction{1, 4};
    std::optional<std::size_t> ancestor_depth = 1;  // nullopt: unbounded
    bool prompt_visible = true;

    /// ceil(structural_fraction * n_heads); throws std::invalid_argument
    /// when the fraction is outside (0, 1] or the result is zero.
    std::size_t structural_head_count() const;
};

enum class CellCategory : std::uint8_t { kDenied = 0, kSelf, kParent, kSibling, kPrompt };
enum class HeadKind : std::uint8_t { kStructural, kFull };

std::string_view to_string(CellCategory c);

using HeadMap = std::vector<std::vector<HeadKind>>;  // [layer][head]

HeadMap make_head_map(const MaskConfig& config);

/// Packed lower triangle of an n x n boolean matrix, diagonal included.
class TriangleBits {
public:
    TriangleBits() = default;
    explicit TriangleBits(std::size_t n) : n_(n), bits_(cell_count(n), false) {}

    static std::size_t cell_count(std::size_t n) { return n * (n + 1) / 2; }
    static std::size_t index(std::size_t i, std::size_t j) { return i * (i + 1) / 2 + j; }

    std::size_t n() const { return n_; }
    /// False for every j > i.
    bool get(std::size_t i, std::size_t j) const { return j <= i && bits_[index(i, j)]; }
    void set(std::size_t i, std::size_t j, bool v) { bits_[index(i, j)] = v; }
    std::size_t count() const;

    friend bool operator==(const TriangleBits&, const TriangleBits&) = default;

private:
    std::size_t n_ = 0;
    std::vector<bool> bits_;
};

struct AttnMaskSet {
    std::size_t n_tokens = 0;
    std::size_t n_prompt = 0;
    TriangleBits structural;
    /// Per lower-triangle cell, same indexing as TriangleBits. Empty for
    /// imported masks.
    std::vector<CellCategory> provenance;
    HeadMap head_map;
    MaskConfig config;

    bool allowed(std::size_t query, std::size_t key) const { return structural.get(query, key); }
    /// Requires provenance (masks built in-process).
    CellCategory category(std::size_t query, std::size_t key) const;
};

class AlignmentMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MaskFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

AttnMaskSet build_mask(const DomTree& tree, const TokenAlignment& alignment, const MaskConfig& config);

/// Mask for a sequence made only of prompt tokens (empty document).
AttnMaskSet build_prompt_mask(std::size_t n_prompt, const MaskConfig& config);

inline constexpr std::uint16_t kMaskFormatVersion = 1;

/// Binary layout: "WAFM", u16 version, u32 n_tokens (little endian), then
/// the lower triangle row by row (row i holds i + 1 bits), bits packed
/// LSB-first into bytes, zero-padded to a whole byte at the end.
std::string encode_mask_bits(const TriangleBits& bits);
TriangleBits decode_mask_bits(std::string_view bytes);

nlohmann::json mask_sidecar(const AttnMaskSet& mask);

/// Writes `path` and the JSON sidecar `path` + ".json".
void export_mask(const AttnMaskSet& mask, const std::filesystem::path& path);
AttnMaskSet import_mask(const std::filesystem::path& path);

struct MaskStats {
    std::size_t lower_cells = 0;
    std::size_t allowed_cells = 0;
    double density = 0.0;  // allowed / lower_cells
    std::map<CellCategory, std::size_t> per_category;  // empty without provenance
};

MaskStats mask_stats(const AttnMaskSet& mask);

}  // namespace waffle
