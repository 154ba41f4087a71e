// SPDX-License-Identifier: Apache-2.0
//
// Mutation-based construction of contrastive HTML groups.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "waffle/dom.hpp"
#include "waffle/render.hpp"

namespace waffle {

enum class MutationCategory : std::uint8_t {
    kColor = 0,
    kSize,
    kMargin,
    kFont,
    kDisplay,
    kPosition,
    kHtmlStructure,
};

inline constexpr std::size_t kCategoryCount = 7;
inline constexpr std::array<MutationCategory, kCategoryCount> kAllCategories = {
    MutationCategory::kColor,   MutationCategory::kSize,    MutationCategory::kMargin,
    MutationCategory::kFont,    MutationCategory::kDisplay, MutationCategory::kPosition,
    MutationCategory::kHtmlStructure};

std::string_view to_string(MutationCategory c);
std::optional<MutationCategory> category_from_string(std::string_view name);

using CategoryWeights = std::array<std::uint32_t, kCategoryCount>;

/// Failure counts per category observed on validation data (sum 63).
inline constexpr CategoryWeights kDefaultWeights = {12, 11, 19, 10, 1, 2, 8};

/// Deterministic RNG stream. Wraps mt19937_64 with our own bounded draw so
/// results do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, bound); bound > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

/// splitmix64 finaliser; derives independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

MutationCategory sample_category(const CategoryWeights& weights, Rng& rng);
MutationCategory sample_category(const CategoryWeights& weights, std::uint64_t seed);

/// Keyword pools for the keyword-valued properties, and the property lists
/// each CSS category draws from.
struct MutationPools {
    std::vector<std::string> color_properties{"color", "background-color", "border-color"};
    std::vector<std::string> size_properties{"width", "height"};
    std::vector<std::string> margin_properties{"margin", "margin-top", "margin-right", "margin-bottom",
                                               "margin-left"};
    std::vector<std::string> font_properties{"font-size"};
    std::vector<std::string> text_align{"left", "right", "center", "justify"};
    std::vector<std::string> display{"block", "inline", "inline-block", "flex", "grid", "none"};
    std::vector<std::string> flex_direction{"row", "row-reverse", "column", "column-reverse"};
    std::vector<std::string> justify_content{"flex-start", "flex-end", "center", "space-between",
                                             "space-around"};
    std::vector<std::string> position{"static", "relative", "absolute", "fixed"};
    std::vector<std::string> border_radius{"0", "4px", "8px", "16px", "50%"};
    std::vector<std::string> offsets{"0", "8px", "16px", "32px", "auto"};  // top and right
    int size_max_px = 500;
    int margin_max_px = 100;
    int font_max_px = 40;

    static const MutationPools& defaults();
};

struct Mutation {
    MutationCategory category = MutationCategory::kColor;
    /// "rule:<selector>/<property>", "inline:<node>/<property>" or
    /// "element:<node>:<tag>".
    std::string target;
    std::string old_value;
    std::string new_value;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

struct MutationResult {
    std::string html;
    Mutation mutation;
};

class NoTarget : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic in (source, category, seed). Throws NoTarget when the
/// document has nothing the category can change, DomError when it does not
/// parse.
MutationResult mutate(std::string_view source, MutationCategory category, std::uint64_t seed,
                      const MutationPools& pools = MutationPools::defaults());

enum class MutantStatus { kOk, kRenderFailed, kBlank, kDuplicate };
std::string_view to_string(MutantStatus s);

struct Mutant {
    std::string html;
    std::vector<Mutation> mutations;
    MutantStatus status = MutantStatus::kOk;
    std::string reason;  // set for render failures
    std::optional<RenderResult> render;
};

struct MutantGroup {
    std::string group_id;
    std::string original;
    std::vector<Mutant> mutants;  // every attempt that produced a document
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
    std::optional<RenderResult> original_render;

    std::vector<const Mutant*> survivors() const;
    nlohmann::json to_json() const;
};

struct GroupOptions {
    std::size_t k = 4;
    std::uint64_t seed = 0;
    /// Attempt budget; 0 means 3k.
    std::size_t max_attempts = 0;
    CategoryWeights weights = kDefaultWeights;
    const MutationPools* pools = nullptr;
    Renderer* renderer = nullptr;
    std::string group_id;  // derived from the content when empty
};

/// Draws categories, mutates, optionally renders, and filters render
/// failures, blank pages and duplicates until k mutants survive or the
/// attempt budget runs out.
MutantGroup build_group(std::string_view source, const GroupOptions& options);

std::string content_id(std::string_view bytes);

}  // namespace waffle
