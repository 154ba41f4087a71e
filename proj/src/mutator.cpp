// SPDX-License-Identifier: Apache-2.0

#include "waffle/mutator.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace waffle {
namespace {

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "Color", "Size", "Margin", "Font", "Display", "Position", "HtmlStructure"};

// Duplicating these breaks rendering.
bool structurally_protected(std::string_view tag) {
    return tag == "head" || tag == "header" || tag == "html" || tag == "body";
}

// Elements that never produce a visible box.
bool non_rendering(std::string_view tag) {
    return tag == "head" || tag == "title" || tag == "meta" || tag == "link" || tag == "script" ||
           tag == "style" || tag == "base" || tag == "template" || tag == "noscript";
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

ByteSpan trim(std::string_view src, ByteSpan s) {
    while (s.begin < s.end && is_space(src[s.begin])) ++s.begin;
    while (s.end > s.begin && is_space(src[s.end - 1])) --s.end;
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string_view view(std::string_view src, ByteSpan s) { return src.substr(s.begin, s.size()); }

struct CssDecl {
    std::string property;
    ByteSpan value;
    std::string target;  // mutation target locator
};

// Splits CSS text inside `region` into declarations. `inline_node` is set
// for style attributes, which are a bare declaration list.
class CssScanner {
public:
    CssScanner(std::string_view src, std::vector<CssDecl>& out) : src_(src), out_(out) {}

    void scan(ByteSpan region, NodeId inline_node) {
        inline_node_ = inline_node;
        preludes_.clear();
        int depth = inline_node == kNoNode ? 0 : 1;
        std::size_t seg = region.begin;
        std::size_t p = region.begin;
        while (p < region.end) {
            const char c = src_[p];
            if (c == '/' && p + 1 < region.end && src_[p + 1] == '*') {
                const auto close = src_.find("*/", p + 2);
                p = close == std::string_view::npos || close + 2 > region.end ? region.end : close + 2;
                continue;
            }
            if (c == '"' || c == '\'') {
                const auto close = src_.find(c, p + 1);
                p = close == std::string_view::npos || close >= region.end ? region.end : close + 1;
                continue;
            }
            if (c == '{') {
                preludes_.emplace_back(trim_text({seg, p}));
                ++depth;
                seg = p + 1;
            } else if (c == ';') {
                if (depth > 0) emit({seg, p});
                seg = p + 1;
            } else if (c == '}') {
                if (depth > 0) {
                    emit({seg, p});
                    --depth;
                    if (!preludes_.empty()) preludes_.pop_back();
                }
                seg = p + 1;
            }
            ++p;
        }
        if (depth > 0) emit({seg, region.end});
    }

private:
    std::string trim_text(ByteSpan s) const { return std::string(view(src_, trim(src_, s))); }

    void emit(ByteSpan seg) {
        const auto colon = src_.substr(seg.begin, seg.size()).find(':');
        if (colon == std::string_view::npos) return;
        const ByteSpan name = trim(src_, {seg.begin, seg.begin + colon});
        if (name.empty()) return;
        const std::string property = lower(view(src_, name));
        if (!std::all_of(property.begin(), property.end(), [](char c) { return (c >= 'a' && c <= 'z') || c == '-'; })) {
            return;
        }
        ByteSpan value = trim(src_, {seg.begin + colon + 1, seg.end});
        const std::string v = lower(view(src_, value));
        const auto bang = v.rfind('!');
        if (bang != std::string::npos && view(v, trim(v, {bang + 1, v.size()})) == "important") {
            value = trim(src_, {value.begin, value.begin + bang});
        }
        if (value.empty()) return;
        CssDecl d;
        d.property = property;
        d.value = value;
        d.target = inline_node_ == kNoNode
                       ? "rule:" + (preludes_.empty() ? std::string() : preludes_.back()) + "/" + property
                       : "inline:" + std::to_string(inline_node_) + "/" + property;
        out_.push_back(std::move(d));
    }

    std::string_view src_;
    std::vector<CssDecl>& out_;
    std::vector<std::string> preludes_;
    NodeId inline_node_ = kNoNode;
};

bool inside_head(const DomTree& tree, NodeId id) {
    for (NodeId p = tree.node(id).parent; p != kNoNode; p = tree.node(p).parent) {
        if (tree.node(p).tag == "head") return true;
    }
    return false;
}

std::vector<CssDecl> collect_declarations(const DomTree& tree) {
    std::vector<CssDecl> out;
    CssScanner scanner(tree.source(), out);
    for (const DomNode& n : tree.nodes()) {
        if (!n.is_element()) continue;
        if (n.tag == "style") {
            for (NodeId c : n.children) {
                const DomNode& child = tree.node(c);
                if (!child.is_element() && child.flavor == TextFlavor::kCharacters) {
                    scanner.scan(child.open_span, kNoNode);
                }
            }
        }
        if (const Attribute* style = n.attribute("style"); style && style->value_span) {
            scanner.scan(*style->value_span, n.id);
        }
    }
    return out;
}

bool subtree_is_clean(const DomTree& tree, const DomNode& n) {
    // Re-inserting an element whose end tag was repaired would change how
    // the copy nests.
    for (NodeId id = n.id; id < static_cast<NodeId>(tree.size()); ++id) {
        const DomNode& d = tree.node(id);
        if (d.open_span.begin >= n.extent.end) break;
        if (d.is_element() && d.auto_closed) return false;
        if (!d.is_element() && d.flavor == TextFlavor::kStrayTag) return false;
    }
    return true;
}

std::string splice(std::string_view src, ByteSpan replace, std::string_view with) {
    std::string out;
    out.reserve(src.size() + with.size());
    out.append(src.substr(0, replace.begin));
    out.append(with);
    out.append(src.substr(replace.end));
    return out;
}

const std::vector<std::string>& property_pool(MutationCategory c, const MutationPools& pools) {
    static const std::vector<std::string> kDisplayProps{"text-align", "display", "flex-direction",
                                                        "justify-content"};
    static const std::vector<std::string> kPositionProps{"border-radius", "position", "top", "right"};
    switch (c) {
        case MutationCategory::kColor: return pools.color_properties;
        case MutationCategory::kSize: return pools.size_properties;
        case MutationCategory::kMargin: return pools.margin_properties;
        case MutationCategory::kFont: return pools.font_properties;
        case MutationCategory::kDisplay: return kDisplayProps;
        case MutationCategory::kPosition: return kPositionProps;
        case MutationCategory::kHtmlStructure: break;
    }
    throw std::logic_error("no property pool for HtmlStructure");
}

std::string pixels(std::int64_t v) { return std::to_string(v) + "px"; }

std::string draw_value(MutationCategory c, const std::string& property, const MutationPools& pools, Rng& rng) {
    auto pick = [&](const std::vector<std::string>& pool) { return pool.at(rng.below(pool.size())); };
    switch (c) {
        case MutationCategory::kColor: {
            char buf[8];
            std::snprintf(buf, sizeof buf, "#%06x", static_cast<unsigned>(rng.below(0x1000000)));
            return buf;
        }
        case MutationCategory::kSize: return pixels(rng.between(0, pools.size_max_px));
        case MutationCategory::kMargin: return pixels(rng.between(0, pools.margin_max_px));
        case MutationCategory::kFont: return pixels(rng.between(0, pools.font_max_px));
        case MutationCategory::kDisplay:
            if (property == "text-align") return pick(pools.text_align);
            if (property == "display") return pick(pools.display);
            if (property == "flex-direction") return pick(pools.flex_direction);
            return pick(pools.justify_content);
        case MutationCategory::kPosition:
            if (property == "border-radius") return pick(pools.border_radius);
            if (property == "position") return pick(pools.position);
            return pick(pools.offsets);
        case MutationCategory::kHtmlStructure: break;
    }
    throw std::logic_error("no value generator for HtmlStructure");
}

MutationResult duplicate_element(const DomTree& tree, std::uint64_t seed, Rng& rng) {
    std::vector<NodeId> eligible;
    for (const DomNode& n : tree.nodes()) {
        if (!n.is_element() || structurally_protected(n.tag) || non_rendering(n.tag)) continue;
        if (inside_head(tree, n.id) || !subtree_is_clean(tree, n)) continue;
        eligible.push_back(n.id);
    }
    if (eligible.empty()) throw NoTarget("no element eligible for duplication");
    const DomNode& n = tree.node(eligible[rng.below(eligible.size())]);
    const std::string_view src = tree.source();
    const std::string_view copy = view(src, n.extent);
    MutationResult r;
    r.html = splice(src, {n.extent.end, n.extent.end}, copy);
    r.mutation.category = MutationCategory::kHtmlStructure;
    r.mutation.target = "element:" + std::to_string(n.id) + ":" + n.tag;
    r.mutation.old_value = std::string(copy);
    r.mutation.new_value = std::string(copy) + std::string(copy);
    r.mutation.seed = seed;
    return r;
}

MutationResult inject_declaration(const DomTree& tree, MutationCategory category, const std::string& property,
                                  const std::string& value, std::uint64_t seed, Rng& rng) {
    std::vector<NodeId> eligible;
    for (const DomNode& n : tree.nodes()) {
        if (!n.is_element() || n.tag == "html" || n.tag == "br" || n.tag == "wbr" || non_rendering(n.tag)) {
            continue;
        }
        if (inside_head(tree, n.id)) continue;
        eligible.push_back(n.id);
    }
    if (eligible.empty()) throw NoTarget("no element can carry an inline style");
    const DomNode& n = tree.node(eligible[rng.below(eligible.size())]);
    const std::string_view src = tree.source();
    const std::string decl = property + ": " + value;

    MutationResult r;
    if (const Attribute* style = n.attribute("style")) {
        std::string content = style->value_span ? std::string(view(src, trim(src, *style->value_span))) : "";
        if (!content.empty()) content += content.back() == ';' ? " " : "; ";
        content += decl;
        if (style->value_span && style->quote != 0) {
            r.html = splice(src, *style->value_span, content);
        } else {
            r.html = splice(src, style->span, "style=\"" + content + "\"");
        }
    } else {
        r.html = splice(src, {n.tag_name_end, n.tag_name_end}, " style=\"" + decl + "\"");
    }
    r.mutation.category = category;
    r.mutation.target = "inline:" + std::to_string(n.id) + "/" + property;
    r.mutation.new_value = value;
    r.mutation.seed = seed;
    return r;
}

}  // namespace

std::string_view to_string(MutationCategory c) {
    return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<MutationCategory> category_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        if (lower(kCategoryNames[i]) == lower(name)) return kAllCategories[i];
    }
    if (lower(name) == "html") return MutationCategory::kHtmlStructure;
    return std::nullopt;
}

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: zero bound");
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    while (true) {
        const std::uint64_t x = engine_();
        if (x >= threshold) return x % bound;
    }
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

MutationCategory sample_category(const CategoryWeights& weights, Rng& rng) {
    const std::uint64_t total = std::accumulate(weights.begin(), weights.end(), std::uint64_t{0});
    if (total == 0) throw std::invalid_argument("category weights sum to zero");
    std::uint64_t r = rng.below(total);
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        if (r < weights[i]) return kAllCategories[i];
        r -= weights[i];
    }
    return kAllCategories.back();
}

MutationCategory sample_category(const CategoryWeights& weights, std::uint64_t seed) {
    Rng rng(seed);
    return sample_category(weights, rng);
}

const MutationPools& MutationPools::defaults() {
    static const MutationPools pools;
    return pools;
}

nlohmann::json Mutation::to_json() const {
    return {{"category", std::string(to_string(category))},
            {"target", target},
            {"old", old_value},
            {"new", new_value},
            {"seed", seed}};
}

MutationResult mutate(std::string_view source, MutationCategory category, std::uint64_t seed,
                      const MutationPools& pools) {
    const DomTree tree = parse_html(std::string(source));
    Rng rng(seed);
    if (category == MutationCategory::kHtmlStructure) return duplicate_element(tree, seed, rng);

    const auto& props = property_pool(category, pools);
    const std::string property = props.at(rng.below(props.size()));
    std::string value = draw_value(category, property, pools, rng);

    std::vector<CssDecl> matches;
    for (auto& d : collect_declarations(tree)) {
        if (d.property == property) matches.push_back(std::move(d));
    }
    if (matches.empty()) return inject_declaration(tree, category, property, value, seed, rng);

    const CssDecl& d = matches[rng.below(matches.size())];
    const std::string old_value(view(tree.source(), d.value));
    for (int tries = 0; lower(value) == lower(old_value); ++tries) {
        if (tries == 64) throw NoTarget("cannot draw a value different from '" + old_value + "'");
        value = draw_value(category, property, pools, rng);
    }
    MutationResult r;
    r.html = splice(tree.source(), d.value, value);
    r.mutation.category = category;
    r.mutation.target = d.target;
    r.mutation.old_value = old_value;
    r.mutation.new_value = value;
    r.mutation.seed = seed;
    return r;
}

std::string_view to_string(MutantStatus s) {
    switch (s) {
        case MutantStatus::kOk: return "ok";
        case MutantStatus::kRenderFailed: return "render_failed";
        case MutantStatus::kBlank: return "blank";
        case MutantStatus::kDuplicate: return "duplicate";
    }
    return "?";
}

std::vector<const Mutant*> MutantGroup::survivors() const {
    std::vector<const Mutant*> out;
    for (const auto& m : mutants) {
        if (m.status == MutantStatus::kOk) out.push_back(&m);
    }
    return out;
}

nlohmann::json MutantGroup::to_json() const {
    nlohmann::json mj = nlohmann::json::array();
    for (const auto& m : mutants) {
        nlohmann::json muts = nlohmann::json::array();
        for (const auto& mu : m.mutations) muts.push_back(mu.to_json());
        nlohmann::json entry{{"html", m.html}, {"mutations", std::move(muts)}, {"status", std::string(to_string(m.status))}};
        if (!m.reason.empty()) entry["reason"] = m.reason;
        mj.push_back(std::move(entry));
    }
    return {{"group_id", group_id}, {"original", original}, {"mutants", std::move(mj)},
            {"seed", seed},         {"warnings", warnings}};
}

std::string content_id(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

MutantGroup build_group(std::string_view source, const GroupOptions& options) {
    const MutationPools& pools = options.pools ? *options.pools : MutationPools::defaults();
    const std::size_t budget = options.max_attempts ? options.max_attempts : 3 * options.k;

    MutantGroup group;
    group.original = std::string(source);
    group.seed = options.seed;
    group.group_id = options.group_id.empty() ? content_id(source) : options.group_id;
    parse_html(std::string(source));  // reject unparseable input up front

    if (options.renderer) {
        group.original_render = options.renderer->render(source);
        if (group.original_render->status != RenderStatus::kOk) {
            group.warnings.push_back("original " + std::string(to_string(group.original_render->status)) +
                                     (group.original_render->reason.empty() ? "" : ": " + group.original_render->reason));
            return group;
        }
    }

    std::unordered_set<std::string> seen{group.original};
    std::size_t survivors = 0;
    std::size_t attempt = 0;
    std::size_t no_target = 0;
    while (survivors < options.k && attempt < budget) {
        // One round: enough fresh candidates to fill the group.
        // Attempt order is kept; duplicates are recorded but not rendered.
        std::vector<Mutant> candidates;
        std::size_t fresh = 0;
        while (fresh < options.k - survivors && attempt < budget) {
            const std::uint64_t attempt_seed = mix_seed(options.seed, attempt++);
            const MutationCategory category = sample_category(options.weights, mix_seed(attempt_seed, 1));
            try {
                MutationResult r = mutate(source, category, mix_seed(attempt_seed, 2), pools);
                Mutant m;
                m.html = std::move(r.html);
                m.mutations.push_back(std::move(r.mutation));
                if (!seen.insert(m.html).second) {
                    m.status = MutantStatus::kDuplicate;
                } else {
                    ++fresh;
                }
                candidates.push_back(std::move(m));
            } catch (const NoTarget&) {
                ++no_target;
            }
        }
        if (options.renderer && fresh > 0) {
            std::vector<std::string> docs;
            std::vector<std::size_t> index;
            for (std::size_t i = 0; i < candidates.size(); ++i) {
                if (candidates[i].status != MutantStatus::kOk) continue;
                docs.push_back(candidates[i].html);
                index.push_back(i);
            }
            auto results = options.renderer->render_batch(docs);
            for (std::size_t r = 0; r < index.size(); ++r) {
                Mutant& m = candidates[index[r]];
                RenderResult& rr = results.at(r);
                if (rr.status == RenderStatus::kFailed) {
                    m.status = MutantStatus::kRenderFailed;
                    m.reason = rr.reason;
                } else if (rr.status == RenderStatus::kBlank) {
                    m.status = MutantStatus::kBlank;
                }
                m.render = std::move(rr);
            }
        }
        for (auto& m : candidates) {
            if (m.status == MutantStatus::kOk) ++survivors;
            group.mutants.push_back(std::move(m));
        }
    }
    if (no_target > 0) {
        group.warnings.push_back(std::to_string(no_target) + " attempt(s) found no mutation target");
    }
    if (survivors < options.k) {
        group.warnings.push_back("only " + std::to_string(survivors) + " of " + std::to_string(options.k) +
                                 " mutants survived");
    }
    return group;
}

}  // namespace waffle
