// SPDX-License-Identifier: Apache-2.0

#include "waffle/dom.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace waffle {
namespace {

bool is_ascii_alpha(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f';
}

bool is_tag_name_char(char c) {
    return is_ascii_alpha(c) || (c >= '0' && c <= '9') || c == '-' || c == ':' || c == '_';
}

char lower(char c) {
    return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = lower(c);
    return out;
}

bool is_raw_text_element(std::string_view tag) {
    return tag == "script" || tag == "style" || tag == "textarea" || tag == "title" || tag == "xmp";
}

enum class ChunkKind { kText, kComment, kOpenTag, kCloseTag };

struct Chunk {
    ChunkKind kind = ChunkKind::kText;
    ByteSpan span;
    std::string tag;
    std::vector<Attribute> attributes;
    std::size_t tag_name_end = 0;
    bool self_closing = false;
    bool unterminated = false;
};

// Splits the source into markup chunks. Text inside raw-text elements is
// handled by the tree builder, which asks for it explicitly.
class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    bool done() const { return pos_ >= src_.size(); }
    std::size_t pos() const { return pos_; }

    // Raw text up to (not including) the matching `</tag`, or to EOF.
    Chunk raw_text(std::string_view tag) {
        Chunk c;
        c.kind = ChunkKind::kText;
        std::size_t p = pos_;
        while (p < src_.size()) {
            if (src_[p] == '<' && p + 1 < src_.size() && src_[p + 1] == '/' &&
                matches_tag_at(p + 2, tag)) {
                break;
            }
            ++p;
        }
        c.span = {pos_, p};
        pos_ = p;
        return c;
    }

    Chunk next() {
        const std::size_t start = pos_;
        if (starts_markup(start)) return markup(start);
        std::size_t p = start + 1;
        while (p < src_.size() && !starts_markup(p)) ++p;
        pos_ = p;
        Chunk c;
        c.kind = ChunkKind::kText;
        c.span = {start, p};
        return c;
    }

private:
    bool matches_tag_at(std::size_t p, std::string_view tag) const {
        if (p + tag.size() > src_.size()) return false;
        for (std::size_t i = 0; i < tag.size(); ++i) {
            if (lower(src_[p + i]) != tag[i]) return false;
        }
        const std::size_t after = p + tag.size();
        return after == src_.size() || is_space(src_[after]) || src_[after] == '>' ||
               src_[after] == '/';
    }

    bool starts_markup(std::size_t p) const {
        if (src_[p] != '<' || p + 1 >= src_.size()) return false;
        const char n = src_[p + 1];
        if (is_ascii_alpha(n) || n == '!' || n == '?') return true;
        return n == '/' && p + 2 < src_.size() && is_ascii_alpha(src_[p + 2]);
    }

    Chunk markup(std::size_t start) {
        Chunk c;
        const char n = src_[start + 1];
        if (n == '!' || n == '?') {
            c.kind = ChunkKind::kComment;
            std::size_t end;
            if (src_.compare(start, 4, "<!--") == 0) {
                const std::size_t close = src_.find("-->", start + 4);
                end = close == std::string_view::npos ? src_.size() : close + 3;
                c.unterminated = close == std::string_view::npos;
            } else {
                const std::size_t close = src_.find('>', start + 2);
                end = close == std::string_view::npos ? src_.size() : close + 1;
                c.unterminated = close == std::string_view::npos;
            }
            c.span = {start, end};
            pos_ = end;
            return c;
        }
        const bool closing = n == '/';
        std::size_t p = start + (closing ? 2 : 1);
        const std::size_t name_begin = p;
        while (p < src_.size() && is_tag_name_char(src_[p])) ++p;
        c.tag = to_lower(src_.substr(name_begin, p - name_begin));
        c.tag_name_end = p;
        c.kind = closing ? ChunkKind::kCloseTag : ChunkKind::kOpenTag;
        if (closing) {
            const std::size_t close = src_.find('>', p);
            c.unterminated = close == std::string_view::npos;
            pos_ = c.unterminated ? src_.size() : close + 1;
            c.span = {start, pos_};
            return c;
        }
        parse_attributes(p, c);
        c.span = {start, pos_};
        return c;
    }

    void parse_attributes(std::size_t p, Chunk& c) {
        while (true) {
            while (p < src_.size() && is_space(src_[p])) ++p;
            if (p >= src_.size()) {
                c.unterminated = true;
                pos_ = src_.size();
                return;
            }
            if (src_[p] == '>') {
                pos_ = p + 1;
                return;
            }
            if (src_[p] == '/') {
                if (p + 1 < src_.size() && src_[p + 1] == '>') {
                    c.self_closing = true;
                    pos_ = p + 2;
                    return;
                }
                ++p;
                continue;
            }
            Attribute attr;
            const std::size_t name_begin = p;
            while (p < src_.size() && !is_space(src_[p]) && src_[p] != '>' && src_[p] != '=' &&
                   !(src_[p] == '/' && p + 1 < src_.size() && src_[p + 1] == '>')) {
                ++p;
            }
            if (p == name_begin) ++p;  // lone '=' and the like
            attr.name = to_lower(src_.substr(name_begin, p - name_begin));
            std::size_t q = p;
            while (q < src_.size() && is_space(src_[q])) ++q;
            if (q < src_.size() && src_[q] == '=') {
                ++q;
                while (q < src_.size() && is_space(src_[q])) ++q;
                if (q < src_.size() && (src_[q] == '"' || src_[q] == '\'')) {
                    attr.quote = src_[q];
                    const std::size_t close = src_.find(attr.quote, q + 1);
                    const std::size_t vend = close == std::string_view::npos ? src_.size() : close;
                    attr.value_span = ByteSpan{q + 1, vend};
                    p = close == std::string_view::npos ? src_.size() : close + 1;
                } else {
                    const std::size_t vbegin = q;
                    while (q < src_.size() && !is_space(src_[q]) && src_[q] != '>') ++q;
                    attr.value_span = ByteSpan{vbegin, q};
                    p = q;
                }
            }
            attr.span = {name_begin, p};
            c.attributes.push_back(std::move(attr));
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

}  // namespace

const Attribute* DomNode::attribute(std::string_view name) const {
    for (const auto& a : attributes) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

bool is_void_element(std::string_view tag) {
    static constexpr std::array<std::string_view, 14> kVoid = {
        "area", "base", "br", "col", "embed", "hr", "img",
        "input", "link", "meta", "param", "source", "track", "wbr"};
    return std::find(kVoid.begin(), kVoid.end(), tag) != kVoid.end();
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > text.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(text[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong forms, surrogates, out of range.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
            cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += len;
    }
    return true;
}

DomTree parse_html(std::string source) {
    if (!is_valid_utf8(source)) {
        throw DomError(DomErrc::kEncoding, "source is not valid UTF-8");
    }
    DomTree tree;
    tree.source_ = std::move(source);
    const std::string_view src = tree.source_;
    auto& nodes = tree.nodes_;

    std::vector<NodeId> stack;
    bool root_closed = false;
    Lexer lexer(src);

    auto add_node = [&](DomNode n) -> NodeId {
        n.id = static_cast<NodeId>(nodes.size());
        if (!stack.empty()) {
            n.parent = stack.back();
            auto& parent = nodes[static_cast<std::size_t>(n.parent)];
            n.sibling_index = parent.children.size();
            parent.children.push_back(n.id);
        }
        nodes.push_back(std::move(n));
        return nodes.back().id;
    };
    auto add_text = [&](ByteSpan span, TextFlavor flavor) {
        DomNode n;
        n.kind = NodeKind::kText;
        n.flavor = flavor;
        n.open_span = span;
        n.own_spans = {span};
        add_node(std::move(n));
    };

    while (!lexer.done()) {
        if (root_closed) {
            tree.suffix_ = {lexer.pos(), src.size()};
            // Anything but whitespace and comments after the root was dropped
            // from the tree.
            while (!lexer.done()) {
                const Chunk c = lexer.next();
                const bool blank =
                    c.kind == ChunkKind::kComment ||
                    (c.kind == ChunkKind::kText &&
                     std::all_of(src.begin() + static_cast<std::ptrdiff_t>(c.span.begin),
                                 src.begin() + static_cast<std::ptrdiff_t>(c.span.end), is_space));
                if (!blank) {
                    ++tree.repairs_;
                    break;
                }
            }
            break;
        }
        if (!stack.empty()) {
            const auto& top = nodes[static_cast<std::size_t>(stack.back())];
            if (is_raw_text_element(top.tag)) {
                const Chunk c = lexer.raw_text(top.tag);
                if (!c.span.empty()) add_text(c.span, TextFlavor::kCharacters);
                if (lexer.done()) break;
            }
        }
        Chunk c = lexer.next();
        if (c.unterminated) ++tree.repairs_;
        if (tree.root_ == kNoNode) {
            if (c.kind != ChunkKind::kOpenTag) continue;
            tree.prefix_ = {0, c.span.begin};
        }
        switch (c.kind) {
            case ChunkKind::kText:
                add_text(c.span, TextFlavor::kCharacters);
                break;
            case ChunkKind::kComment:
                add_text(c.span, TextFlavor::kComment);
                break;
            case ChunkKind::kOpenTag: {
                DomNode n;
                n.kind = NodeKind::kElement;
                n.tag = std::move(c.tag);
                n.open_span = c.span;
                n.own_spans = {c.span};
                n.attributes = std::move(c.attributes);
                n.tag_name_end = c.tag_name_end;
                n.self_closing = c.self_closing;
                const bool leaf = c.self_closing || is_void_element(n.tag);
                const NodeId id = add_node(std::move(n));
                if (tree.root_ == kNoNode) tree.root_ = id;
                if (!leaf) {
                    stack.push_back(id);
                } else if (id == tree.root_) {
                    root_closed = true;
                }
                break;
            }
            case ChunkKind::kCloseTag: {
                auto it = std::find_if(stack.rbegin(), stack.rend(), [&](NodeId id) {
                    return nodes[static_cast<std::size_t>(id)].tag == c.tag;
                });
                if (it == stack.rend()) {
                    ++tree.repairs_;
                    add_text(c.span, TextFlavor::kStrayTag);
                    break;
                }
                const auto keep = static_cast<std::size_t>(stack.rend() - it) - 1;
                while (stack.size() > keep + 1) {
                    nodes[static_cast<std::size_t>(stack.back())].auto_closed = true;
                    ++tree.repairs_;
                    stack.pop_back();
                }
                auto& closed = nodes[static_cast<std::size_t>(stack.back())];
                closed.close_span = c.span;
                closed.own_spans.push_back(c.span);
                stack.pop_back();
                if (closed.id == tree.root_) root_closed = true;
                break;
            }
        }
    }
    for (NodeId id : stack) {
        nodes[static_cast<std::size_t>(id)].auto_closed = true;
        ++tree.repairs_;
    }
    if (tree.root_ == kNoNode) {
        throw DomError(DomErrc::kEmptyDocument, "document contains no element");
    }
    if (!root_closed || tree.suffix_.empty()) {
        tree.suffix_ = {src.size(), src.size()};
    }

    // Subtree extents, children before parents.
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        DomNode& n = *it;
        n.extent = n.open_span;
        if (n.close_span) {
            n.extent.end = n.close_span->end;
        } else if (!n.children.empty()) {
            n.extent.end = nodes[static_cast<std::size_t>(n.children.back())].extent.end;
        }
    }

    // Ownership runs: prefix, node spans, suffix.
    std::vector<DomTree::Run> runs;
    if (!tree.prefix_.empty()) runs.push_back({tree.prefix_, kNoNode});
    for (const auto& n : nodes) {
        for (const auto& s : n.own_spans) runs.push_back({s, n.id});
    }
    if (!tree.suffix_.empty()) runs.push_back({tree.suffix_, kNoNode});
    std::sort(runs.begin(), runs.end(),
              [](const DomTree::Run& a, const DomTree::Run& b) { return a.span.begin < b.span.begin; });
    tree.runs_ = std::move(runs);
    return tree;
}

NodeId DomTree::owner_of(std::size_t pos) const {
    auto it = std::upper_bound(runs_.begin(), runs_.end(), pos,
                               [](std::size_t p, const Run& r) { return p < r.span.begin; });
    if (it == runs_.begin()) return kNoNode;
    --it;
    return it->span.contains(pos) ? it->owner : kNoNode;
}

std::size_t DomTree::run_end(std::size_t pos) const {
    auto it = std::upper_bound(runs_.begin(), runs_.end(), pos,
                               [](std::size_t p, const Run& r) { return p < r.span.begin; });
    if (it == runs_.begin()) return pos;
    --it;
    // An empty element's open and close tags abut.
    std::size_t end = it->span.end;
    for (auto next = it + 1; next != runs_.end() && next->owner == it->owner && next->span.begin == end;
         ++next) {
        end = next->span.end;
    }
    return end;
}

bool DomTree::is_ancestor(NodeId ancestor, NodeId node) const {
    if (node == kNoNode) return false;
    for (NodeId p = this->node(node).parent; p != kNoNode; p = this->node(p).parent) {
        if (p == ancestor) return true;
    }
    return false;
}

std::size_t DomTree::element_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const DomNode& n) { return n.is_element(); }));
}

std::string DomTree::serialize() const {
    std::string out;
    out.reserve(source_.size());
    for (const auto& r : runs_) out.append(source_, r.span.begin, r.span.size());
    return out;
}

nlohmann::json DomTree::to_json() const {
    using nlohmann::json;
    auto span_json = [](ByteSpan s) { return json::array({s.begin, s.end}); };
    json out;
    json arr = json::array();
    for (const auto& n : nodes_) {
        json j;
        j["id"] = n.id;
        j["kind"] = n.is_element() ? "element" : "text";
        j["tag"] = n.is_element() ? json(n.tag) : json(nullptr);
        json spans = json::array();
        for (const auto& s : n.own_spans) spans.push_back(span_json(s));
        j["own_spans"] = std::move(spans);
        j["parent"] = n.parent == kNoNode ? json(nullptr) : json(n.parent);
        j["children"] = n.children;
        arr.push_back(std::move(j));
    }
    out["nodes"] = std::move(arr);
    out["root"] = root_;
    out["prefix_span"] = span_json(prefix_);
    out["suffix_span"] = span_json(suffix_);
    return out;
}

std::string strip_presentation(const DomTree& tree) {
    const std::string& src = tree.source();
    std::string out(src, tree.prefix_span().begin, tree.prefix_span().size());

    // Iterative pre/post-order walk.
    struct Frame {
        NodeId id;
        std::size_t next_child;
    };
    std::vector<Frame> stack{{tree.root(), 0}};
    bool entering = true;
    while (!stack.empty()) {
        Frame& f = stack.back();
        const DomNode& n = tree.node(f.id);
        if (entering && f.next_child == 0) {
            if (!n.is_element()) {
                out.append(src, n.open_span.begin, n.open_span.size());
                stack.pop_back();
                entering = false;
                continue;
            }
            if (n.tag == "style") {
                stack.pop_back();
                entering = false;
                continue;
            }
            out += '<';
            out += n.tag;
            out += n.self_closing ? "/>" : ">";
        }
        if (f.next_child < n.children.size()) {
            const NodeId child = n.children[f.next_child++];
            stack.push_back({child, 0});
            entering = true;
            continue;
        }
        if (n.close_span) {
            out += "</";
            out += n.tag;
            out += '>';
        }
        stack.pop_back();
        entering = false;
    }
    out.append(src, tree.suffix_span().begin, tree.suffix_span().size());
    return out;
}

}  // namespace waffle
