// SPDX-License-Identifier: Apache-2.0
//
// Error-tolerant HTML parsing into a byte-exact DOM tree.
//
// Every byte of the source is owned by exactly one place: the prefix (bytes
// before the root element), the suffix (bytes after the root element ends),
// or the own_spans of a single node. Elements own their opening and closing
// tags; text nodes own their characters.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace waffle {

/// Half-open byte range [begin, end).
struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return end == begin; }
    bool contains(std::size_t pos) const { return pos >= begin && pos < end; }
    friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

enum class NodeKind { kElement, kText };

// Text-kind nodes also carry markup that creates no structure.
enum class TextFlavor { kCharacters, kComment, kStrayTag };

struct Attribute {
    std::string name;  // lowercase
    ByteSpan span;     // whole attribute, name through closing quote
    std::optional<ByteSpan> value_span;  // excludes quotes
    char quote = 0;    // '"', '\'' or 0 when unquoted / absent
};

struct DomNode {
    NodeId id = kNoNode;
    NodeKind kind = NodeKind::kText;
    TextFlavor flavor = TextFlavor::kCharacters;
    std::string tag;  // lowercase, elements only
    ByteSpan open_span;
    std::optional<ByteSpan> close_span;
    std::vector<ByteSpan> own_spans;
    NodeId parent = kNoNode;
    std::vector<NodeId> children;
    std::size_t sibling_index = 0;

    std::vector<Attribute> attributes;
    std::size_t tag_name_end = 0;  // byte offset just past the tag name
    bool self_closing = false;     // written as <x/>
    bool auto_closed = false;      // missing close tag repaired by the parser
    ByteSpan extent;               // the whole subtree

    bool is_element() const { return kind == NodeKind::kElement; }
    const Attribute* attribute(std::string_view name) const;
};

enum class DomErrc { kEmptyDocument, kEncoding };

class DomError : public std::runtime_error {
public:
    DomError(DomErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    DomErrc code() const { return code_; }

private:
    DomErrc code_;
};

class DomTree {
public:
    const std::string& source() const { return source_; }
    const std::vector<DomNode>& nodes() const { return nodes_; }
    const DomNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    std::size_t size() const { return nodes_.size(); }
    NodeId root() const { return root_; }
    ByteSpan prefix_span() const { return prefix_; }
    ByteSpan suffix_span() const { return suffix_; }

    /// Number of error-recovery actions taken (auto-closes, stray close
    /// tags, content after the root, unterminated tags).
    std::size_t repair_count() const { return repairs_; }

    /// Node owning the byte at `pos`, or kNoNode for prefix/suffix bytes.
    NodeId owner_of(std::size_t pos) const;

    /// End of the ownership run containing `pos`: every byte in
    /// [pos, run_end(pos)) has the same owner.
    std::size_t run_end(std::size_t pos) const;

    bool is_ancestor(NodeId ancestor, NodeId node) const;
    std::size_t element_count() const;

    /// Re-emits the tree from its spans; equals source() for any parse.
    std::string serialize() const;

    nlohmann::json to_json() const;

private:
    friend DomTree parse_html(std::string source);

    struct Run {
        ByteSpan span;
        NodeId owner;
    };

    std::string source_;
    std::vector<DomNode> nodes_;
    NodeId root_ = kNoNode;
    ByteSpan prefix_;
    ByteSpan suffix_;
    std::size_t repairs_ = 0;
    std::vector<Run> runs_;  // sorted, exact cover of the source
};

bool is_void_element(std::string_view tag);
bool is_valid_utf8(std::string_view text);

/// Throws DomError{kEncoding} for invalid UTF-8 and DomError{kEmptyDocument}
/// when the source contains no element.
DomTree parse_html(std::string source);

/// Serialization with every <style> element and every attribute removed.
std::string strip_presentation(const DomTree& tree);

}  // namespace waffle
