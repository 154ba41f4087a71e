// SPDX-License-Identifier: Apache-2.0
//
// Alignment of a tokenization of the HTML byte stream onto DOM nodes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "waffle/dom.hpp"

namespace waffle {

/// node_of value for tokens that start in the prefix or suffix region.
inline constexpr NodeId kPrefixNode = -2;

struct TokenSpan {
    std::int64_t token_id = 0;
    ByteSpan span;
};

struct TokenAlignment {
    std::vector<TokenSpan> tokens;
    std::vector<NodeId> node_of;
    std::vector<std::size_t> straddling;  // sorted token indices
    std::size_t n_prompt = 0;
    std::size_t source_size = 0;

    std::size_t size() const { return tokens.size(); }
    /// Token count including the prompt region.
    std::size_t sequence_length() const { return n_prompt + tokens.size(); }
};

class CoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Each token is assigned to the node owning its first byte. Spans must be
/// sorted, non-empty, disjoint and cover [0, source size) exactly.
TokenAlignment align(const DomTree& tree, std::span<const ByteSpan> token_spans, std::size_t n_prompt);

/// Maximal runs of identifier characters (letters, '_', non-ASCII bytes),
/// digits or whitespace; every other byte is its own token.
std::vector<ByteSpan> reference_tokenize(std::string_view source);

/// Reads `{"i": index, "start": byte, "end": byte}` lines, ordered by "i".
std::vector<ByteSpan> read_token_spans_jsonl(std::istream& in);

}  // namespace waffle
