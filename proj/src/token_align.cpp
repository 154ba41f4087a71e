// SPDX-License-Identifier: Apache-2.0

#include "waffle/token_align.hpp"

#include <algorithm>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace waffle {
namespace {

enum class CharClass { kIdent, kDigit, kSpace, kPunct };

CharClass classify(unsigned char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80) {
        return CharClass::kIdent;
    }
    if (c >= '0' && c <= '9') return CharClass::kDigit;
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
        return CharClass::kSpace;
    }
    return CharClass::kPunct;
}

}  // namespace

TokenAlignment align(const DomTree& tree, std::span<const ByteSpan> token_spans, std::size_t n_prompt) {
    const std::size_t n_bytes = tree.source().size();
    TokenAlignment out;
    out.n_prompt = n_prompt;
    out.source_size = n_bytes;
    out.tokens.reserve(token_spans.size());
    out.node_of.reserve(token_spans.size());

    std::size_t expected = 0;
    for (std::size_t i = 0; i < token_spans.size(); ++i) {
        const ByteSpan s = token_spans[i];
        if (s.end > n_bytes) {
            throw CoverageError("token " + std::to_string(i) + " ends past the source (" +
                                std::to_string(s.end) + " > " + std::to_string(n_bytes) + ")");
        }
        if (s.begin < expected) {
            throw CoverageError("token " + std::to_string(i) + " overlaps its predecessor");
        }
        if (s.begin > expected) {
            throw CoverageError("gap before token " + std::to_string(i) + " at byte " +
                                std::to_string(expected));
        }
        if (s.empty()) throw CoverageError("token " + std::to_string(i) + " is empty");
        expected = s.end;

        const NodeId owner = tree.owner_of(s.begin);
        out.tokens.push_back({static_cast<std::int64_t>(i), s});
        out.node_of.push_back(owner == kNoNode ? kPrefixNode : owner);
        if (tree.run_end(s.begin) < s.end) out.straddling.push_back(i);
    }
    if (expected != n_bytes) {
        throw CoverageError("tokens stop at byte " + std::to_string(expected) + " of " +
                            std::to_string(n_bytes));
    }
    return out;
}

std::vector<ByteSpan> reference_tokenize(std::string_view source) {
    std::vector<ByteSpan> out;
    std::size_t i = 0;
    while (i < source.size()) {
        const CharClass cls = classify(static_cast<unsigned char>(source[i]));
        std::size_t j = i + 1;
        if (cls != CharClass::kPunct) {
            while (j < source.size() && classify(static_cast<unsigned char>(source[j])) == cls) ++j;
        }
        out.push_back({i, j});
        i = j;
    }
    return out;
}

std::vector<ByteSpan> read_token_spans_jsonl(std::istream& in) {
    std::map<std::int64_t, ByteSpan> by_index;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
            const auto idx = j.at("i").get<std::int64_t>();
            const auto start = j.at("start").get<std::int64_t>();
            const auto end = j.at("end").get<std::int64_t>();
            if (start < 0 || end < start) {
                throw CoverageError("token file line " + std::to_string(line_no) + ": bad byte range");
            }
            const ByteSpan span{static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
            if (!by_index.emplace(idx, span).second) {
                throw CoverageError("duplicate token index " + std::to_string(idx));
            }
        } catch (const nlohmann::json::exception& e) {
            throw CoverageError("token file line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::vector<ByteSpan> out;
    out.reserve(by_index.size());
    for (const auto& [idx, span] : by_index) out.push_back(span);
    return out;
}

}  // namespace waffle
