// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <array>
#include <cstdio>

#include "waffle/mutator.hpp"

namespace waffle::testing {
namespace {

constexpr std::array<const char*, 24> kWords = {
    "alpha", "river", "summit", "pixel", "harbor", "orbit",  "cedar",  "lumen",
    "vista", "ember", "quartz", "meadow", "signal", "canyon", "beacon", "willow",
    "atlas", "nova",  "prism", "delta",  "fable",  "gable",  "haven",  "ionic"};

std::string word(Rng& rng) { return kWords[rng.below(kWords.size())]; }

std::string sentence(Rng& rng, int min_words, int max_words) {
    const auto n = rng.between(min_words, max_words);
    std::string s;
    for (std::int64_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += word(rng);
    }
    return s;
}

std::string hex_color(Rng& rng) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%06x", static_cast<unsigned>(rng.below(0x1000000)));
    return buf;
}

struct Gen {
    Rng rng;
    RandomDocOptions opt;
    std::size_t budget;

    std::string attrs() {
        std::string a;
        const auto n = rng.below(3);
        for (std::uint64_t i = 0; i < n; ++i) {
            switch (rng.below(4)) {
                case 0: a += " id=\"n" + std::to_string(rng.below(1000)) + "\""; break;
                case 1: a += " class='" + word(rng) + "'"; break;
                case 2: a += " style=\"color: " + hex_color(rng) + "\""; break;
                default: a += " data-x=" + std::to_string(rng.below(100)); break;
            }
        }
        return a;
    }

    std::string text() {
        --budget;
        switch (rng.below(4)) {
            case 0: return " ";
            case 1: return "\n  ";
            default: return sentence(rng, 1, 3);
        }
    }

    std::string element(int depth) {
        --budget;
        static constexpr std::array<const char*, 10> kTags = {"div", "span", "p",  "ul",      "li",
                                                               "a",   "h2",   "em", "section", "b"};
        const auto roll = rng.below(10);
        if (roll == 0) return "<br" + attrs() + ">";
        if (roll == 1) return "<img" + attrs() + " src=\"x.png\">";
        const std::string tag = kTags[rng.below(kTags.size())];
        std::string s = "<" + tag + attrs() + ">";
        const auto kids = depth > 4 ? 0 : rng.below(4);
        for (std::uint64_t k = 0; k < kids && budget > 0; ++k) s += child(depth + 1);
        if (opt.allow_malformed && rng.below(6) == 0) return s;  // left open
        s += "</" + tag + ">";
        if (opt.allow_malformed && rng.below(8) == 0) s += "</" + std::string(kTags[rng.below(kTags.size())]) + ">";
        return s;
    }

    std::string child(int depth) {
        const auto roll = rng.below(10);
        if (roll < 3) return text();
        if (roll == 3) {
            --budget;
            return "<!-- " + word(rng) + " -->";
        }
        return element(depth);
    }
};

}  // namespace

std::string two_column_snippet() {
    return "<body>\n"
           "  <div id=\"leftCol\">Selections</div>\n"
           "  <div id=\"rightCol\">\n"
           "    <h2>Customer Reviews</h2>\n"
           "  </div>\n"
           "</body>\n";
}

std::string landing_page(std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x1a2d));
    const std::string accent = hex_color(rng);
    std::string s;
    s += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n";
    s += "<title>" + sentence(rng, 1, 2) + "</title>\n";
    s += "<style>\n";
    s += "body { margin: 0; font-family: sans-serif; background-color: #fafafa; }\n";
    s += "header { background-color: " + accent + "; color: #ffffff; padding: 16px; }\n";
    s += ".hero h2 { font-size: " + std::to_string(rng.between(18, 36)) + "px; margin: 12px; }\n";
    s += ".card { width: " + std::to_string(rng.between(120, 300)) + "px; height: 120px; margin: 8px; "
         "display: inline-block; border-radius: 4px; }\n";
    s += "nav a { color: " + hex_color(rng) + "; margin-right: 12px; }\n";
    s += "footer { text-align: center; position: relative; top: 0; }\n";
    s += "</style>\n</head>\n<body>\n";
    s += "<header><h1>" + sentence(rng, 1, 3) + "</h1><nav><a href=\"#\">Home</a> <a href=\"#\">" + word(rng) +
         "</a> <a href=\"#\">Contact</a></nav></header>\n";
    s += "<section class=\"hero\" style=\"margin: 20px; color: #333333\"><h2>" + sentence(rng, 2, 4) + "</h2><p>" +
         sentence(rng, 5, 12) + "</p><img src=\"hero.png\" alt=\"hero\"></section>\n";
    s += "<section class=\"cards\">\n";
    const auto cards = rng.between(2, 4);
    for (std::int64_t i = 0; i < cards; ++i) {
        s += "<div class=\"card\" style=\"background-color: " + hex_color(rng) + "\"><h3>" + word(rng) + "</h3><p>" +
             sentence(rng, 3, 8) + "</p></div>\n";
    }
    s += "</section>\n<ul>";
    const auto items = rng.between(2, 5);
    for (std::int64_t i = 0; i < items; ++i) s += "<li>" + sentence(rng, 1, 4) + "</li>";
    s += "</ul>\n<footer><p>\xC2\xA9 2024 " + word(rng) + " inc</p></footer>\n</body>\n</html>\n";
    return s;
}

std::vector<std::string> landing_corpus(std::size_t count, std::uint64_t seed) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(landing_page(mix_seed(seed, i)));
    return out;
}

std::string random_document(std::uint64_t seed, const RandomDocOptions& options) {
    Gen g{Rng(seed), options, options.max_nodes};
    std::string prefix;
    if (options.with_prefix) {
        switch (g.rng.below(3)) {
            case 0: prefix = "<!DOCTYPE html>\n"; break;
            case 1: prefix = "<!-- generated -->\n  "; break;
            default: break;
        }
    }
    --g.budget;
    std::string body = "<body" + g.attrs() + ">";
    while (g.budget > 1 && g.rng.below(5) != 0) body += g.child(1);
    body += "</body>";
    if (options.with_prefix && g.rng.below(3) == 0) body += "\n";
    return prefix + body;
}

NodeId find_by_id(const DomTree& tree, std::string_view id) {
    for (const DomNode& n : tree.nodes()) {
        const Attribute* a = n.attribute("id");
        if (a && a->value_span && tree.source().substr(a->value_span->begin, a->value_span->size()) == id) return n.id;
    }
    return kNoNode;
}

NodeId find_text(const DomTree& tree, std::string_view text) {
    for (const DomNode& n : tree.nodes()) {
        if (n.is_element()) continue;
        const ByteSpan s = n.own_spans.front();
        if (tree.source().substr(s.begin, s.size()) == text) return n.id;
    }
    return kNoNode;
}

}  // namespace waffle::testing
