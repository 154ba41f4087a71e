// SPDX-License-Identifier: Apache-2.0
//
// Documents shared by the unit tests and the acceptance suite.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "waffle/dom.hpp"

namespace waffle::testing {

/// The two-column snippet: body with div#leftCol ("Selections") and
/// div#rightCol holding an h2 ("Customer Reviews").
std::string two_column_snippet();

/// A page in the style of synthetic landing-page datasets: a <style> block,
/// inline styles, header/nav/sections/lists/images/footer.
std::string landing_page(std::uint64_t seed);

/// `count` landing pages with distinct seeds.
std::vector<std::string> landing_corpus(std::size_t count, std::uint64_t seed = 1);

struct RandomDocOptions {
    std::size_t max_nodes = 30;  // element + text nodes
    bool allow_malformed = false;  // drop some close tags, add stray ones
    bool with_prefix = true;       // doctype / comments before the root
};

/// Random HTML document; well-formed unless allow_malformed is set.
std::string random_document(std::uint64_t seed, const RandomDocOptions& options = {});

/// Id of the first element with the given id attribute, or kNoNode.
NodeId find_by_id(const DomTree& tree, std::string_view id);
/// Id of the first text node whose bytes equal `text`, or kNoNode.
NodeId find_text(const DomTree& tree, std::string_view text);

}  // namespace waffle::testing
