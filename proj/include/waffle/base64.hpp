// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace waffle {

std::string base64_encode(std::string_view bytes);
/// Ignores whitespace; throws std::invalid_argument on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace waffle
