// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>

namespace waffle {

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ZeroVector : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyList : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFinite : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace waffle
