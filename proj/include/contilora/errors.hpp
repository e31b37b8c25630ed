#pragma once

#include <stdexcept>
#include <string>

namespace contilora {

// Shape disagreement between operands. Message names both shapes.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// NaN/Inf encountered, non-convergence, or an operation undefined on its input
// (zero-norm vector, all-zero spectrum, ...).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Bad configuration or bad call sequence (missing current adapter, unknown mode).
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace contilora
