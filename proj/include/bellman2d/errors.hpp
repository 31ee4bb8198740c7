#pragma once

#include <stdexcept>
#include <string>

namespace bellman2d {

// Bad input: malformed configuration, violated precondition, wrong shape.
// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A stencil with a negative neighbour weight; a discrete maximum principle
// cannot be guaranteed for it.
class StencilMonotonicityError : public ValidationError {
public:
    explicit StencilMonotonicityError(const std::string& what) : ValidationError(what) {}
};

// Iteration caps, non-finite values, ill-conditioned fits.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bellman2d
