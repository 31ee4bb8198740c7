#pragma once

#include <memory>
#include <string>

namespace bellman2d {

/**
 * Arithmetic expression in x and y, used for boundary data.
 *
 * Grammar: + - * / ^ (right associative), unary minus, parentheses, numbers,
 * the constant pi, and the functions sin cos tan exp log sqrt abs.
 */
class Expression {
public:
    // Throws ValidationError with the offending position on malformed input.
    static Expression parse(const std::string& text);

    double operator()(double x, double y) const;
    const std::string& source() const { return source_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string source_;
};

}  // namespace bellman2d
