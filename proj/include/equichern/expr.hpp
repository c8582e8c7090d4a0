#pragma once

// Small arithmetic expression language for coefficient functions of (x, y):
// numbers, x, y, pi, + - * / ^, unary minus, parentheses and the functions
// sin cos tan exp log sqrt.

#include <memory>
#include <string>

namespace equichern {

class Expression {
public:
    Expression() = default;
    /// Throws Rejected with the offending position on syntax errors.
    static Expression parse(const std::string& text);

    double operator()(double x, double y) const;
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace equichern
