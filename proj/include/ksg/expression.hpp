#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace ksg {

class ExpressionError : public std::invalid_argument {
public:
    ExpressionError(const std::string& msg, std::size_t position)
        : std::invalid_argument(msg + " at column " + std::to_string(position + 1)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Arithmetic expression in x and y: + - * / ^, parentheses, unary minus, constants pi and e,
/// functions sin cos tan exp log sqrt abs tanh cosh sinh min max.
class Expression {
public:
    explicit Expression(const std::string& text);
    double operator()(double x, double y) const;
    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace ksg
