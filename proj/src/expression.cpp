#include "ksg/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

namespace ksg {

struct Expression::Node {
    enum class Kind { Number, X, Y, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 };
    Kind kind = Kind::Number;
    double value = 0.0;
    double (*fn1)(double) = nullptr;
    double (*fn2)(double, double) = nullptr;
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;

    double eval(double x, double y) const {
        switch (kind) {
            case Kind::Number:
                return value;
            case Kind::X:
                return x;
            case Kind::Y:
                return y;
            case Kind::Neg:
                return -a->eval(x, y);
            case Kind::Add:
                return a->eval(x, y) + b->eval(x, y);
            case Kind::Sub:
                return a->eval(x, y) - b->eval(x, y);
            case Kind::Mul:
                return a->eval(x, y) * b->eval(x, y);
            case Kind::Div:
                return a->eval(x, y) / b->eval(x, y);
            case Kind::Pow:
                return std::pow(a->eval(x, y), b->eval(x, y));
            case Kind::Call1:
                return fn1(a->eval(x, y));
            case Kind::Call2:
                return fn2(a->eval(x, y), b->eval(x, y));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

double f_sin(double v) { return std::sin(v); }
double f_cos(double v) { return std::cos(v); }
double f_tan(double v) { return std::tan(v); }
double f_exp(double v) { return std::exp(v); }
double f_log(double v) { return std::log(v); }
double f_sqrt(double v) { return std::sqrt(v); }
double f_abs(double v) { return std::abs(v); }
double f_tanh(double v) { return std::tanh(v); }
double f_cosh(double v) { return std::cosh(v); }
double f_sinh(double v) { return std::sinh(v); }
double f_min(double a, double b) { return std::min(a, b); }
double f_max(double a, double b) { return std::max(a, b); }

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | '+' unary | power
// power  := atom ('^' unary)?
// atom   := number | name | name '(' args ')' | '(' expr ')'
class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) {
            throw ExpressionError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        }
        return n;
    }

private:
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr n = term();
        for (;;) {
            if (eat('+')) {
                n = make(Kind::Add, n, term());
            } else if (eat('-')) {
                n = make(Kind::Sub, n, term());
            } else {
                return n;
            }
        }
    }

    NodePtr term() {
        NodePtr n = unary();
        for (;;) {
            if (eat('*')) {
                n = make(Kind::Mul, n, unary());
            } else if (eat('/')) {
                n = make(Kind::Div, n, unary());
            } else {
                return n;
            }
        }
    }

    NodePtr unary() {
        if (eat('-')) {
            return make(Kind::Neg, unary());
        }
        if (eat('+')) {
            return unary();
        }
        return power();
    }

    NodePtr power() {
        NodePtr n = atom();
        if (eat('^')) {
            return make(Kind::Pow, n, unary());
        }
        return n;
    }

    NodePtr atom() {
        skip();
        if (pos_ >= s_.size()) {
            throw ExpressionError("unexpected end of expression", pos_);
        }
        const char c = s_[pos_];
        if (eat('(')) {
            NodePtr n = expr();
            if (!eat(')')) {
                throw ExpressionError("expected ')'", pos_);
            }
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) {
                throw ExpressionError("malformed number", pos_);
            }
            pos_ += static_cast<std::size_t>(end - begin);
            auto n = std::make_shared<Expression::Node>();
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
                ++pos_;
            }
            const std::string name = s_.substr(start, pos_ - start);
            if (name == "x") {
                return make(Kind::X);
            }
            if (name == "y") {
                return make(Kind::Y);
            }
            if (name == "pi" || name == "e") {
                auto n = std::make_shared<Expression::Node>();
                n->value = name == "pi" ? std::numbers::pi : std::numbers::e;
                return n;
            }
            return call(name, start);
        }
        throw ExpressionError("unexpected '" + std::string(1, c) + "'", pos_);
    }

    NodePtr call(const std::string& name, std::size_t start) {
        static const std::vector<std::pair<std::string, double (*)(double)>> unary_fns = {
            {"sin", f_sin},   {"cos", f_cos},   {"tan", f_tan},   {"exp", f_exp},   {"log", f_log},
            {"sqrt", f_sqrt}, {"abs", f_abs},   {"tanh", f_tanh}, {"cosh", f_cosh}, {"sinh", f_sinh}};
        static const std::vector<std::pair<std::string, double (*)(double, double)>> binary_fns = {{"min", f_min},
                                                                                                   {"max", f_max}};
        if (!eat('(')) {
            throw ExpressionError("unknown name '" + name + "'", start);
        }
        for (const auto& [n, f] : unary_fns) {
            if (n == name) {
                auto node = std::make_shared<Expression::Node>();
                node->kind = Kind::Call1;
                node->fn1 = f;
                node->a = expr();
                if (!eat(')')) {
                    throw ExpressionError("expected ')' after argument of " + name, pos_);
                }
                return node;
            }
        }
        for (const auto& [n, f] : binary_fns) {
            if (n == name) {
                auto node = std::make_shared<Expression::Node>();
                node->kind = Kind::Call2;
                node->fn2 = f;
                node->a = expr();
                if (!eat(',')) {
                    throw ExpressionError(name + " takes two arguments", pos_);
                }
                node->b = expr();
                if (!eat(')')) {
                    throw ExpressionError("expected ')' after arguments of " + name, pos_);
                }
                return node;
            }
        }
        throw ExpressionError("unknown function '" + name + "'", start);
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(const std::string& text) : text_(text) { root_ = Parser(text_).parse(); }

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace ksg
