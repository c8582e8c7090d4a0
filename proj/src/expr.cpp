#include "equichern/expr.hpp"

#include "equichern/algebra.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace equichern {

struct Expression::Node {
    enum class Kind { number, var_x, var_y, neg, add, sub, mul, div, pow, call } kind;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(double x, double y) const
    {
        switch (kind) {
        case Kind::number: return value;
        case Kind::var_x: return x;
        case Kind::var_y: return y;
        case Kind::neg: return -lhs->eval(x, y);
        case Kind::add: return lhs->eval(x, y) + rhs->eval(x, y);
        case Kind::sub: return lhs->eval(x, y) - rhs->eval(x, y);
        case Kind::mul: return lhs->eval(x, y) * rhs->eval(x, y);
        case Kind::div: return lhs->eval(x, y) / rhs->eval(x, y);
        case Kind::pow: return std::pow(lhs->eval(x, y), rhs->eval(x, y));
        case Kind::call: return fn(lhs->eval(x, y));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr)
{
    auto n = std::make_shared<Expression::Node>();
    n->kind = k;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
}

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | name | name '(' expr ')' | '(' expr ')'
class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse()
    {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw Rejected("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr()
    {
        NodePtr n = term();
        for (;;) {
            if (eat('+')) n = make(Kind::add, n, term());
            else if (eat('-')) n = make(Kind::sub, n, term());
            else return n;
        }
    }

    NodePtr term()
    {
        NodePtr n = unary();
        for (;;) {
            if (eat('*')) n = make(Kind::mul, n, unary());
            else if (eat('/')) n = make(Kind::div, n, unary());
            else return n;
        }
    }

    NodePtr unary()
    {
        if (eat('-')) return make(Kind::neg, unary());
        if (eat('+')) return unary();
        return power();
    }

    NodePtr power()
    {
        NodePtr base = atom();
        if (eat('^')) return make(Kind::pow, base, unary());
        return base;
    }

    NodePtr atom()
    {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (eat('(')) {
            NodePtr n = expr();
            if (!eat(')')) fail("missing ')'");
            return n;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            std::size_t used = 0;
            const double v = std::stod(s_.substr(pos_), &used);
            pos_ += used;
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::number;
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            if (name == "x") return make(Kind::var_x);
            if (name == "y") return make(Kind::var_y);
            if (name == "pi") {
                auto n = std::make_shared<Expression::Node>();
                n->kind = Kind::number;
                n->value = std::numbers::pi;
                return n;
            }
            double (*fn)(double) = nullptr;
            if (name == "sin") fn = [](double v) { return std::sin(v); };
            else if (name == "cos") fn = [](double v) { return std::cos(v); };
            else if (name == "tan") fn = [](double v) { return std::tan(v); };
            else if (name == "exp") fn = [](double v) { return std::exp(v); };
            else if (name == "log") fn = [](double v) { return std::log(v); };
            else if (name == "sqrt") fn = [](double v) { return std::sqrt(v); };
            else fail("unknown name '" + name + "'");
            if (!eat('(')) fail("expected '(' after " + name);
            NodePtr arg = expr();
            if (!eat(')')) fail("missing ')'");
            auto n = std::make_shared<Expression::Node>();
            n->kind = Kind::call;
            n->fn = fn;
            n->lhs = arg;
            return n;
        }
        fail(std::string("unexpected '") + c + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text)
{
    Expression e;
    e.root_ = Parser(text).parse();
    e.text_ = text;
    return e;
}

double Expression::operator()(double x, double y) const
{
    if (!root_) return 0.0;
    return root_->eval(x, y);
}

}  // namespace equichern
