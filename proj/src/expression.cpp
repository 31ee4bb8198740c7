#include "bellman2d/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "bellman2d/errors.hpp"

namespace bellman2d {

struct Expression::Node {
    enum class Op { Number, X, Y, Add, Sub, Mul, Div, Pow, Neg, Call };
    Op op = Op::Number;
    double value = 0.0;
    double (*fn)(double) = nullptr;
    std::vector<std::shared_ptr<const Node>> args;

    double eval(double x, double y) const {
        switch (op) {
            case Op::Number: return value;
            case Op::X: return x;
            case Op::Y: return y;
            case Op::Add: return args[0]->eval(x, y) + args[1]->eval(x, y);
            case Op::Sub: return args[0]->eval(x, y) - args[1]->eval(x, y);
            case Op::Mul: return args[0]->eval(x, y) * args[1]->eval(x, y);
            case Op::Div: return args[0]->eval(x, y) / args[1]->eval(x, y);
            case Op::Pow: return std::pow(args[0]->eval(x, y), args[1]->eval(x, y));
            case Op::Neg: return -args[0]->eval(x, y);
            case Op::Call: return fn(args[0]->eval(x, y));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, std::vector<NodePtr> args = {}, double value = 0.0, double (*fn)(double) = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->args = std::move(args);
    n->value = value;
    n->fn = fn;
    return n;
}

double fn_sin(double v) { return std::sin(v); }
double fn_cos(double v) { return std::cos(v); }
double fn_tan(double v) { return std::tan(v); }
double fn_exp(double v) { return std::exp(v); }
double fn_log(double v) { return std::log(v); }
double fn_sqrt(double v) { return std::sqrt(v); }
double fn_abs(double v) { return std::abs(v); }

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    NodePtr parse() {
        NodePtr e = sum();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ValidationError("expression: " + what + " at position " + std::to_string(pos_) + " in '" + s_ + "'");
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr sum() {
        NodePtr lhs = product();
        for (;;) {
            if (eat('+')) {
                lhs = make(Op::Add, {lhs, product()});
            } else if (eat('-')) {
                lhs = make(Op::Sub, {lhs, product()});
            } else {
                return lhs;
            }
        }
    }
    NodePtr product() {
        NodePtr lhs = unary();
        for (;;) {
            if (eat('*')) {
                lhs = make(Op::Mul, {lhs, unary()});
            } else if (eat('/')) {
                lhs = make(Op::Div, {lhs, unary()});
            } else {
                return lhs;
            }
        }
    }
    NodePtr unary() {
        if (eat('-')) return make(Op::Neg, {unary()});
        if (eat('+')) return unary();
        return power();
    }
    NodePtr power() {
        NodePtr base = atom();
        if (eat('^')) return make(Op::Pow, {base, unary()});
        return base;
    }
    NodePtr atom() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        if (eat('(')) {
            NodePtr e = sum();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return make(Op::Number, {}, v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            if (name == "x") return make(Op::X);
            if (name == "y") return make(Op::Y);
            if (name == "pi") return make(Op::Number, {}, std::numbers::pi);
            double (*fn)(double) = nullptr;
            if (name == "sin") fn = fn_sin;
            if (name == "cos") fn = fn_cos;
            if (name == "tan") fn = fn_tan;
            if (name == "exp") fn = fn_exp;
            if (name == "log") fn = fn_log;
            if (name == "sqrt") fn = fn_sqrt;
            if (name == "abs") fn = fn_abs;
            if (!fn) {
                pos_ = start;
                fail("unknown name '" + name + "'");
            }
            if (!eat('(')) fail("expected '(' after " + name);
            NodePtr arg = sum();
            if (!eat(')')) fail("missing ')'");
            return make(Op::Call, {arg}, 0.0, fn);
        }
        fail("unexpected character");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.root_ = Parser(text).parse();
    e.source_ = text;
    return e;
}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace bellman2d
