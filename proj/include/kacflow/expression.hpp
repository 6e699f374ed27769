#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "kacflow/errors.hpp"

namespace kacflow {

/// Arithmetic expressions in one variable `x`, as written in experiment configs.
///
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := ('-' | '+') unary | power
///   power   := primary ('^' unary)?
///   primary := number | 'x' | 'pi' | 'e' | name '(' expr (',' expr)* ')' | '(' expr ')'
///
/// Functions: sin cos tan exp log sqrt abs floor frac min max pow.
class Expression {
public:
    static Expression parse(const std::string& text) {
        Parser p{text, 0};
        Expression e;
        e.root_ = p.expr();
        p.skip();
        if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
        e.text_ = text;
        return e;
    }

    [[nodiscard]] double operator()(double x) const { return root_->eval(x); }
    [[nodiscard]] const std::string& text() const { return text_; }

    /// True when the value does not depend on x.
    [[nodiscard]] bool is_constant() const { return !root_->uses_x(); }

private:
    struct Node {
        enum class Op { number, var, add, sub, mul, div, neg, pow, call } op = Op::number;
        double value = 0.0;
        std::string name;
        std::vector<std::shared_ptr<const Node>> args;

        [[nodiscard]] bool uses_x() const {
            if (op == Op::var) return true;
            for (const auto& a : args) {
                if (a->uses_x()) return true;
            }
            return false;
        }

        [[nodiscard]] double eval(double x) const {
            switch (op) {
            case Op::number: return value;
            case Op::var: return x;
            case Op::add: return args[0]->eval(x) + args[1]->eval(x);
            case Op::sub: return args[0]->eval(x) - args[1]->eval(x);
            case Op::mul: return args[0]->eval(x) * args[1]->eval(x);
            case Op::div: return args[0]->eval(x) / args[1]->eval(x);
            case Op::neg: return -args[0]->eval(x);
            case Op::pow: return std::pow(args[0]->eval(x), args[1]->eval(x));
            case Op::call: return call(x);
            }
            return 0.0;
        }

        [[nodiscard]] double call(double x) const {
            const double a = args[0]->eval(x);
            if (name == "sin") return std::sin(a);
            if (name == "cos") return std::cos(a);
            if (name == "tan") return std::tan(a);
            if (name == "exp") return std::exp(a);
            if (name == "log") return std::log(a);
            if (name == "sqrt") return std::sqrt(a);
            if (name == "abs") return std::abs(a);
            if (name == "floor") return std::floor(a);
            if (name == "frac") return a - std::floor(a);
            const double b = args[1]->eval(x);
            if (name == "min") return std::min(a, b);
            if (name == "max") return std::max(a, b);
            return std::pow(a, b); // pow
        }
    };
    using NodePtr = std::shared_ptr<const Node>;

    struct Parser {
        const std::string& s;
        std::size_t pos;

        [[noreturn]] void fail(const std::string& what) const {
            throw ConfigurationError("expression \"" + s + "\" at column " + std::to_string(pos + 1) + ": " + what);
        }

        void skip() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }

        bool eat(char c) {
            skip();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }

        static NodePtr make(Node::Op op, std::vector<NodePtr> args = {}, double v = 0.0, std::string name = {}) {
            auto n = std::make_shared<Node>();
            n->op = op;
            n->args = std::move(args);
            n->value = v;
            n->name = std::move(name);
            return n;
        }

        NodePtr expr() {
            NodePtr lhs = term();
            for (;;) {
                if (eat('+')) {
                    lhs = make(Node::Op::add, {lhs, term()});
                } else if (eat('-')) {
                    lhs = make(Node::Op::sub, {lhs, term()});
                } else {
                    return lhs;
                }
            }
        }

        NodePtr term() {
            NodePtr lhs = unary();
            for (;;) {
                if (eat('*')) {
                    lhs = make(Node::Op::mul, {lhs, unary()});
                } else if (eat('/')) {
                    lhs = make(Node::Op::div, {lhs, unary()});
                } else {
                    return lhs;
                }
            }
        }

        NodePtr unary() {
            if (eat('-')) return make(Node::Op::neg, {unary()});
            if (eat('+')) return unary();
            return power();
        }

        NodePtr power() {
            NodePtr base = primary();
            if (eat('^')) return make(Node::Op::pow, {base, unary()});
            return base;
        }

        NodePtr primary() {
            skip();
            if (pos >= s.size()) fail("unexpected end of input");
            const char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const char* begin = s.c_str() + pos;
                char* end = nullptr;
                const double v = std::strtod(begin, &end);
                if (end == begin) fail("malformed number");
                pos += static_cast<std::size_t>(end - begin);
                return make(Node::Op::number, {}, v);
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                const std::string name = s.substr(start, pos - start);
                if (name == "x") return make(Node::Op::var);
                if (name == "pi") return make(Node::Op::number, {}, std::numbers::pi);
                if (name == "e") return make(Node::Op::number, {}, std::numbers::e);
                static const std::vector<std::string> unary_fns{"sin", "cos",  "tan",   "exp", "log",
                                                                "sqrt", "abs", "floor", "frac"};
                static const std::vector<std::string> binary_fns{"min", "max", "pow"};
                const bool is_unary = std::find(unary_fns.begin(), unary_fns.end(), name) != unary_fns.end();
                const bool is_binary = std::find(binary_fns.begin(), binary_fns.end(), name) != binary_fns.end();
                if (!is_unary && !is_binary) fail("unknown name '" + name + "'");
                if (!eat('(')) fail("expected '(' after " + name);
                std::vector<NodePtr> args{expr()};
                if (is_binary) {
                    if (!eat(',')) fail(name + " takes two arguments");
                    args.push_back(expr());
                }
                if (!eat(')')) fail("expected ')'");
                return make(Node::Op::call, std::move(args), 0.0, name);
            }
            if (eat('(')) {
                NodePtr inner = expr();
                if (!eat(')')) fail("expected ')'");
                return inner;
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }
    };

    NodePtr root_;
    std::string text_;
};

} // namespace kacflow
