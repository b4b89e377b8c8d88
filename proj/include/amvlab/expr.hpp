#pragma once

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "field.hpp"
#include "point.hpp"
#include "polynomial.hpp"

namespace amv {

// Second-order forward-mode value: carries value, gradient and Hessian
// through arithmetic, which gives expression fields exact derivative
// oracles (the Kirchhoff and degenerate-weight checks need them).
struct Taylor2 {
    double v = 0.0;
    Vec3 g{0, 0, 0};
    Mat3 h{};
    int dim = 0;

    static Taylor2 constant(double c, int dim) {
        Taylor2 t;
        t.v = c;
        t.dim = dim;
        return t;
    }
    static Taylor2 variable(double x, int index, int dim) {
        Taylor2 t;
        t.v = x;
        t.dim = dim;
        t.g[static_cast<std::size_t>(index)] = 1.0;
        return t;
    }

    Taylor2 operator+(const Taylor2& o) const {
        Taylor2 r = *this;
        r.v += o.v;
        for (int i = 0; i < dim; ++i) {
            r.g[static_cast<std::size_t>(i)] += o.g[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] += o.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        return r;
    }
    Taylor2 operator-(const Taylor2& o) const {
        Taylor2 r = *this;
        r.v -= o.v;
        for (int i = 0; i < dim; ++i) {
            r.g[static_cast<std::size_t>(i)] -= o.g[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= o.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        return r;
    }
    Taylor2 operator-() const {
        Taylor2 r = *this;
        r.v = -r.v;
        for (int i = 0; i < dim; ++i) {
            r.g[static_cast<std::size_t>(i)] = -r.g[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = -r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
        return r;
    }
    Taylor2 operator*(const Taylor2& o) const {
        Taylor2 r;
        r.dim = dim;
        r.v = v * o.v;
        for (int i = 0; i < dim; ++i)
            r.g[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)] * o.v + o.g[static_cast<std::size_t>(i)] * v;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * o.v +
                    o.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * v +
                    g[static_cast<std::size_t>(i)] * o.g[static_cast<std::size_t>(j)] +
                    g[static_cast<std::size_t>(j)] * o.g[static_cast<std::size_t>(i)];
        return r;
    }
    Taylor2 inverse() const {
        if (v == 0.0) throw evaluation_error("expression: division by zero");
        Taylor2 r;
        r.dim = dim;
        r.v = 1.0 / v;
        double iv2 = 1.0 / (v * v), iv3 = iv2 / v;
        for (int i = 0; i < dim; ++i) r.g[static_cast<std::size_t>(i)] = -g[static_cast<std::size_t>(i)] * iv2;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    -h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * iv2 +
                    2.0 * g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)] * iv3;
        return r;
    }
    Taylor2 operator/(const Taylor2& o) const { return *this * o.inverse(); }

    // chain rule for a scalar map s(v) with derivatives s1, s2
    Taylor2 chain(double s0, double s1, double s2) const {
        Taylor2 r;
        r.dim = dim;
        r.v = s0;
        for (int i = 0; i < dim; ++i) r.g[static_cast<std::size_t>(i)] = s1 * g[static_cast<std::size_t>(i)];
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                r.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    s1 * h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                    s2 * g[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(j)];
        return r;
    }

    Taylor2 pow(double e) const {
        double ie;
        if (std::modf(e, &ie) == 0.0 && std::abs(ie) <= 32) {
            int n = static_cast<int>(ie);
            if (n == 0) return constant(1.0, dim);
            Taylor2 base = n > 0 ? *this : inverse();
            Taylor2 acc = base;
            for (int k = 1; k < std::abs(n); ++k) acc = acc * base;
            return acc;
        }
        if (v <= 0.0) throw evaluation_error("expression: x^p with non-integer p needs x > 0");
        double s0 = std::pow(v, e);
        return chain(s0, e * s0 / v, e * (e - 1.0) * s0 / (v * v));
    }
    // |.| and sgn differentiated away from the kink/jump, zero there
    Taylor2 abs_() const {
        double s = v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
        return chain(std::abs(v), s, 0.0);
    }
    Taylor2 sgn_() const { return constant(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0), dim); }
};

// Minimal arithmetic grammar over coordinates: + - * / ^ abs sgn, with x,y
// mapping to the first two coordinates and both z and t to the third.
class Expression {
public:
    static Expression parse(const std::string& src, int dim) {
        Expression e;
        e.dim_ = dim;
        e.src_ = src;
        Parser p{src, 0, dim, &e};
        e.root_ = p.parse_expr();
        p.skip_ws();
        if (p.pos != src.size())
            throw input_error("expression: unexpected trailing input at position " + std::to_string(p.pos) +
                              " in '" + src + "'");
        return e;
    }

    double eval(const Point& p) const { return eval_node<double>(root_, p); }
    Taylor2 eval_taylor(const Point& p) const { return eval_node<Taylor2>(root_, p); }

    std::optional<Polynomial> as_polynomial() const { return node_poly(root_); }

    int dim() const { return dim_; }
    const std::string& source() const { return src_; }

    // Builds a ScalarField: exact-polynomial route when the expression is
    // polynomial, forward-AD oracles otherwise.
    ScalarField to_field() const {
        if (auto p = as_polynomial()) return ScalarField::from_polynomial(*p);
        Expression self = *this;
        ScalarField f = ScalarField::from_function(dim_, [self](const Point& x) { return self.eval(x); });
        f.with_gradient([self](const Point& x) { return self.eval_taylor(x).g; });
        f.with_hessian([self](const Point& x) { return self.eval_taylor(x).h; });
        return f;
    }

private:
    enum class Op { num, var, add, sub, mul, div, pow, neg, abs, sgn };
    struct Node {
        Op op;
        double num = 0.0;
        int var = 0;
        int l = -1, r = -1;
    };

    int add_node(Node n) {
        nodes_.push_back(n);
        return static_cast<int>(nodes_.size()) - 1;
    }

    struct Parser {
        const std::string& s;
        std::size_t pos;
        int dim;
        Expression* out;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool eat(char c) {
            skip_ws();
            if (pos < s.size() && s[pos] == c) {
                ++pos;
                return true;
            }
            return false;
        }
        [[noreturn]] void fail(const std::string& what) {
            throw input_error("expression: " + what + " at position " + std::to_string(pos) + " in '" + s + "'");
        }

        int parse_expr() {
            int l = parse_term();
            for (;;) {
                if (eat('+'))
                    l = out->add_node({Op::add, 0, 0, l, parse_term()});
                else if (eat('-'))
                    l = out->add_node({Op::sub, 0, 0, l, parse_term()});
                else
                    return l;
            }
        }
        int parse_term() {
            int l = parse_unary();
            for (;;) {
                if (eat('*'))
                    l = out->add_node({Op::mul, 0, 0, l, parse_unary()});
                else if (eat('/'))
                    l = out->add_node({Op::div, 0, 0, l, parse_unary()});
                else
                    return l;
            }
        }
        int parse_unary() {
            if (eat('-')) return out->add_node({Op::neg, 0, 0, parse_unary(), -1});
            if (eat('+')) return parse_unary();
            return parse_power();
        }
        int parse_power() {
            int base = parse_primary();
            if (eat('^')) {
                int e = parse_unary();  // right-associative, binds unary minus in the exponent
                return out->add_node({Op::pow, 0, 0, base, e});
            }
            return base;
        }
        int parse_primary() {
            skip_ws();
            if (pos >= s.size()) fail("unexpected end of input");
            char c = s[pos];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                const char* start = s.c_str() + pos;
                char* end = nullptr;
                double v = std::strtod(start, &end);
                if (end == start) fail("bad number");
                pos += static_cast<std::size_t>(end - start);
                return out->add_node({Op::num, v, 0, -1, -1});
            }
            if (c == '(') {
                ++pos;
                int e = parse_expr();
                if (!eat(')')) fail("missing ')'");
                return e;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                std::size_t start = pos;
                while (pos < s.size() && std::isalnum(static_cast<unsigned char>(s[pos]))) ++pos;
                std::string name = s.substr(start, pos - start);
                if (name == "abs" || name == "sgn") {
                    if (!eat('(')) fail("expected '(' after " + name);
                    int a = parse_expr();
                    if (!eat(')')) fail("missing ')'");
                    return out->add_node({name == "abs" ? Op::abs : Op::sgn, 0, 0, a, -1});
                }
                int idx = -1;
                if (name == "x") idx = 0;
                else if (name == "y") idx = 1;
                else if (name == "z" || name == "t") idx = 2;
                if (idx < 0) fail("unknown identifier '" + name + "'");
                if (idx >= dim) fail("coordinate '" + name + "' exceeds ambient dimension " + std::to_string(dim));
                return out->add_node({Op::var, 0, idx, -1, -1});
            }
            fail(std::string("unexpected character '") + c + "'");
        }
    };

    template <typename T>
    T eval_node(int id, const Point& p) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if constexpr (std::is_same_v<T, double>) {
            switch (n.op) {
                case Op::num: return n.num;
                case Op::var: return p[n.var];
                case Op::add: return eval_node<T>(n.l, p) + eval_node<T>(n.r, p);
                case Op::sub: return eval_node<T>(n.l, p) - eval_node<T>(n.r, p);
                case Op::mul: return eval_node<T>(n.l, p) * eval_node<T>(n.r, p);
                case Op::div: {
                    double d = eval_node<T>(n.r, p);
                    if (d == 0.0) throw evaluation_error("expression: division by zero");
                    return eval_node<T>(n.l, p) / d;
                }
                case Op::pow: return std::pow(eval_node<T>(n.l, p), eval_node<T>(n.r, p));
                case Op::neg: return -eval_node<T>(n.l, p);
                case Op::abs: return std::abs(eval_node<T>(n.l, p));
                case Op::sgn: {
                    double v = eval_node<T>(n.l, p);
                    return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
                }
            }
        } else {
            switch (n.op) {
                case Op::num: return Taylor2::constant(n.num, dim_);
                case Op::var: return Taylor2::variable(p[n.var], n.var, dim_);
                case Op::add: return eval_node<T>(n.l, p) + eval_node<T>(n.r, p);
                case Op::sub: return eval_node<T>(n.l, p) - eval_node<T>(n.r, p);
                case Op::mul: return eval_node<T>(n.l, p) * eval_node<T>(n.r, p);
                case Op::div: return eval_node<T>(n.l, p) / eval_node<T>(n.r, p);
                case Op::pow: {
                    const Node& e = nodes_[static_cast<std::size_t>(n.r)];
                    double ev;
                    if (e.op == Op::num)
                        ev = e.num;
                    else if (e.op == Op::neg && nodes_[static_cast<std::size_t>(e.l)].op == Op::num)
                        ev = -nodes_[static_cast<std::size_t>(e.l)].num;
                    else
                        throw input_error("expression: exponent must be a numeric literal");
                    return eval_node<T>(n.l, p).pow(ev);
                }
                case Op::neg: return -eval_node<T>(n.l, p);
                case Op::abs: return eval_node<T>(n.l, p).abs_();
                case Op::sgn: return eval_node<T>(n.l, p).sgn_();
            }
        }
        throw input_error("expression: corrupt AST");
    }

    std::optional<Polynomial> node_poly(int id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        switch (n.op) {
            case Op::num: return Polynomial::constant(dim_, n.num);
            case Op::var: return Polynomial::coordinate(dim_, n.var);
            case Op::add: {
                auto a = node_poly(n.l), b = node_poly(n.r);
                if (a && b) return *a + *b;
                return std::nullopt;
            }
            case Op::sub: {
                auto a = node_poly(n.l), b = node_poly(n.r);
                if (a && b) return *a - *b;
                return std::nullopt;
            }
            case Op::mul: {
                auto a = node_poly(n.l), b = node_poly(n.r);
                if (a && b) return *a * *b;
                return std::nullopt;
            }
            case Op::neg: {
                auto a = node_poly(n.l);
                if (a) return a->scaled(-1.0);
                return std::nullopt;
            }
            case Op::pow: {
                const Node& e = nodes_[static_cast<std::size_t>(n.r)];
                if (e.op != Op::num) return std::nullopt;
                double ie;
                if (std::modf(e.num, &ie) != 0.0 || ie < 0 || ie > 16) return std::nullopt;
                auto a = node_poly(n.l);
                if (!a) return std::nullopt;
                Polynomial acc = Polynomial::constant(dim_, 1.0);
                for (int k = 0; k < static_cast<int>(ie); ++k) acc = acc * *a;
                return acc;
            }
            case Op::div: {
                const Node& d = nodes_[static_cast<std::size_t>(n.r)];
                if (d.op != Op::num || d.num == 0.0) return std::nullopt;
                auto a = node_poly(n.l);
                if (a) return a->scaled(1.0 / d.num);
                return std::nullopt;
            }
            default: return std::nullopt;
        }
    }

    int dim_ = 0;
    int root_ = -1;
    std::string src_;
    std::vector<Node> nodes_;
};

inline ScalarField field_from_expression(const std::string& src, int dim) {
    return Expression::parse(src, dim).to_field();
}

}  // namespace amv
