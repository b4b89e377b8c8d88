#pragma once

#include <array>
#include <cmath>
#include <map>
#include <vector>

#include "common.hpp"
#include "point.hpp"

namespace amv {

// Multivariate polynomial in up to three variables, the workhorse behind the
// analytic ball backends: centered moments of monomials over Euclidean balls
// have closed forms, so polynomial fields and densities integrate exactly.
class Polynomial {
public:
    struct Term {
        double coef;
        std::array<int, 3> e;  // exponents
    };

    Polynomial() = default;
    explicit Polynomial(int nvars) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c) {
        Polynomial p(nvars);
        p.add_term(c, {0, 0, 0});
        return p;
    }
    // the coordinate monomial x_i
    static Polynomial coordinate(int nvars, int i) {
        Polynomial p(nvars);
        std::array<int, 3> e{0, 0, 0};
        e[static_cast<std::size_t>(i)] = 1;
        p.add_term(1.0, e);
        return p;
    }

    int nvars() const { return nvars_; }
    const std::vector<Term>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }

    void add_term(double coef, std::array<int, 3> e) {
        if (coef == 0.0) return;
        for (auto& t : terms_) {
            if (t.e == e) {
                t.coef += coef;
                return;
            }
        }
        terms_.push_back({coef, e});
    }

    double eval(const Point& p) const {
        double s = 0.0;
        for (const auto& t : terms_) {
            double m = t.coef;
            for (int i = 0; i < nvars_; ++i)
                for (int k = 0; k < t.e[static_cast<std::size_t>(i)]; ++k) m *= p[i];
            s += m;
        }
        return s;
    }

    Polynomial operator+(const Polynomial& o) const {
        Polynomial r = *this;
        for (const auto& t : o.terms_) r.add_term(t.coef, t.e);
        return r;
    }
    Polynomial operator-(const Polynomial& o) const {
        Polynomial r = *this;
        for (const auto& t : o.terms_) r.add_term(-t.coef, t.e);
        return r;
    }
    Polynomial operator*(const Polynomial& o) const {
        Polynomial r(nvars_);
        for (const auto& a : terms_)
            for (const auto& b : o.terms_)
                r.add_term(a.coef * b.coef,
                           {a.e[0] + b.e[0], a.e[1] + b.e[1], a.e[2] + b.e[2]});
        return r;
    }
    Polynomial scaled(double s) const {
        Polynomial r = *this;
        for (auto& t : r.terms_) t.coef *= s;
        return r;
    }

    Polynomial partial(int i) const {
        Polynomial r(nvars_);
        for (const auto& t : terms_) {
            int ei = t.e[static_cast<std::size_t>(i)];
            if (ei == 0) continue;
            auto e = t.e;
            e[static_cast<std::size_t>(i)] = ei - 1;
            r.add_term(t.coef * ei, e);
        }
        return r;
    }

    double laplacian_at(const Point& p) const {
        double s = 0.0;
        for (int i = 0; i < nvars_; ++i) s += partial(i).partial(i).eval(p);
        return s;
    }

    // p(x0 + s) as a polynomial in the offset s (binomial expansion)
    Polynomial translated(const Point& x0) const {
        Polynomial r(nvars_);
        for (const auto& t : terms_) {
            // expand prod_i (x0_i + s_i)^{e_i}
            std::vector<std::pair<double, std::array<int, 3>>> acc{{t.coef, {0, 0, 0}}};
            for (int i = 0; i < nvars_; ++i) {
                int ei = t.e[static_cast<std::size_t>(i)];
                if (ei == 0) continue;
                std::vector<std::pair<double, std::array<int, 3>>> next;
                for (const auto& [c0, e0] : acc) {
                    double binom = 1.0;
                    for (int k = 0; k <= ei; ++k) {
                        // binom = C(ei,k), power x0^{ei-k} s^k
                        double c = c0 * binom * std::pow(x0[i], ei - k);
                        auto e = e0;
                        e[static_cast<std::size_t>(i)] += k;
                        if (c != 0.0) next.push_back({c, e});
                        binom = binom * (ei - k) / (k + 1);
                    }
                }
                acc = std::move(next);
            }
            for (const auto& [c, e] : acc) r.add_term(c, e);
        }
        return r;
    }

    int degree() const {
        int d = 0;
        for (const auto& t : terms_) d = std::max(d, t.e[0] + t.e[1] + t.e[2]);
        return d;
    }

private:
    int nvars_ = 0;
    std::vector<Term> terms_;
};

namespace detail {
inline double double_factorial(int n) {
    double r = 1.0;
    for (int k = n; k >= 2; k -= 2) r *= k;
    return r;
}
}  // namespace detail

// Exact centered ball moment: integral of x^a y^b z^c over the Euclidean
// ball of radius r at the origin in R^n. Zero unless all exponents are even.
inline double ball_monomial_moment(int n, double r, const std::array<int, 3>& e) {
    int total = 0;
    for (int i = 0; i < n; ++i) {
        if (e[static_cast<std::size_t>(i)] % 2 != 0) return 0.0;
        total += e[static_cast<std::size_t>(i)];
    }
    using detail::double_factorial;
    double angular;
    switch (n) {
        case 1:
            angular = 2.0;
            break;
        case 2:
            angular = 2.0 * pi() * double_factorial(e[0] - 1) * double_factorial(e[1] - 1) /
                      double_factorial(e[0] + e[1]);
            break;
        case 3:
            angular = 4.0 * pi() * double_factorial(e[0] - 1) * double_factorial(e[1] - 1) *
                      double_factorial(e[2] - 1) / double_factorial(e[0] + e[1] + e[2] + 1);
            break;
        default:
            throw input_error("ball_monomial_moment: unsupported dimension");
    }
    return angular * std::pow(r, total + n) / (total + n);
}

// Exact integral of a polynomial over B_r(x0) with Lebesgue measure.
inline double ball_polynomial_integral(const Polynomial& p, const Point& x0, double r) {
    Polynomial centered = p.translated(x0);
    double s = 0.0;
    for (const auto& t : centered.terms()) s += t.coef * ball_monomial_moment(p.nvars(), r, t.e);
    return s;
}

// Integral over the origin-centered ball of a polynomial already written in
// offset coordinates.
inline double centered_ball_integral(const Polynomial& p, double r) {
    double s = 0.0;
    for (const auto& t : p.terms()) s += t.coef * ball_monomial_moment(p.nvars(), r, t.e);
    return s;
}

// p minus its constant term, removed at the coefficient level. Integrating
// u - u(x) this way avoids the r^-4-amplified cancellation that the
// a-posteriori subtraction of u(x) from the ball average would suffer.
inline Polynomial without_constant(const Polynomial& p) {
    Polynomial q(p.nvars());
    for (const auto& t : p.terms())
        if (t.e != std::array<int, 3>{0, 0, 0}) q.add_term(t.coef, t.e);
    return q;
}

}  // namespace amv
