#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "common.hpp"
#include "point.hpp"
#include "polynomial.hpp"

namespace amv {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

// Pointwise-evaluable scalar function on the ambient chart. Gradient and
// Hessian oracles are optional and only used by verification code (Kirchhoff
// sums, Laplacian references); the estimators themselves never need them.
//
// Fields carry two optional hints for the integrators:
//   * support: axis box outside which the field vanishes (weak pairing),
//   * singularities: coordinates of 1-D jump/kink points so adaptive
//     quadrature can split panels there.
class ScalarField {
public:
    ScalarField() = default;

    static ScalarField from_function(int dim, std::function<double(const Point&)> f) {
        ScalarField u;
        u.dim_ = dim;
        u.value_ = std::move(f);
        return u;
    }

    static ScalarField from_polynomial(Polynomial p) {
        ScalarField u;
        u.dim_ = p.nvars();
        auto sp = std::make_shared<Polynomial>(std::move(p));
        u.poly_ = sp;
        u.value_ = [sp](const Point& x) { return sp->eval(x); };
        std::array<std::shared_ptr<Polynomial>, 3> grads;
        std::array<std::array<std::shared_ptr<Polynomial>, 3>, 3> hes;
        for (int i = 0; i < u.dim_; ++i) {
            grads[static_cast<std::size_t>(i)] = std::make_shared<Polynomial>(sp->partial(i));
            for (int j = 0; j < u.dim_; ++j)
                hes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    std::make_shared<Polynomial>(sp->partial(i).partial(j));
        }
        int dim = u.dim_;
        u.gradient_ = [grads, dim](const Point& x) {
            Vec3 g{0, 0, 0};
            for (int i = 0; i < dim; ++i) g[static_cast<std::size_t>(i)] = grads[static_cast<std::size_t>(i)]->eval(x);
            return g;
        };
        u.hessian_ = [hes, dim](const Point& x) {
            Mat3 h{};
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j)
                    h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                        hes[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]->eval(x);
            return h;
        };
        return u;
    }

    double operator()(const Point& x) const {
        if (!value_) throw input_error("ScalarField: empty field");
        return value_(x);
    }

    int dim() const { return dim_; }
    bool has_gradient() const { return static_cast<bool>(gradient_); }
    bool has_hessian() const { return static_cast<bool>(hessian_); }
    Vec3 gradient(const Point& x) const {
        if (!gradient_) throw input_error("ScalarField: no gradient oracle");
        return gradient_(x);
    }
    Mat3 hessian(const Point& x) const {
        if (!hessian_) throw input_error("ScalarField: no Hessian oracle");
        return hessian_(x);
    }
    double laplacian(const Point& x) const {
        Mat3 h = hessian(x);
        double s = 0.0;
        for (int i = 0; i < dim_; ++i) s += h[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        return s;
    }

    const Polynomial* polynomial() const { return poly_.get(); }

    ScalarField& with_gradient(std::function<Vec3(const Point&)> g) {
        gradient_ = std::move(g);
        return *this;
    }
    ScalarField& with_hessian(std::function<Mat3(const Point&)> h) {
        hessian_ = std::move(h);
        return *this;
    }
    ScalarField& with_support(Point lo, Point hi) {
        support_ = {lo, hi};
        return *this;
    }
    ScalarField& with_singularities(std::vector<double> xs) {
        singularities_ = std::move(xs);
        return *this;
    }

    const std::optional<std::pair<Point, Point>>& support() const { return support_; }
    const std::vector<double>& singularities() const { return singularities_; }

private:
    int dim_ = 0;
    std::function<double(const Point&)> value_;
    std::function<Vec3(const Point&)> gradient_;
    std::function<Mat3(const Point&)> hessian_;
    std::shared_ptr<const Polynomial> poly_;
    std::optional<std::pair<Point, Point>> support_;
    std::vector<double> singularities_;
};

enum class EstimateMethod { analytic, quadrature, monte_carlo };

inline const char* method_name(EstimateMethod m) {
    switch (m) {
        case EstimateMethod::analytic: return "analytic";
        case EstimateMethod::quadrature: return "quadrature";
        case EstimateMethod::monte_carlo: return "monte-carlo";
    }
    return "?";
}

// Joint estimate of mu(B_r(x)) and the integral of f over B_r(x), produced
// from one node/sample set so that integral/mass is a consistent average.
// abs_error bounds the integral, mass_error the mass, average_error the
// ratio; analytic backends report zeros, monte-carlo reports sigma_k times
// the sample standard error.
struct BallEstimate {
    double mass = 0.0;
    double integral = 0.0;
    double abs_error = 0.0;
    double mass_error = 0.0;
    double average_error = 0.0;
    EstimateMethod method = EstimateMethod::analytic;
    std::int64_t samples_used = 0;
    double sigma_k = 0.0;

    double average() const {
        if (mass <= 0.0) throw domain_error("BallEstimate: zero ball mass");
        return integral / mass;
    }
};

inline BallEstimate combine_sum(const BallEstimate& a, const BallEstimate& b) {
    BallEstimate r;
    r.mass = a.mass + b.mass;
    r.integral = a.integral + b.integral;
    r.abs_error = a.abs_error + b.abs_error;
    r.mass_error = a.mass_error + b.mass_error;
    r.samples_used = a.samples_used + b.samples_used;
    r.sigma_k = std::max(a.sigma_k, b.sigma_k);
    if (a.method == b.method)
        r.method = a.method;
    else if (a.method == EstimateMethod::monte_carlo || b.method == EstimateMethod::monte_carlo)
        r.method = EstimateMethod::monte_carlo;
    else
        r.method = EstimateMethod::quadrature;
    if (r.mass > 0.0) {
        r.average_error = r.abs_error / r.mass +
                          std::abs(r.integral) / (r.mass * r.mass) * r.mass_error;
    }
    return r;
}

}  // namespace amv
