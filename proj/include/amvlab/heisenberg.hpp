#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "common.hpp"
#include "field.hpp"
#include "mc.hpp"
#include "point.hpp"
#include "space.hpp"
#include "spaces.hpp"

namespace amv {

// Heisenberg group as R^3 with the group law
//   (x,y,t) o (x',y',t') = (x+x', y+y', t+t'+2(yx'-y'x))
// and horizontal frame X = d_x + 2y d_t, Y = d_y - 2x d_t. All constants in
// this module are relative to this frame.

inline Point h_compose(const Point& p, const Point& q) {
    return Point{p[0] + q[0], p[1] + q[1], p[2] + q[2] + 2.0 * (p[1] * q[0] - q[1] * p[0])};
}
inline Point h_inverse(const Point& p) { return Point{-p[0], -p[1], -p[2]}; }
inline Point h_dilate(double lam, const Point& p) {
    return Point{lam * p[0], lam * p[1], lam * lam * p[2]};
}

// |t| <= (2/pi) d_CC(o,(z,t))^2 on the whole group; the bound is attained by
// the semicircle geodesic and makes the Monte Carlo bounding box tight.
inline constexpr double h_t_bound() { return 2.0 / 3.14159265358979323846264338327950288; }

namespace detail {

// Distance to the origin. Geodesics project to circular arcs: with chord
// length rho=|z| and arc half-angle alpha, the vertical displacement is
// |t| = rho^2 (alpha - sin a cos a)/sin^2 a and the length is rho a/sin a.
// Solving for alpha reduces to one safeguarded Newton/bisection iteration
// on a monotone-bracketed function; both branches avoid the cancellation
// near alpha -> 0 and alpha -> pi.
inline double cc_distance_origin(double zx, double zy, double t) {
    double rho2 = zx * zx + zy * zy;
    double rho = std::sqrt(rho2);
    double at = std::abs(t);
    if (at == 0.0) return rho;
    if (rho == 0.0) return std::sqrt(pi() * at);

    double nu = at / rho2;
    if (nu < 1e-4) {
        // alpha ~ (3/2)nu; d = rho (1 + 3 nu^2/8 + O(nu^4))
        return rho * (1.0 + 0.375 * nu * nu);
    }

    const int max_iter = 80;
    if (nu <= pi() / 2.0) {
        // root of H(a) = a - sin a cos a - nu sin^2 a in (0, pi/2]
        auto H = [&](double a) { return a - std::sin(a) * std::cos(a) - nu * std::sin(a) * std::sin(a); };
        auto dH = [&](double a) { return 2.0 * std::sin(a) * (std::sin(a) - nu * std::cos(a)); };
        double lo = 1e-12, hi = pi() / 2.0;
        double a = std::min(1.5 * nu, 0.5 * (lo + hi));
        for (int it = 0; it < max_iter; ++it) {
            double h = H(a), dh = dH(a);
            if (h < 0)
                lo = a;
            else
                hi = a;
            double step = (dh != 0.0) ? h / dh : 0.0;
            double next = a - step;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - a) < 1e-16 * std::max(1.0, a)) {
                a = next;
                break;
            }
            a = next;
        }
        return rho * a / std::sin(a);
    }

    // root near pi: solve in e = pi - alpha on (0, pi/2);
    // G(e) = pi - e + sin e cos e - nu sin^2 e, strictly decreasing
    auto G = [&](double e) { return pi() - e + std::sin(e) * std::cos(e) - nu * std::sin(e) * std::sin(e); };
    auto dG = [&](double e) {
        double s = std::sin(e), c = std::cos(e);
        return -2.0 * s * s - 2.0 * nu * s * c;
    };
    double lo = 0.0, hi = pi() / 2.0;
    double e = std::sqrt(pi() / nu);  // asymptotic start
    if (!(e > lo && e < hi)) e = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        double g = G(e), dg = dG(e);
        if (g > 0)
            lo = e;
        else
            hi = e;
        double step = (dg != 0.0) ? g / dg : 0.0;
        double next = e - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - e) < 1e-16 * std::max(1e-30, e)) {
            e = next;
            break;
        }
        e = next;
    }
    if (e <= 0.0) throw numeric_error("cc_distance: solver failed to converge (nu=" + std::to_string(nu) + ")");
    return rho * (pi() - e) / std::sin(e);
}

}  // namespace detail

// Carnot-Caratheodory distance; guaranteed absolute tolerance 1e-8 (the
// solver is safeguarded and in practice reaches ~1e-14 relative).
inline double cc_distance(const Point& p, const Point& q) {
    if (p.dim != 3 || q.dim != 3) throw input_error("cc_distance: points must lie in R^3");
    Point w = h_compose(h_inverse(p), q);
    return detail::cc_distance_origin(w[0], w[1], w[2]);
}

// Kohn Laplacian X^2 u + Y^2 u from the field's gradient/Hessian oracles.
inline double kohn_laplacian(const ScalarField& u, const Point& p) {
    Mat3 h = u.hessian(p);
    double x = p[0], y = p[1];
    return h[0][0] + h[1][1] + 4.0 * y * h[0][2] - 4.0 * x * h[1][2] +
           4.0 * (x * x + y * y) * h[2][2];
}

class HeisenbergImpl : public SpaceImpl {
public:
    int ambient_dim() const override { return 3; }

    double distance(const Point& p, const Point& q) const override { return cc_distance(p, q); }

    bool metric_is_euclidean() const override { return false; }

    // Rejection sampling over the bounding box of B_r(o), translated to the
    // base point by the (measure-preserving) left translation. One sample
    // set feeds both mass and integral so the average is consistent.
    BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                               const EffortBudget& budget) const override {
        double tb = h_t_bound() * r * r;
        double boxvol = (2.0 * r) * (2.0 * r) * (2.0 * tb);
        std::uint64_t salt = hash_double(r) ^ (hash_double(x[0]) * 3) ^ (hash_double(x[1]) * 5) ^
                             (hash_double(x[2]) * 7);
        RatioAccumulator acc = mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
            double xi = rng.uniform(-r, r);
            double eta = rng.uniform(-r, r);
            double tau = rng.uniform(-tb, tb);
            // quick rejects before the geodesic solve
            if (xi * xi + eta * eta >= r * r) return {0.0, 0.0};
            if (detail::cc_distance_origin(xi, eta, tau) >= r) return {0.0, 0.0};
            double a = 0.0;
            if (f) a = detail::eval_checked(*f, h_compose(x, Point{xi, eta, tau})) * boxvol;
            return {a, boxvol};
        });
        BallEstimate e;
        e.method = EstimateMethod::monte_carlo;
        e.samples_used = acc.n;
        e.sigma_k = budget.mc_sigma_k;
        e.mass = acc.mean_b();
        e.mass_error = budget.mc_sigma_k * acc.se_mean_b();
        if (f) {
            e.integral = acc.mean_a();
            e.abs_error = budget.mc_sigma_k * acc.se_mean_a();
            e.average_error = budget.mc_sigma_k * acc.se_ratio();
        }
        return e;
    }

    std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                 std::uint64_t seed) const override {
        EuclideanLebesgueImpl base(3);  // Lebesgue weights; the metric stays CC
        return base.discretize(region, resolution, seed);
    }

    json descriptor() const override { return json{{"kind", "heisenberg"}}; }
};

inline Space heisenberg_cc() { return Space(std::make_shared<HeisenbergImpl>()); }

// ---------------------------------------------------------------------------
// Frozen unit-ball constant c = (1/2) avg_{B_1(o)} x^2 dL^3
// ---------------------------------------------------------------------------

struct HeisenbergConstants {
    double c_estimate = 0.0;
    double std_error = 0.0;  // one standard error of c_estimate
    std::int64_t samples = 0;
    std::uint64_t seed = 0;
};

inline HeisenbergConstants estimate_heisenberg_constants(std::int64_t samples, std::uint64_t seed) {
    EffortBudget budget;
    budget.max_evals = samples;
    budget.target_error = 0.0;  // spend the full sample budget
    budget.seed = seed;
    double tb = h_t_bound();
    RatioAccumulator acc = mc_run(budget, 0xC0157A7ull, [&](SplitMix64& rng) -> std::pair<double, double> {
        double xi = rng.uniform(-1.0, 1.0);
        double eta = rng.uniform(-1.0, 1.0);
        double tau = rng.uniform(-tb, tb);
        if (xi * xi + eta * eta >= 1.0) return {0.0, 0.0};
        if (detail::cc_distance_origin(xi, eta, tau) >= 1.0) return {0.0, 0.0};
        return {xi * xi, 1.0};
    });
    HeisenbergConstants hc;
    hc.c_estimate = 0.5 * acc.sum_a / acc.sum_b;
    hc.std_error = 0.5 * acc.se_ratio();
    hc.samples = acc.n;
    hc.seed = seed;
    return hc;
}

inline void save_heisenberg_constants(const HeisenbergConstants& hc, const std::string& path) {
    json j;
    j["c_estimate"] = hc.c_estimate;
    j["std_error"] = hc.std_error;
    j["samples"] = hc.samples;
    j["seed"] = hc.seed;
    std::ofstream out(path);
    if (!out) throw input_error("cannot write constants file " + path);
    out << j.dump(2) << "\n";
}

inline HeisenbergConstants load_heisenberg_constants(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("constants file missing: " + path);
    json j = json::parse(in);
    HeisenbergConstants hc;
    hc.c_estimate = j.at("c_estimate").get<double>();
    hc.std_error = j.at("std_error").get<double>();
    hc.samples = j.at("samples").get<std::int64_t>();
    hc.seed = j.at("seed").get<std::uint64_t>();
    return hc;
}

// Seeded estimates of integrals of monomials over B_r(o) (not averages),
// with one-sigma standard errors. Used by the ball symmetry checks.
struct MomentEstimate {
    double value = 0.0;
    double se = 0.0;
};

inline std::vector<MomentEstimate> heisenberg_ball_moments(
    double r, const std::vector<std::function<double(const Point&)>>& integrands,
    std::int64_t samples, std::uint64_t seed) {
    double tb = h_t_bound() * r * r;
    double boxvol = (2.0 * r) * (2.0 * r) * (2.0 * tb);
    constexpr std::int64_t kChunk = 32768;
    std::int64_t chunks = std::max<std::int64_t>(1, samples / kChunk);
    std::size_t m = integrands.size();
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(chunks)),
        sqs(static_cast<std::size_t>(chunks));
    parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t k) {
        SplitMix64 rng(mix_seed(seed, k));
        std::vector<double> s(m, 0.0), s2(m, 0.0);
        for (std::int64_t i = 0; i < kChunk; ++i) {
            double xi = rng.uniform(-r, r);
            double eta = rng.uniform(-r, r);
            double tau = rng.uniform(-tb, tb);
            bool in = xi * xi + eta * eta < r * r &&
                      detail::cc_distance_origin(xi, eta, tau) < r;
            if (!in) continue;
            Point p{xi, eta, tau};
            for (std::size_t j = 0; j < m; ++j) {
                double v = integrands[j](p);
                s[j] += v;
                s2[j] += v * v;
            }
        }
        sums[k] = std::move(s);
        sqs[k] = std::move(s2);
    });
    std::int64_t n = chunks * kChunk;
    std::vector<MomentEstimate> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::int64_t k = 0; k < chunks; ++k) {
            s += sums[static_cast<std::size_t>(k)][j];
            s2 += sqs[static_cast<std::size_t>(k)][j];
        }
        double mean = s / n;
        double var = std::max(0.0, (s2 - n * mean * mean) / (n - 1.0));
        out[j].value = boxvol * mean;
        out[j].se = boxvol * std::sqrt(var / n);
    }
    return out;
}

}  // namespace amv
