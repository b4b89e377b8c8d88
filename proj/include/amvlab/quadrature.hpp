#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "common.hpp"

namespace amv {

struct GaussRule {
    std::vector<double> nodes;  // in (-1,1)
    std::vector<double> weights;
};

// Gauss-Legendre nodes by Newton iteration on P_n. Cached per order.
inline const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    GaussRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi() * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    auto [pos, _] = cache.emplace(n, std::move(rule));
    return pos->second;
}

// Fixed-order Gauss-Legendre on [a,b].
template <typename F>
double gl_integrate(const F& f, double a, double b, int order) {
    const GaussRule& rule = gauss_legendre(order);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        s += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return s * half;
}

// All pair integrators evaluate one callable returning
// (integrand value, measure density value) and accumulate both sums over
// the SAME node set, which is what makes integral/mass a consistent ball
// average (constants average to themselves bitwise).
struct QuadPairResult {
    double integral = 0.0;
    double mass = 0.0;
    double integral_error = 0.0;
    double mass_error = 0.0;
    std::int64_t evals = 0;
};

namespace detail {

// One Gauss-Kronrod 15 panel for a pair integrand: Kronrod values for both
// components plus embedded Gauss-7 error estimates, one evaluation per
// node. Boost stores the nonnegative abscissae ascending with the Gauss
// nodes at even indices.
template <typename F>
inline void gk15_pair(const F& fab, double a, double b, double out[4]) {
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    using G7 = boost::math::quadrature::gauss<double, 7>;
    const auto& kx = GK::abscissa();
    const auto& kw = GK::weights();
    const auto& gw = G7::weights();
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    auto c = fab(mid);
    double ka = kw[0] * c.first, kb = kw[0] * c.second;
    double ga = gw[0] * c.first, gb = gw[0] * c.second;
    for (std::size_t i = 1; i < kx.size(); ++i) {
        double dx = half * kx[i];
        auto p1 = fab(mid - dx);
        auto p2 = fab(mid + dx);
        double sa = p1.first + p2.first, sb = p1.second + p2.second;
        ka += kw[i] * sa;
        kb += kw[i] * sb;
        if (i % 2 == 0) {
            ga += gw[i / 2] * sa;
            gb += gw[i / 2] * sb;
        }
    }
    out[0] = ka * half;
    out[1] = kb * half;
    out[2] = std::abs(ka - ga) * half;
    out[3] = std::abs(kb - gb) * half;
}

}  // namespace detail

// Adaptive 1-D pair integration: panels split at the supplied break points
// (field singularities, ball edges) and refine where the embedded error of
// either component demands; both sums run over the identical final panels.
template <typename F>
QuadPairResult integrate_1d_pair(const F& fab, double a, double b,
                                 const std::vector<double>& breaks = {}, double tol = 5e-13,
                                 int max_depth = 28) {
    QuadPairResult out;
    if (!(b > a)) return out;
    std::vector<double> pts{a, b};
    for (double s : breaks)
        if (s > a && s < b) pts.push_back(s);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    std::int64_t evals = 0;
    auto counted = [&](double x) {
        ++evals;
        auto p = fab(x);
        if (!std::isfinite(p.first) || !std::isfinite(p.second))
            throw evaluation_error("integrate_1d: non-finite integrand at x=" + std::to_string(x));
        return p;
    };

    struct Seg {
        double a, b;
        int depth;
    };
    std::vector<Seg> stack;
    for (std::size_t k = pts.size(); k-- > 1;) stack.push_back({pts[k - 1], pts[k], 0});
    double scale = std::abs(b - a);
    while (!stack.empty()) {
        Seg s = stack.back();
        stack.pop_back();
        double vals[4];
        detail::gk15_pair(counted, s.a, s.b, vals);
        bool good = (vals[2] + vals[3]) <= tol * (1.0 + std::abs(vals[0]) + std::abs(vals[1])) ||
                    (s.b - s.a) < 1e-14 * scale || s.depth >= max_depth;
        if (good) {
            out.integral += vals[0];
            out.mass += vals[1];
            out.integral_error += vals[2];
            out.mass_error += vals[3];
        } else {
            double m = 0.5 * (s.a + s.b);
            stack.push_back({m, s.b, s.depth + 1});
            stack.push_back({s.a, m, s.depth + 1});
        }
    }
    out.evals = evals;
    return out;
}

// Product quadrature for a disk B_r(0) in polar coordinates: Gauss-Legendre
// radially, trapezoid in the angle (spectrally accurate for periodic
// integrands). The error estimate compares against the half-order rule.
// fab takes (rho, theta) relative to the center.
template <typename F>
QuadPairResult disk_pair_quadrature(const F& fab, double r, int n_rho = 48, int n_theta = 96) {
    auto run = [&](int nr, int nt, double& oa, double& ob) {
        const GaussRule& rule = gauss_legendre(nr);
        double sa = 0.0, sb = 0.0;
        for (int it = 0; it < nt; ++it) {
            double theta = 2.0 * pi() * it / nt;
            double ra = 0.0, rb = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                double rho = 0.5 * r * (1.0 + rule.nodes[i]);
                auto [va, vb] = fab(rho, theta);
                ra += rule.weights[i] * va * rho;
                rb += rule.weights[i] * vb * rho;
            }
            sa += ra;
            sb += rb;
        }
        double factor = 0.5 * r * (2.0 * pi() / nt);
        oa = sa * factor;
        ob = sb * factor;
    };
    QuadPairResult out;
    double hi_a, hi_b, lo_a, lo_b;
    run(n_rho, n_theta, hi_a, hi_b);
    run(std::max(4, n_rho / 2), std::max(8, n_theta / 2), lo_a, lo_b);
    out.integral = hi_a;
    out.mass = hi_b;
    out.integral_error = std::abs(hi_a - lo_a);
    out.mass_error = std::abs(hi_b - lo_b);
    out.evals = static_cast<std::int64_t>(n_rho) * n_theta +
                static_cast<std::int64_t>(std::max(4, n_rho / 2)) * std::max(8, n_theta / 2);
    return out;
}

// Product quadrature for a ball B_r(0) in R^3: GL in radius, GL in cos(phi),
// trapezoid in theta. fab takes (x,y,z) offsets relative to the center.
template <typename F>
QuadPairResult ball3_pair_quadrature(const F& fab, double r, int n_rho = 24, int n_mu = 24,
                                     int n_theta = 48) {
    auto run = [&](int nr, int nm, int nt, double& oa, double& ob) {
        const GaussRule& rad = gauss_legendre(nr);
        const GaussRule& mu = gauss_legendre(nm);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < rad.nodes.size(); ++i) {
            double rho = 0.5 * r * (1.0 + rad.nodes[i]);
            double wr = rad.weights[i] * 0.5 * r * rho * rho;
            for (std::size_t j = 0; j < mu.nodes.size(); ++j) {
                double cphi = mu.nodes[j];
                double sphi = std::sqrt(std::max(0.0, 1.0 - cphi * cphi));
                double wm = mu.weights[j] * (2.0 * pi() / nt);
                for (int k = 0; k < nt; ++k) {
                    double theta = 2.0 * pi() * k / nt;
                    auto [va, vb] = fab(rho * sphi * std::cos(theta), rho * sphi * std::sin(theta),
                                        rho * cphi);
                    sa += wr * wm * va;
                    sb += wr * wm * vb;
                }
            }
        }
        oa = sa;
        ob = sb;
    };
    QuadPairResult out;
    double hi_a, hi_b, lo_a, lo_b;
    run(n_rho, n_mu, n_theta, hi_a, hi_b);
    run(std::max(4, n_rho / 2), std::max(4, n_mu / 2), std::max(8, n_theta / 2), lo_a, lo_b);
    out.integral = hi_a;
    out.mass = hi_b;
    out.integral_error = std::abs(hi_a - lo_a);
    out.mass_error = std::abs(hi_b - lo_b);
    out.evals = static_cast<std::int64_t>(n_rho) * n_mu * n_theta +
                static_cast<std::int64_t>(n_rho / 2) * (n_mu / 2) * (n_theta / 2);
    return out;
}

// single-integrand conveniences
struct Quad1DResult {
    double value = 0.0;
    double error = 0.0;
    std::int64_t evals = 0;
};

template <typename F>
Quad1DResult integrate_1d(const F& f, double a, double b, const std::vector<double>& breaks = {},
                          double tol = 5e-13) {
    QuadPairResult p =
        integrate_1d_pair([&](double x) { return std::pair<double, double>(f(x), 0.0); }, a, b, breaks, tol);
    return {p.integral, p.integral_error, p.evals};
}

}  // namespace amv
