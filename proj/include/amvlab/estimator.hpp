#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "common.hpp"
#include "field.hpp"
#include "space.hpp"

namespace amv {

// Geometric radius schedule r_k = r0 * ratio^k, k = 0..count-1. Geometric
// decay keeps the log-log divergence regression well conditioned.
struct RadiusSchedule {
    double r0 = 0.25;
    double ratio = 0.7;
    int count = 12;

    RadiusSchedule() = default;
    RadiusSchedule(double r0_, double ratio_, int count_) : r0(r0_), ratio(ratio_), count(count_) {
        validate();
    }
    void validate() const {
        if (!(r0 > 0.0)) throw input_error("RadiusSchedule: r0 must be positive");
        if (!(ratio > 0.0 && ratio < 1.0)) throw input_error("RadiusSchedule: ratio must lie in (0,1)");
        if (count < 4) throw input_error("RadiusSchedule: count must be at least 4");
    }
    std::vector<double> radii() const {
        std::vector<double> rs(static_cast<std::size_t>(count));
        double r = r0;
        for (int k = 0; k < count; ++k, r *= ratio) rs[static_cast<std::size_t>(k)] = r;
        return rs;
    }
};

inline RadiusSchedule default_schedule(double feature_distance) {
    return RadiusSchedule(0.5 * feature_distance, 0.7, 12);
}

enum class Verdict { converged, divergent, inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::converged: return "converged";
        case Verdict::divergent: return "divergent";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct TracePoint {
    double r = 0.0;
    double value = 0.0;
    double abs_error = 0.0;
};

struct AmvResult {
    std::vector<TracePoint> trace;
    Verdict verdict = Verdict::inconclusive;
    double value = std::numeric_limits<double>::quiet_NaN();
    double value_error = std::numeric_limits<double>::quiet_NaN();
    double rate = std::numeric_limits<double>::quiet_NaN();  // divergence exponent alpha
    double fit_residual = std::numeric_limits<double>::quiet_NaN();
    double regression_r2 = std::numeric_limits<double>::quiet_NaN();
    int fit_degree = 0;
    int fit_window = 0;
};

// Extrapolation thresholds; defaults match the fixed acceptance settings.
// residual_floor_rel treats noise-free backends as carrying that much
// relative model truncation, so traces with genuine higher-order r-terms
// still classify as converged once a fit reaches it.
struct FitOptions {
    double residual_factor = 5.0;   // accept fit when max residual <= factor * max abs_error
    double residual_floor_rel = 1e-7;
    double divergence_alpha = -0.5;
    double divergence_r2 = 0.99;
    int max_degree = 4;
    int tail_window = 4;            // limsup/liminf window
};

struct RadiusValue {
    double value = 0.0;
    double abs_error = 0.0;
    BallEstimate estimate;
};

// Delta_{mu,r} u(x) = r^-2 (ball average of u - u(x)); the error is the
// propagated integration error scaled by r^-2, so budget exhaustion shows
// up as an enlarged abs_error rather than a failure. Analytic backends go
// through the centered route: subtracting u(x) from the average after the
// fact loses up to eps/r^4 to cancellation, the centered integral does not.
inline RadiusValue amv_at_radius(const Space& space, const ScalarField& u, const Point& x, double r,
                                 const EffortBudget& budget = {}) {
    check_point(space, x, "amv_at_radius");
    if (!(r > 0.0)) throw input_error("amv_at_radius: radius must be positive");
    if (!space.in_support(x)) throw domain_error("amv_at_radius: point " + x.str() + " outside supp mu");
    RadiusValue rv;
    if (auto centered = space.impl().centered_ball_estimate(x, r, u)) {
        auto [num, mass] = *centered;
        if (!(mass > 0.0)) throw domain_error("amv_at_radius: zero ball mass at " + x.str());
        rv.value = num / (mass * r * r);
        rv.abs_error = 0.0;
        rv.estimate.mass = mass;
        rv.estimate.integral = num + u(x) * mass;
        rv.estimate.method = EstimateMethod::analytic;
        return rv;
    }
    BallEstimate est = ball_integrate(space, x, r, u, budget);
    double ux = u(x);
    if (!std::isfinite(ux)) throw evaluation_error("amv_at_radius: non-finite u(x) at " + x.str());
    rv.value = (est.average() - ux) / (r * r);
    rv.abs_error = est.average_error / (r * r);
    rv.estimate = est;
    return rv;
}

namespace detail {

struct PolyFit {
    bool ok = false;
    double intercept = 0.0;
    double intercept_se = 0.0;
    double max_residual = 0.0;
    int degree = 0;
    int window = 0;
};

// Weighted least squares of value against powers of (r / rmax); normal
// equations are fine at degree <= 4 with the scaled basis.
inline PolyFit weighted_polyfit(const std::vector<TracePoint>& pts, int degree) {
    PolyFit out;
    int n = static_cast<int>(pts.size());
    int m = degree + 1;
    if (n < m + 2) return out;  // demand 2 dof so near-interpolation cannot fake convergence
    double vmax = 0.0, rmax = 0.0;
    for (const auto& p : pts) {
        vmax = std::max(vmax, std::abs(p.value));
        rmax = std::max(rmax, p.r);
    }
    double floor_err = 1e-13 * std::max(vmax, 1e-30) + 1e-300;
    std::vector<double> sigma(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        sigma[static_cast<std::size_t>(i)] = std::max(pts[static_cast<std::size_t>(i)].abs_error, floor_err);

    std::vector<std::vector<long double>> ata(static_cast<std::size_t>(m),
                                              std::vector<long double>(static_cast<std::size_t>(m), 0.0L));
    std::vector<long double> atb(static_cast<std::size_t>(m), 0.0L);
    for (int i = 0; i < n; ++i) {
        double w = 1.0 / (sigma[static_cast<std::size_t>(i)] * sigma[static_cast<std::size_t>(i)]);
        double s = pts[static_cast<std::size_t>(i)].r / rmax;
        std::vector<double> phi(static_cast<std::size_t>(m));
        double pw = 1.0;
        for (int j = 0; j < m; ++j, pw *= s) phi[static_cast<std::size_t>(j)] = pw;
        for (int a = 0; a < m; ++a) {
            atb[static_cast<std::size_t>(a)] += w * phi[static_cast<std::size_t>(a)] * pts[static_cast<std::size_t>(i)].value;
            for (int b = 0; b < m; ++b)
                ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] +=
                    w * phi[static_cast<std::size_t>(a)] * phi[static_cast<std::size_t>(b)];
        }
    }
    // solve and invert by Gauss-Jordan with the identity appended
    std::vector<std::vector<long double>> aug(static_cast<std::size_t>(m),
                                              std::vector<long double>(static_cast<std::size_t>(2 * m + 1), 0.0L));
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) aug[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = ata[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
        aug[static_cast<std::size_t>(a)][static_cast<std::size_t>(m + a)] = 1.0L;
        aug[static_cast<std::size_t>(a)][static_cast<std::size_t>(2 * m)] = atb[static_cast<std::size_t>(a)];
    }
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int rrow = col + 1; rrow < m; ++rrow)
            if (std::abs(static_cast<double>(aug[static_cast<std::size_t>(rrow)][static_cast<std::size_t>(col)])) >
                std::abs(static_cast<double>(aug[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)])))
                piv = rrow;
        if (aug[static_cast<std::size_t>(piv)][static_cast<std::size_t>(col)] == 0.0L) return out;
        std::swap(aug[static_cast<std::size_t>(piv)], aug[static_cast<std::size_t>(col)]);
        long double d = aug[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
        for (auto& v : aug[static_cast<std::size_t>(col)]) v /= d;
        for (int rrow = 0; rrow < m; ++rrow) {
            if (rrow == col) continue;
            long double fct = aug[static_cast<std::size_t>(rrow)][static_cast<std::size_t>(col)];
            if (fct == 0.0L) continue;
            for (int b = 0; b <= 2 * m; ++b)
                aug[static_cast<std::size_t>(rrow)][static_cast<std::size_t>(b)] -=
                    fct * aug[static_cast<std::size_t>(col)][static_cast<std::size_t>(b)];
        }
    }
    std::vector<double> coef(static_cast<std::size_t>(m));
    for (int a = 0; a < m; ++a) coef[static_cast<std::size_t>(a)] = static_cast<double>(aug[static_cast<std::size_t>(a)][static_cast<std::size_t>(2 * m)]);
    out.intercept = coef[0];
    out.intercept_se = std::sqrt(std::max(0.0, static_cast<double>(aug[0][static_cast<std::size_t>(m)])));
    for (int i = 0; i < n; ++i) {
        double s = pts[static_cast<std::size_t>(i)].r / rmax, fit = 0.0, pw = 1.0;
        for (int j = 0; j < m; ++j, pw *= s) fit += coef[static_cast<std::size_t>(j)] * pw;
        out.max_residual = std::max(out.max_residual, std::abs(pts[static_cast<std::size_t>(i)].value - fit));
    }
    out.degree = degree;
    out.window = n;
    out.ok = true;
    return out;
}

struct LogLogFit {
    bool ok = false;
    double slope = 0.0;
    double r2 = 0.0;
};

inline LogLogFit loglog_regression(const std::vector<TracePoint>& pts) {
    LogLogFit out;
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : pts) {
        if (std::abs(p.value) <= 10.0 * p.abs_error || p.value == 0.0) continue;
        xy.emplace_back(std::log(p.r), std::log(std::abs(p.value)));
    }
    if (xy.size() < 4) return out;
    double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (auto [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    double den = n * sxx - sx * sx;
    if (den == 0.0) return out;
    out.slope = (n * sxy - sx * sy) / den;
    double ss_tot = syy - sy * sy / n;
    double b = (sy - out.slope * sx) / n;
    double ss_res = 0.0;
    for (auto [x, y] : xy) {
        double e = y - (out.slope * x + b);
        ss_res += e * e;
    }
    out.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    out.ok = true;
    return out;
}

}  // namespace detail

// Deterministic classification of a finished trace: polynomial-in-r fits of
// increasing degree (full window, then the small-radius tail), then the
// power-law divergence regression, then inconclusive. The linear model
// A + B r mirrors the O(r) Taylor remainders of the expansions it checks;
// higher degrees are tried only when residuals demand them.
inline AmvResult classify_trace(std::vector<TracePoint> trace, const FitOptions& opts = {}) {
    if (trace.size() < 4) throw input_error("classify: trace must have at least 4 points");
    std::sort(trace.begin(), trace.end(), [](const TracePoint& a, const TracePoint& b) { return a.r > b.r; });
    AmvResult res;
    res.trace = trace;

    std::vector<TracePoint> tail(trace.end() - static_cast<std::ptrdiff_t>(
                                                   std::min<std::size_t>(trace.size(), std::max<std::size_t>(7, trace.size() / 2))),
                                 trace.end());

    for (const auto* window : {&trace, &tail}) {
        double vmax = 0.0;
        for (const auto& p : *window) vmax = std::max(vmax, std::abs(p.value));
        double max_err = opts.residual_floor_rel * vmax;
        for (const auto& p : *window) max_err = std::max(max_err, p.abs_error);
        for (int deg = 1; deg <= opts.max_degree; ++deg) {
            detail::PolyFit fit = detail::weighted_polyfit(*window, deg);
            if (!fit.ok) break;
            if (fit.max_residual <= opts.residual_factor * max_err) {
                res.verdict = Verdict::converged;
                res.value = fit.intercept;
                res.value_error = std::max(fit.intercept_se, fit.max_residual);
                res.fit_residual = fit.max_residual;
                res.fit_degree = fit.degree;
                res.fit_window = fit.window;
                return res;
            }
        }
    }

    // the divergence rate is a small-radius property: regress on the tail,
    // where the leading power law is not polluted by O(1) terms
    detail::LogLogFit ll = detail::loglog_regression(tail);
    if (!ll.ok) ll = detail::loglog_regression(trace);
    if (ll.ok && ll.slope <= opts.divergence_alpha && ll.r2 >= opts.divergence_r2) {
        res.verdict = Verdict::divergent;
        res.rate = ll.slope;
        res.regression_r2 = ll.r2;
        return res;
    }
    res.verdict = Verdict::inconclusive;
    if (ll.ok) {
        res.rate = ll.slope;
        res.regression_r2 = ll.r2;
    }
    return res;
}

inline Verdict classify_convergence(const std::vector<TracePoint>& trace, const FitOptions& opts = {}) {
    return classify_trace(trace, opts).verdict;
}

struct trace_error : evaluation_error {
    trace_error(const std::string& what, std::vector<TracePoint> partial)
        : evaluation_error(what), partial_trace(std::move(partial)) {}
    std::vector<TracePoint> partial_trace;
};

inline std::vector<TracePoint> amv_trace(const Space& space, const ScalarField& u, const Point& x,
                                         const RadiusSchedule& schedule, const EffortBudget& budget) {
    schedule.validate();
    std::vector<double> rs = schedule.radii();
    std::vector<std::optional<TracePoint>> pts(rs.size());
    std::vector<std::string> errors(rs.size());
    parallel_for(rs.size(), [&](std::size_t k) {
        try {
            EffortBudget b = budget;
            b.seed = mix_seed(budget.seed, k + 1);
            RadiusValue rv = amv_at_radius(space, u, x, rs[k], b);
            pts[k] = TracePoint{rs[k], rv.value, rv.abs_error};
        } catch (const error& e) {
            errors[k] = e.what();
        }
    });
    std::vector<TracePoint> trace;
    for (std::size_t k = 0; k < rs.size(); ++k) {
        if (!errors[k].empty())
            throw trace_error("amv_limit: radius " + std::to_string(rs[k]) + " failed: " + errors[k],
                              trace);
        trace.push_back(*pts[k]);
    }
    return trace;
}

// The r -> 0 study: evaluates the schedule, extrapolates, classifies.
inline AmvResult amv_limit(const Space& space, const ScalarField& u, const Point& x,
                           const RadiusSchedule& schedule, const EffortBudget& budget = {},
                           const FitOptions& opts = {}) {
    return classify_trace(amv_trace(space, u, x, schedule, budget), opts);
}

// Tail-window extremum estimates of the limsup/liminf variants. These are
// heuristics: exact only when Delta_{mu,r} is eventually monotone in r, and
// no finite procedure can do better for oscillatory traces.
struct TailEstimate {
    double value = 0.0;
    std::vector<TracePoint> trace;
};

inline TailEstimate amv_upper(const Space& space, const ScalarField& u, const Point& x,
                              const RadiusSchedule& schedule, const EffortBudget& budget = {},
                              int window = 4) {
    TailEstimate out;
    out.trace = amv_trace(space, u, x, schedule, budget);
    std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, window)), out.trace.size());
    out.value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = out.trace.size() - w; k < out.trace.size(); ++k)
        out.value = std::max(out.value, out.trace[k].value);
    return out;
}

inline TailEstimate amv_lower(const Space& space, const ScalarField& u, const Point& x,
                              const RadiusSchedule& schedule, const EffortBudget& budget = {},
                              int window = 4) {
    TailEstimate out;
    out.trace = amv_trace(space, u, x, schedule, budget);
    std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, window)), out.trace.size());
    out.value = std::numeric_limits<double>::infinity();
    for (std::size_t k = out.trace.size() - w; k < out.trace.size(); ++k)
        out.value = std::min(out.value, out.trace[k].value);
    return out;
}

}  // namespace amv
