#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cloud.hpp"
#include "common.hpp"
#include "estimator.hpp"
#include "expr.hpp"
#include "heisenberg.hpp"
#include "operators.hpp"
#include "polynomial.hpp"
#include "spaces.hpp"

namespace amv {

enum class Provenance { paper, trivial, derived };

inline const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::paper: return "paper";
        case Provenance::trivial: return "trivial";
        case Provenance::derived: return "derived";
    }
    return "?";
}

struct SuiteCase {
    std::string case_id;
    Provenance provenance;
    bool is_verdict_case = false;
    double expected = 0.0;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string expected_verdict, measured_verdict;
    bool pass = false;

    static SuiteCase value(std::string id, Provenance prov, double expected, double measured,
                           double tolerance) {
        SuiteCase c;
        c.case_id = std::move(id);
        c.provenance = prov;
        c.expected = expected;
        c.measured = measured;
        c.tolerance = tolerance;
        c.pass = std::isfinite(measured) && std::abs(measured - expected) <= tolerance;
        return c;
    }
    static SuiteCase verdict(std::string id, Provenance prov, Verdict expected, Verdict measured) {
        SuiteCase c;
        c.case_id = std::move(id);
        c.provenance = prov;
        c.is_verdict_case = true;
        c.expected_verdict = verdict_name(expected);
        c.measured_verdict = verdict_name(measured);
        c.pass = expected == measured;
        return c;
    }
};

struct SuiteReport {
    std::string suite;
    std::vector<SuiteCase> cases;
    json environment;
    double duration_seconds = 0.0;  // volatile; excluded from serialization

    bool all_pass() const {
        for (const auto& c : cases)
            if (!c.pass) return false;
        return true;
    }

    // Deterministic serialization: identical inputs give byte-identical
    // reports, so wall-clock duration stays out of the file.
    json to_json() const {
        json j;
        j["schema_version"] = 1;
        j["suite"] = suite;
        j["environment"] = environment;
        json arr = json::array();
        for (const auto& c : cases) {
            json cj;
            cj["case_id"] = c.case_id;
            cj["expected_provenance"] = provenance_name(c.provenance);
            if (c.is_verdict_case) {
                cj["expected"] = c.expected_verdict;
                cj["measured"] = c.measured_verdict;
            } else {
                cj["expected"] = c.expected;
                cj["measured"] = c.measured;
                cj["tolerance"] = c.tolerance;
            }
            cj["pass"] = c.pass;
            arr.push_back(cj);
        }
        j["cases"] = arr;
        j["all_pass"] = all_pass();
        return j;
    }
};

struct SuiteOptions {
    std::uint64_t seed = 0xA3117;
    double budget_scale = 1.0;  // multiplies Monte Carlo sample budgets
    std::optional<HeisenbergConstants> constants;
    std::string constants_path;
};

namespace detail {

inline Polynomial random_polynomial(int nvars, int max_degree, SplitMix64& rng) {
    Polynomial p(nvars);
    for (int a = 0; a <= max_degree; ++a)
        for (int b = 0; b <= (nvars >= 2 ? max_degree - a : 0); ++b)
            for (int c = 0; c <= (nvars >= 3 ? max_degree - a - b : 0); ++c)
                p.add_term(rng.uniform(-1.0, 1.0), {a, b, c});
    return p;
}

inline Point random_point(int dim, double lo, double hi, SplitMix64& rng) {
    Point p = Point::zero(dim);
    for (int i = 0; i < dim; ++i) p[i] = rng.uniform(lo, hi);
    return p;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Euclidean identity: AMV limit = Laplacian / (2(n+2)) on R^n
// ---------------------------------------------------------------------------

inline SuiteReport suite_euclid(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "euclid";
    RadiusSchedule sched(0.25, 0.7, 12);
    rep.environment = {{"seed", opts.seed}, {"schedule", {{"r0", sched.r0}, {"ratio", sched.ratio}, {"count", sched.count}}}};
    const double tol = 1e-8;

    {
        Polynomial x = Polynomial::coordinate(1, 0);
        AmvResult res = amv_limit(euclidean_lebesgue(1), ScalarField::from_polynomial(x * x),
                                  Point{0.37}, sched);
        rep.cases.push_back(SuiteCase::value("n1_x2_third", Provenance::derived, 1.0 / 3.0, res.value, tol));
    }
    {
        Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);
        AmvResult res = amv_limit(euclidean_lebesgue(2), ScalarField::from_polynomial(x * x - y * y),
                                  Point{0.4, -0.9}, sched);
        rep.cases.push_back(SuiteCase::value("n2_harmonic_zero", Provenance::trivial, 0.0, res.value, tol));
    }
    {
        Polynomial r2(3);
        for (int i = 0; i < 3; ++i) {
            Polynomial c = Polynomial::coordinate(3, i);
            r2 = r2 + c * c;
        }
        AmvResult res = amv_limit(euclidean_lebesgue(3), ScalarField::from_polynomial(r2),
                                  Point{0.1, 0.2, -0.3}, sched);
        rep.cases.push_back(SuiteCase::value("n3_radial_0p6", Provenance::derived, 0.6, res.value, tol));
    }
    SplitMix64 rng(opts.seed);
    for (int n = 1; n <= 3; ++n) {
        Space sp = euclidean_lebesgue(n);
        for (int k = 0; k < 5; ++k) {
            Polynomial p = detail::random_polynomial(n, 4, rng);
            ScalarField u = ScalarField::from_polynomial(p);
            for (int j = 0; j < 2; ++j) {
                Point x = detail::random_point(n, -1.0, 1.0, rng);
                double want = p.laplacian_at(x) / (2.0 * (n + 2));
                AmvResult res = amv_limit(sp, u, x, sched);
                rep.cases.push_back(SuiteCase::value(
                    "n" + std::to_string(n) + "_rand" + std::to_string(k) + "_" + std::to_string(j),
                    Provenance::derived, want, res.value, tol));
            }
        }
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Weighted Lebesgue (Bose): closed form, diagonal value, general C^1 weight
// ---------------------------------------------------------------------------

namespace detail {

// mu-normalized degenerate-set moments of the weighted expansion:
// a_ij = (1/2r^2) int (y-x)_i (y-x)_j w dy / mu(B_r), b likewise first-order.
struct DegenerateMoments {
    Mat3 a{};
    Vec3 b{0, 0, 0};
};

inline DegenerateMoments weighted_moments(const Polynomial& w, const Point& x, double r) {
    DegenerateMoments m;
    double mass = ball_polynomial_integral(w, x, r);
    int n = w.nvars();
    for (int i = 0; i < n; ++i) {
        Polynomial si = Polynomial::coordinate(n, i) - Polynomial::constant(n, x[i]);
        m.b[static_cast<std::size_t>(i)] = ball_polynomial_integral(si * w, x, r) / (r * r * mass);
        for (int j = 0; j < n; ++j) {
            Polynomial sj = Polynomial::coordinate(n, j) - Polynomial::constant(n, x[j]);
            m.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                ball_polynomial_integral(si * sj * w, x, r) / (2.0 * r * r * mass);
        }
    }
    return m;
}

}  // namespace detail

inline SuiteReport suite_bose(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "bose";
    RadiusSchedule sched(0.2, 0.7, 14);
    rep.environment = {{"seed", opts.seed}, {"schedule", {{"r0", sched.r0}, {"ratio", sched.ratio}, {"count", sched.count}}}};

    Polynomial px = Polynomial::coordinate(2, 0), py = Polynomial::coordinate(2, 1);
    Polynomial wpoly = (px + py) * (px + py);
    Polynomial upoly = px * px - (px * py).scaled(3.0) + py * py;
    Space bose = weighted_lebesgue(2, WeightSpec{ScalarField::from_polynomial(wpoly), "{x=-y}"});
    ScalarField u = ScalarField::from_polynomial(upoly);

    // (a) closed form Delta_{mu,r} u = r^2 / (6 (r^2 + 2(x+y)^2)) off the diagonal
    for (Point pt : {Point{1.0, 1.0}, Point{0.5, -0.2}, Point{-1.0, 2.0}}) {
        double worst = 0.0;
        for (double r : {0.5, 0.35, 0.25, 0.18, 0.12, 0.08, 0.05, 0.02}) {
            double want = r * r / (6.0 * (r * r + 2.0 * std::pow(pt[0] + pt[1], 2)));
            double got = amv_at_radius(bose, u, pt, r).value;
            worst = std::max(worst, std::abs(got - want) / std::abs(want));
        }
        rep.cases.push_back(SuiteCase::value("closed_form_rel_" + pt.str(), Provenance::paper, 0.0,
                                             worst, 1e-8));
    }
    // (b) ball mass at the origin
    {
        double r = 0.3;
        rep.cases.push_back(SuiteCase::value("mass_at_o", Provenance::derived, pi() * std::pow(r, 4) / 2.0,
                                             ball_mass(bose, Point{0.0, 0.0}, r).mass, 1e-12));
    }
    // (c) diagonal value 1/6: u is L_w-harmonic yet not AMV harmonic
    for (Point pt : {Point{0.7, -0.7}, Point{-0.3, 0.3}}) {
        AmvResult res = amv_limit(bose, u, pt, sched);
        rep.cases.push_back(
            SuiteCase::value("diagonal_sixth_" + pt.str(), Provenance::paper, 1.0 / 6.0, res.value, 1e-6));
    }
    // (d) degenerate-set operator from analytic moments vs (Lap u + u_xy)/6
    {
        Point pt{0.4, -0.4};
        detail::DegenerateMoments m = detail::weighted_moments(wpoly, pt, 0.25);
        SplitMix64 rng(opts.seed ^ 0xB05Eu);
        for (int k = 0; k < 5; ++k) {
            Polynomial p = detail::random_polynomial(2, 3, rng);
            ScalarField f = ScalarField::from_polynomial(p);
            Mat3 h = f.hessian(pt);
            Vec3 g = f.gradient(pt);
            double via_moments = 0.0;
            for (int i = 0; i < 2; ++i) {
                via_moments += m.b[static_cast<std::size_t>(i)] * g[static_cast<std::size_t>(i)];
                for (int j = 0; j < 2; ++j)
                    via_moments += m.a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] *
                                   h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            }
            double diag_op = (h[0][0] + h[1][1] + h[0][1]) / 6.0;
            rep.cases.push_back(SuiteCase::value("diag_operator_form_" + std::to_string(k),
                                                 Provenance::paper, diag_op, via_moments, 1e-10));
            AmvResult res = amv_limit(bose, f, pt, sched);
            rep.cases.push_back(SuiteCase::value("diag_limit_vs_moments_" + std::to_string(k),
                                                 Provenance::derived, via_moments, res.value, 1e-6));
        }
    }
    // (e) general C^1 weight identity c_n L_w u / w at points with w != 0
    {
        Expression wexpr = Expression::parse("1/(1+x^2+y^2)", 2);
        ScalarField wf = wexpr.to_field();
        Space sp = weighted_lebesgue(2, WeightSpec{wf});
        Polynomial p = px * px + px * py;
        ScalarField f = ScalarField::from_polynomial(p);
        for (Point pt : {Point{0.3, 0.2}, Point{-0.5, 0.1}}) {
            Taylor2 wt = wexpr.eval_taylor(pt);
            Mat3 h = f.hessian(pt);
            Vec3 g = f.gradient(pt);
            double lap = h[0][0] + h[1][1];
            double lw = wt.v * lap + 2.0 * (wt.g[0] * g[0] + wt.g[1] * g[1]);
            double want = lw / (2.0 * (2 + 2) * wt.v);
            AmvResult res = amv_limit(sp, f, pt, sched);
            rep.cases.push_back(
                SuiteCase::value("c1_weight_identity_" + pt.str(), Provenance::derived, want, res.value, 1e-6));
        }
    }
    // (f) w == 1 reduces to the Euclidean identity
    {
        Space wone = weighted_lebesgue(2, WeightSpec{ScalarField::from_polynomial(Polynomial::constant(2, 1.0))});
        Point pt{0.2, 0.5};
        double a = amv_at_radius(wone, u, pt, 0.2).value;
        double b = amv_at_radius(euclidean_lebesgue(2), u, pt, 0.2).value;
        rep.cases.push_back(SuiteCase::value("unit_weight_reduces", Provenance::trivial, b, a, 1e-13));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Lebesgue plus a Dirac mass at the origin: the n = 1,2,3 trichotomy
// ---------------------------------------------------------------------------

inline SuiteReport suite_dirac(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "dirac";
    RadiusSchedule sched(0.15, 0.7, 16);
    rep.environment = {{"seed", opts.seed}, {"schedule", {{"r0", sched.r0}, {"ratio", sched.ratio}, {"count", sched.count}}}};
    const double tol = 1e-6;

    // masses
    {
        Space sp = lebesgue_plus_dirac(2);
        double r = 0.4;
        rep.cases.push_back(SuiteCase::value("mass_at_o_n2", Provenance::paper, 1.0 + pi() * r * r,
                                             ball_mass(sp, Point{0.0, 0.0}, r).mass, 1e-12));
        rep.cases.push_back(SuiteCase::value("mass_off_o_n2", Provenance::trivial, pi() * r * r,
                                             ball_mass(sp, Point{2.0, 0.0}, r).mass, 1e-12));
        // off-origin everything agrees with plain Lebesgue, exactly
        Polynomial px = Polynomial::coordinate(2, 0), py = Polynomial::coordinate(2, 1);
        ScalarField f = ScalarField::from_polynomial(px * py + px);
        double a = amv_at_radius(sp, f, Point{2.0, 1.0}, 0.5).value;
        double b = amv_at_radius(euclidean_lebesgue(2), f, Point{2.0, 1.0}, 0.5).value;
        rep.cases.push_back(SuiteCase::value("off_origin_equals_lebesgue", Provenance::trivial, b, a, 0.0));
    }
    // n = 3: limit 0 for smooth u
    {
        Space sp = lebesgue_plus_dirac(3);
        Polynomial r2(3);
        for (int i = 0; i < 3; ++i) {
            Polynomial c = Polynomial::coordinate(3, i);
            r2 = r2 + c * c;
        }
        AmvResult res = amv_limit(sp, ScalarField::from_polynomial(r2 + Polynomial::coordinate(3, 0)),
                                  Point{0.0, 0.0, 0.0}, sched);
        rep.cases.push_back(SuiteCase::value("n3_smooth_zero", Provenance::paper, 0.0, res.value, tol));
    }
    // n = 2: pi (u*(o) - u(o)) for three test functions with analytic u*(o)
    {
        Space sp = lebesgue_plus_dirac(2);
        struct Case {
            const char* id;
            std::function<double(const Point&)> f;
            double ustar, uo;
        };
        std::vector<Case> cases = {
            {"n2_jump_pi", [](const Point& p) { return (p[0] == 0.0 && p[1] == 0.0) ? 0.0 : 1.0; }, 1.0, 0.0},
            {"n2_smooth_zero", [](const Point& p) { return p[0] * p[0] + p[1] * p[1]; }, 0.0, 0.0},
            {"n2_jump_2pi", [](const Point& p) { return (p[0] == 0.0 && p[1] == 0.0) ? 3.0 : 5.0; }, 5.0, 3.0},
        };
        for (auto& c : cases) {
            AmvResult res = amv_limit(sp, ScalarField::from_function(2, c.f), Point{0.0, 0.0}, sched);
            rep.cases.push_back(SuiteCase::value(c.id, c.id == std::string("n2_smooth_zero")
                                                            ? Provenance::derived
                                                            : Provenance::paper,
                                                 pi() * (c.ustar - c.uo), res.value, tol));
        }
    }
    // n = 1: u = |y| gives 2b with b = 1/2 by exact integration
    {
        Space sp = lebesgue_plus_dirac(1);
        ScalarField absf = ScalarField::from_function(1, [](const Point& p) { return std::abs(p[0]); });
        absf.with_singularities({0.0});
        AmvResult res = amv_limit(sp, absf, Point{0.0}, sched);
        rep.cases.push_back(SuiteCase::value("n1_abs_2b", Provenance::derived, 1.0, res.value, tol));

        // the auxiliary limit b = lim r^-1 avg(u - u(o)) exposed as its own fit
        std::vector<TracePoint> btrace;
        for (double r : sched.radii()) {
            BallEstimate est = ball_integrate(euclidean_lebesgue(1), Point{0.0}, r, absf);
            btrace.push_back({r, est.average() / r, est.average_error / r});
        }
        AmvResult bres = classify_trace(btrace);
        rep.cases.push_back(SuiteCase::value("n1_aux_b_half", Provenance::derived, 0.5, bres.value, tol));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Heisenberg group: ball symmetries and the Kohn Laplacian constant
// ---------------------------------------------------------------------------

inline SuiteReport suite_heisenberg(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "heisenberg";

    HeisenbergConstants hc;
    if (opts.constants)
        hc = *opts.constants;
    else if (!opts.constants_path.empty())
        hc = load_heisenberg_constants(opts.constants_path);
    else
        throw input_error("suite_heisenberg: constants file missing (generate with the constants command)");

    std::int64_t moment_samples = static_cast<std::int64_t>(2.0e6 * opts.budget_scale);
    EffortBudget mc;
    mc.max_evals = static_cast<std::int64_t>(2.0e6 * opts.budget_scale);
    mc.target_error = 0.0;
    mc.seed = opts.seed;
    const double r_amv = 0.1;
    rep.environment = {{"seed", opts.seed},
                       {"moment_samples", moment_samples},
                       {"amv_budget", mc.max_evals},
                       {"amv_radius", r_amv},
                       {"constants", {{"c_estimate", hc.c_estimate}, {"std_error", hc.std_error}, {"samples", hc.samples}, {"seed", hc.seed}}}};

    Space hs = heisenberg_cc();

    // metric spot checks
    {
        SplitMix64 rng(opts.seed ^ 0xCCu);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            Point p{rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0};
            worst = std::max(worst, std::abs(cc_distance(Point{0, 0, 0}, p) - std::hypot(p[0], p[1])));
        }
        rep.cases.push_back(SuiteCase::value("cc_planar_geodesics", Provenance::derived, 0.0, worst, 1e-8));
        Point q{0.7, -0.4, 0.9};
        double lam = 1.7;
        rep.cases.push_back(SuiteCase::value(
            "cc_dilation_homogeneity", Provenance::paper, lam * cc_distance(Point{0, 0, 0}, q),
            cc_distance(Point{0, 0, 0}, h_dilate(lam, q)), 1e-10));
        double worst_li = 0.0;
        for (int k = 0; k < 100; ++k) {
            Point a = detail::random_point(3, -1, 1, rng), b = detail::random_point(3, -1, 1, rng),
                  g = detail::random_point(3, -1, 1, rng);
            worst_li = std::max(worst_li, std::abs(cc_distance(h_compose(g, a), h_compose(g, b)) -
                                                   cc_distance(a, b)));
        }
        rep.cases.push_back(SuiteCase::value("cc_left_invariance", Provenance::trivial, 0.0, worst_li, 1e-9));
    }

    // (a) ball moment symmetries at 3 sigma
    {
        std::vector<std::function<double(const Point&)>> moments = {
            [](const Point& p) { return p[0]; },
            [](const Point& p) { return p[1]; },
            [](const Point& p) { return p[2]; },
            [](const Point& p) { return p[0] * p[1]; },
            [](const Point& p) { return p[0] * p[0] - p[1] * p[1]; },
        };
        auto est = heisenberg_ball_moments(1.0, moments, moment_samples, mix_seed(opts.seed, 11));
        const char* names[] = {"moment_x", "moment_y", "moment_t", "moment_xy", "moment_x2_minus_y2"};
        for (std::size_t i = 0; i < est.size(); ++i)
            rep.cases.push_back(SuiteCase::value(names[i], Provenance::paper, 0.0, est[i].value,
                                                 3.0 * est[i].se));
    }

    // (b) frozen c against an independent re-estimate
    {
        HeisenbergConstants fresh =
            estimate_heisenberg_constants(moment_samples, mix_seed(opts.seed, 23));
        double tol = 3.0 * std::sqrt(hc.std_error * hc.std_error + fresh.std_error * fresh.std_error);
        rep.cases.push_back(
            SuiteCase::value("c_reestimate_consistency", Provenance::derived, hc.c_estimate, fresh.c_estimate, tol));
    }

    // (c) AMV / Kohn ratio equals c for quadratic test functions
    {
        Polynomial X = Polynomial::coordinate(3, 0), Y = Polynomial::coordinate(3, 1),
                   T = Polynomial::coordinate(3, 2);
        std::vector<std::pair<std::string, Polynomial>> funcs = {
            {"x2", X * X}, {"y2", Y * Y}, {"x2_plus_xy", X * X + X * Y}, {"t2", T * T}};
        std::vector<Point> base_points = {Point{0.4, -0.3, 0.2}, Point{1.1, 0.5, -0.7},
                                          Point{-0.8, 0.6, 0.4}};
        int salt = 0;
        for (auto& [name, p] : funcs) {
            ScalarField u = ScalarField::from_polynomial(p);
            for (std::size_t bi = 0; bi < base_points.size(); ++bi) {
                const Point& p0 = base_points[bi];
                double dh = kohn_laplacian(u, p0);
                EffortBudget b = mc;
                b.seed = mix_seed(opts.seed, 1000 + static_cast<std::uint64_t>(salt++));
                RadiusValue rv = amv_at_radius(hs, u, p0, r_amv, b);
                double ratio = rv.value / dh;
                double tol = std::sqrt(std::pow(rv.abs_error / dh, 2) + std::pow(3.0 * hc.std_error, 2));
                rep.cases.push_back(SuiteCase::value("kohn_ratio_" + name + "_p" + std::to_string(bi),
                                                     Provenance::derived, hc.c_estimate, std::abs(ratio),
                                                     tol));
            }
        }
    }

    // (d) left-invariance of the estimator (independent seeds on both sides)
    {
        Polynomial X = Polynomial::coordinate(3, 0), Y = Polynomial::coordinate(3, 1),
                   T = Polynomial::coordinate(3, 2);
        Polynomial p = X * X + X * Y + T * T;
        ScalarField u = ScalarField::from_polynomial(p);
        Point p0{0.6, -0.2, 0.3};
        ScalarField v = ScalarField::from_function(3, [p0, u](const Point& q) { return u(h_compose(p0, q)); });
        EffortBudget b1 = mc, b2 = mc;
        b1.seed = mix_seed(opts.seed, 71);
        b2.seed = mix_seed(opts.seed, 72);
        RadiusValue lhs = amv_at_radius(hs, u, p0, r_amv, b1);
        RadiusValue rhs = amv_at_radius(hs, v, Point{0, 0, 0}, r_amv, b2);
        rep.cases.push_back(SuiteCase::value("estimator_left_invariance", Provenance::paper, lhs.value,
                                             rhs.value,
                                             std::sqrt(lhs.abs_error * lhs.abs_error + rhs.abs_error * rhs.abs_error)));
    }

    // (e) the graded function x^2 is strictly lower-AMV subharmonic
    {
        Polynomial X = Polynomial::coordinate(3, 0);
        ScalarField u = ScalarField::from_polynomial(X * X);
        EffortBudget b = mc;
        b.max_evals = static_cast<std::int64_t>(1.0e6 * opts.budget_scale);
        b.seed = mix_seed(opts.seed, 91);
        TailEstimate low = amv_lower(hs, u, Point{0.5, 0.4, -0.2}, RadiusSchedule(0.15, 0.7, 6), b);
        double err = 0.0;
        for (const auto& t : low.trace) err = std::max(err, t.abs_error);
        rep.cases.push_back(
            SuiteCase::value("graded_x2_lower_positive", Provenance::derived, 2.0 * hc.c_estimate, low.value, err + 3.0 * 2.0 * hc.std_error));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Stratified measures: dominance, convex combinations, Kirchhoff, Example 3.7
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Stratum> rays_from_origin(const std::vector<double>& angles) {
    std::vector<Stratum> strata;
    for (double th : angles)
        strata.push_back(Stratum::segment(Point{0.0, 0.0}, Point{std::cos(th), std::sin(th)}, 1.0));
    return strata;
}

inline double kirchhoff_sum(const std::vector<Stratum>& strata, const ScalarField& u, const Point& o) {
    Vec3 g = u.gradient(o);
    double s = 0.0;
    for (const auto& st : strata) {
        Vec3 d = st.vertex_direction();
        s += d[0] * g[0] + d[1] * g[1];
    }
    return s;
}

}  // namespace detail

inline SuiteReport suite_stratified(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "stratified";
    RadiusSchedule sched(0.2, 0.7, 14);
    rep.environment = {{"seed", opts.seed}, {"schedule", {{"r0", sched.r0}, {"ratio", sched.ratio}, {"count", sched.count}}}};
    Point o{0.0, 0.0};
    Polynomial px = Polynomial::coordinate(2, 0), py = Polynomial::coordinate(2, 1);

    // Example 3.7 geometry
    Stratum L1 = Stratum::segment(o, Point{1.0, 0.0}, 1.0);
    Stratum L2 = Stratum::segment_with_density(o, Point{1.0, 0.0}, ScalarField::from_polynomial(px), 2.0);
    Stratum L3 = Stratum::segment_with_density(o, Point{1.0, 0.0}, ScalarField::from_polynomial(px * px), 3.0);
    Stratum S = Stratum::rectangle({-1.0, -0.5}, {0.0, 0.5}, 2.0);
    Space mu1 = stratified_complex({L1, S});
    Space mu2 = stratified_complex({L2, S});
    Space mu3 = stratified_complex({L3, S});
    Space seg1 = stratified_complex({L1});
    Space seg2 = stratified_complex({L2});
    Space rect = stratified_complex({S});

    // strata masses at o (these appear verbatim in the worked example)
    {
        double r = 0.3;
        rep.cases.push_back(SuiteCase::value("mass_L1", Provenance::paper, r, ball_mass(seg1, o, r).mass, 1e-12));
        rep.cases.push_back(SuiteCase::value("mass_L2", Provenance::paper, r * r / 2.0,
                                             ball_mass(seg2, o, r).mass, 1e-10));
        rep.cases.push_back(SuiteCase::value("mass_L3", Provenance::paper, r * r * r / 3.0,
                                             ball_mass(stratified_complex({L3}), o, r).mass, 1e-10));
        rep.cases.push_back(SuiteCase::value("mass_halfdisk", Provenance::paper, pi() * r * r / 2.0,
                                             ball_mass(rect, o, r).mass, 1e-10));
        // total mass of the mu^1 complex: strata masses add exactly
        rep.cases.push_back(SuiteCase::value("mass_mu1_total", Provenance::derived,
                                             r + pi() * r * r / 2.0, ball_mass(mu1, o, r).mass, 1e-10));
    }

    // single stratum complex behaves as the stratum's own space
    {
        ScalarField f = ScalarField::from_polynomial(px * px + py);
        double a = amv_at_radius(stratified_complex({L1}), f, Point{0.5, 0.0}, 0.1).value;
        double b = amv_at_radius(seg1, f, Point{0.5, 0.0}, 0.1).value;
        rep.cases.push_back(SuiteCase::value("single_stratum_identity", Provenance::trivial, b, a, 0.0));
    }

    // mu^1: dominance of the 1-dimensional stratum
    {
        ScalarField x2 = ScalarField::from_polynomial(px * px);
        AmvResult full = amv_limit(mu1, x2, o, sched);
        AmvResult seg = amv_limit(seg1, x2, o, sched);
        rep.cases.push_back(SuiteCase::verdict("mu1_x2_converges", Provenance::paper, Verdict::converged,
                                               full.verdict));
        rep.cases.push_back(SuiteCase::value("mu1_equals_lowest_stratum", Provenance::paper, seg.value,
                                             full.value, 1e-6));
        rep.cases.push_back(SuiteCase::value("mu1_x2_value", Provenance::derived, 1.0 / 3.0, full.value, 1e-6));

        ScalarField x = ScalarField::from_polynomial(px);
        AmvResult div = amv_limit(mu1, x, o, sched);
        rep.cases.push_back(
            SuiteCase::verdict("mu1_x_diverges", Provenance::paper, Verdict::divergent, div.verdict));
        rep.cases.push_back(SuiteCase::value("mu1_x_rate", Provenance::paper, -1.0, div.rate, 0.1));
    }

    // mu^3: the 2-dimensional stratum has the lower Ahlfors dimension
    {
        ScalarField x2 = ScalarField::from_polynomial(px * px);
        AmvResult full = amv_limit(mu3, x2, o, sched);
        AmvResult rectonly = amv_limit(rect, x2, o, sched);
        rep.cases.push_back(SuiteCase::verdict("mu3_x2_converges", Provenance::paper, Verdict::converged,
                                               full.verdict));
        rep.cases.push_back(SuiteCase::value("mu3_equals_rect_stratum", Provenance::paper, rectonly.value,
                                             full.value, 1e-6));
        rep.cases.push_back(SuiteCase::value("mu3_halfdisk_value", Provenance::derived, 0.25, full.value, 1e-6));
        ScalarField x = ScalarField::from_polynomial(px);
        AmvResult div = amv_limit(mu3, x, o, sched);
        rep.cases.push_back(
            SuiteCase::verdict("mu3_x_diverges", Provenance::paper, Verdict::divergent, div.verdict));
    }

    // mu^2: equal dimensions combine with weights 1/(1+pi), pi/(1+pi)
    {
        ScalarField x2 = ScalarField::from_polynomial(px * px);
        AmvResult full = amv_limit(mu2, x2, o, sched);
        AmvResult v1 = amv_limit(seg2, x2, o, sched);
        AmvResult v2 = amv_limit(rect, x2, o, sched);
        double alpha1 = (full.value - v2.value) / (v1.value - v2.value);
        rep.cases.push_back(SuiteCase::value("mu2_weight_segment", Provenance::paper, 1.0 / (1.0 + pi()),
                                             alpha1, 1e-4));
        rep.cases.push_back(SuiteCase::value("mu2_weight_rect", Provenance::paper, pi() / (1.0 + pi()),
                                             1.0 - alpha1, 1e-4));
        rep.cases.push_back(SuiteCase::value(
            "mu2_convex_combination", Provenance::paper,
            v1.value / (1.0 + pi()) + v2.value * pi() / (1.0 + pi()), full.value, 1e-6));
    }

    // two crossing lines: convex combination with weights 1/2
    {
        std::vector<Stratum> lines = {Stratum::segment(Point{-1.0, 0.0}, Point{1.0, 0.0}, 1.0),
                                      Stratum::segment(Point{0.0, -1.0}, Point{0.0, 1.0}, 1.0)};
        Space cross = stratified_complex(lines);
        Polynomial upoly = px * px + (py * py).scaled(0.5);
        ScalarField u = ScalarField::from_polynomial(upoly);
        AmvResult full = amv_limit(cross, u, o, sched);
        AmvResult a1 = amv_limit(stratified_complex({lines[0]}), u, o, sched);
        AmvResult a2 = amv_limit(stratified_complex({lines[1]}), u, o, sched);
        rep.cases.push_back(SuiteCase::value("cross_half_half", Provenance::paper,
                                             0.5 * (a1.value + a2.value), full.value, 1e-6));
        // exact one-dimensional oracle: second tangential derivative / 6
        rep.cases.push_back(SuiteCase::value("cross_oracle", Provenance::derived, 0.5 * (2.0 / 6.0 + 1.0 / 6.0),
                                             full.value, 1e-6));
    }

    // Kirchhoff law on ray systems
    {
        std::vector<double> sym = {0.0, 2.0 * pi() / 3.0, 4.0 * pi() / 3.0};
        std::vector<Stratum> rays = detail::rays_from_origin(sym);
        Space rsp = stratified_complex(rays);

        ScalarField ux = ScalarField::from_polynomial(px);
        double ksum = detail::kirchhoff_sum(rays, ux, o);
        AmvResult res = amv_limit(rsp, ux, o, sched);
        rep.cases.push_back(SuiteCase::value("kirchhoff_sym_sum", Provenance::derived, 0.0, ksum, 1e-12));
        rep.cases.push_back(SuiteCase::verdict("kirchhoff_sym_verdict", Provenance::paper,
                                               Verdict::converged, res.verdict));
        rep.cases.push_back(SuiteCase::value("kirchhoff_sym_value", Provenance::derived, 0.0, res.value, 1e-6));

        ScalarField ux2 = ScalarField::from_polynomial(px * px);
        AmvResult res2 = amv_limit(rsp, ux2, o, sched);
        rep.cases.push_back(SuiteCase::value("kirchhoff_x2_value", Provenance::derived, 1.0 / 6.0,
                                             res2.value, 1e-6));
        double r = 0.25;
        rep.cases.push_back(SuiteCase::value("three_rays_mass", Provenance::trivial, 3.0 * r,
                                             ball_mass(rsp, o, r).mass, 1e-12));

        std::vector<Stratum> asym = detail::rays_from_origin({0.0, pi() / 2.0});
        Space asp = stratified_complex(asym);
        double ksum2 = detail::kirchhoff_sum(asym, ux, o);
        AmvResult res3 = amv_limit(asp, ux, o, sched);
        rep.cases.push_back(SuiteCase::value("kirchhoff_asym_sum", Provenance::derived, 1.0, ksum2, 1e-12));
        rep.cases.push_back(SuiteCase::verdict("kirchhoff_asym_verdict", Provenance::paper,
                                               Verdict::divergent, res3.verdict));
        rep.cases.push_back(SuiteCase::value("kirchhoff_asym_rate", Provenance::paper, -1.0, res3.rate, 0.1));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Embedded submanifolds: the circle constant and ball expansions
// ---------------------------------------------------------------------------

inline SuiteReport suite_submanifold(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "submanifold";
    RadiusSchedule sched(0.2, 0.7, 12);
    rep.environment = {{"seed", opts.seed}, {"schedule", {{"r0", sched.r0}, {"ratio", sched.ratio}, {"count", sched.count}}}};

    SubmanifoldSpec spec;
    spec.kind = SubmanifoldSpec::Kind::circle;
    spec.radius = 1.0;
    spec.second_fundamental_norm = 1.0;
    spec.mean_curvature_norm = 1.0;
    spec.scalar_curvature = 0.0;
    Space circle = embedded_submanifold(spec);
    Polynomial px = Polynomial::coordinate(2, 0), py = Polynomial::coordinate(2, 1);

    // extrinsic ball mass 4 arcsin(r/2) and the cubic coefficient 1/12
    {
        double r = 0.3;
        rep.cases.push_back(SuiteCase::value("chord_mass", Provenance::derived, 4.0 * std::asin(r / 2.0),
                                             ball_mass(circle, Point{1.0, 0.0}, r).mass, 1e-12));
        std::vector<TracePoint> fit;
        for (double rr : RadiusSchedule(0.3, 0.7, 10).radii()) {
            double m = ball_mass(circle, Point{1.0, 0.0}, rr).mass;
            fit.push_back({rr, (m - 2.0 * rr) / (rr * rr * rr), 0.0});
        }
        AmvResult coeff = classify_trace(fit);
        rep.cases.push_back(SuiteCase::value("extrinsic_cubic_coeff", Provenance::derived, 1.0 / 12.0,
                                             coeff.value, 1e-3));
        // the chord-derived 1/12 equals omega_m (2|II| - |H|) / (8(m+2))
        double expansion = 2.0 * (2.0 * *spec.second_fundamental_norm - *spec.mean_curvature_norm) /
                           (8.0 * (1 + 2));
        rep.cases.push_back(SuiteCase::value("expansion_formula_coeff", Provenance::paper, 1.0 / 12.0,
                                             expansion, 1e-15));
        // intrinsic (arclength) ball on the circle is exactly 2r: R = 0
        double intrinsic = std::min(2.0 * r, 2.0 * pi() * spec.radius);
        rep.cases.push_back(SuiteCase::value("intrinsic_mass_flat", Provenance::trivial, 2.0 * r, intrinsic, 0.0));
    }
    // AMV of coordinate functions equals Laplace-Beltrami / (2(m+2))
    {
        struct C {
            const char* id;
            Polynomial u;
            double theta0;
            double lap_g;  // u'' along arclength at theta0
        };
        std::vector<C> cases = {{"circle_x_at_0", px, 0.0, -1.0},
                                {"circle_y_at_0", py, 0.0, 0.0},
                                {"circle_x_at_07", px, 0.7, -std::cos(0.7)}};
        for (auto& c : cases) {
            Point pt{std::cos(c.theta0), std::sin(c.theta0)};
            AmvResult res = amv_limit(circle, ScalarField::from_polynomial(c.u), pt, sched);
            rep.cases.push_back(SuiteCase::value(c.id, Provenance::derived, c.lap_g / 6.0, res.value, 1e-4));
        }
    }
    // segment submanifold: interior mass is 2r
    {
        SubmanifoldSpec seg;
        seg.kind = SubmanifoldSpec::Kind::segment;
        seg.a = Point{0.0, 0.0};
        seg.b = Point{1.0, 0.0};
        Space ssp = embedded_submanifold(seg);
        double r = 0.2;
        rep.cases.push_back(SuiteCase::value("segment_interior_mass", Provenance::trivial, 2.0 * r,
                                             ball_mass(ssp, Point{0.5, 0.0}, r).mass, 1e-13));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete operator suite: Green identity, L^p bounds, principles, weak AMV
// ---------------------------------------------------------------------------

namespace detail {

inline AtomCloud random_cloud(std::size_t n, SplitMix64& rng) {
    AtomCloud cloud;
    for (std::size_t i = 0; i < n; ++i) {
        Point p{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
        cloud.atoms.push_back({p, rng.uniform(0.5, 1.5) / static_cast<double>(n)});
    }
    cloud.region_desc = "random unit square";
    cloud.source_space = json{{"kind", "random"}};
    return cloud;
}

// periodic 1-D circle cloud: a uniform measure, every ball has the same
// mass
inline AtomCloud uniform_circle_cloud(std::size_t n) {
    AtomCloud cloud;
    double h = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        cloud.atoms.push_back({Point{(static_cast<double>(i) + 0.5) * h}, h});
    cloud.metric = [](const Point& a, const Point& b) {
        double d = std::abs(a[0] - b[0]);
        return std::min(d, 1.0 - d);
    };
    cloud.region_desc = "periodic unit circle";
    cloud.source_space = json{{"kind", "uniform_circle"}};
    return cloud;
}

}  // namespace detail

inline SuiteReport suite_operator(const SuiteOptions& opts = {}) {
    detail::Timer timer;
    SuiteReport rep;
    rep.suite = "operator";
    rep.environment = {{"seed", opts.seed}};
    SplitMix64 rng(opts.seed ^ 0x09u);

    // (a) Green identity defect on 20 random clouds
    {
        double worst = 0.0, worst_uv = 0.0;
        double rhs_magnitude = 0.0;
        for (int k = 0; k < 20; ++k) {
            std::size_t n = 50 + static_cast<std::size_t>(rng.uniform(0, 450));
            AtomCloud cloud = detail::random_cloud(n, rng);
            double r = rng.uniform(0.2, 0.45);
            std::vector<double> u(n), v(n);
            for (std::size_t i = 0; i < n; ++i) {
                u[i] = rng.uniform(-1.0, 1.0);
                v[i] = rng.uniform(-1.0, 1.0);
            }
            GreenReport g = green_check(cloud, r, u, v);
            worst = std::max(worst, g.defect / g.scale);
            rhs_magnitude = std::max(rhs_magnitude, std::abs(g.rhs));
            GreenReport guu = green_check(cloud, r, u, u);
            worst_uv = std::max(worst_uv, std::max(std::abs(guu.lhs), std::abs(guu.rhs)) / g.scale);
        }
        rep.cases.push_back(SuiteCase::value("green_defect_20_clouds", Provenance::trivial, 0.0, worst, 1e-10));
        rep.cases.push_back(SuiteCase::value("green_u_equals_v_zero", Provenance::trivial, 0.0, worst_uv, 1e-10));
        // the asymmetric side is genuinely nonzero on random clouds
        rep.cases.push_back(SuiteCase::value("green_rhs_nonzero", Provenance::trivial, 1.0,
                                             rhs_magnitude > 1e-8 ? 1.0 : 0.0, 0.0));
    }

    // (b) uniform measure: self-adjoint, rhs vanishes, norms at most 1, w = 1
    {
        AtomCloud cloud = detail::uniform_circle_cloud(200);
        double r = 0.037;
        std::size_t n = cloud.size();
        std::vector<double> u(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = std::sin(2.0 * pi() * cloud.atoms[i].p[0]);
            v[i] = std::cos(4.0 * pi() * cloud.atoms[i].p[0]);
        }
        GreenReport g = green_check(cloud, r, u, v);
        rep.cases.push_back(SuiteCase::value("uniform_selfadjoint_defect", Provenance::paper, 0.0,
                                             g.selfadjoint_defect, 1e-12));
        rep.cases.push_back(SuiteCase::value("uniform_rhs_zero", Provenance::paper, 0.0, std::abs(g.rhs), 1e-12));
        DiscreteOperator T = build_Tr(cloud, r);
        AhlforsInfo uniform{1.0, 2.0, 2.0};
        for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
            NormProbe probe = op_norm_probe(T, p, uniform);
            rep.cases.push_back(SuiteCase::value(
                "uniform_Tr_norm_p" + (std::isinf(p) ? std::string("inf") : std::to_string(static_cast<int>(p))),
                Provenance::paper, 0.0, std::max(0.0, probe.ratio - 1.0), 1e-12));
        }
        // power iteration consistency: row-stochastic T has norm >= 1
        NormProbe p2 = op_norm_probe(T, 2.0, uniform);
        rep.cases.push_back(SuiteCase::value("power_iteration_geq_1", Provenance::trivial, 1.0,
                                             std::max(1.0, p2.empirical), 1e-8));
        // the AMV operator obeys (1 + C/c) r^-2 as well
        DiscreteOperator Dop = build_amv_operator(cloud, r);
        NormProbe pd = op_norm_probe(Dop, 2.0, uniform);
        rep.cases.push_back(SuiteCase::value("uniform_amv_norm_bound", Provenance::paper, 0.0,
                                             std::max(0.0, pd.ratio - 1.0), 1e-12));
        std::vector<double> w = lemma_weight(cloud, r);
        double worstw = 0.0;
        for (double wi : w) worstw = std::max(worstw, std::abs(wi - 1.0));
        rep.cases.push_back(SuiteCase::value("uniform_lemma_weight_one", Provenance::trivial, 0.0, worstw, 1e-12));
    }

    // (c) Lemma 5.1 inequality: zero violations over 50 random fields
    {
        AtomCloud cloud = detail::random_cloud(300, rng);
        double r = 0.3;
        DiscreteOperator T = build_Tr(cloud, r);
        std::vector<double> w = lemma_weight(cloud, r);
        int violations = 0;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> u(cloud.size());
            for (auto& x : u) x = rng.uniform(-2.0, 2.0);
            std::vector<double> Tu = T.apply(u);
            for (double p : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
                double lhs = cloud_lp_norm(cloud, Tu, p);
                double rhs = std::isinf(p) ? cloud_lp_norm(cloud, u, p) : cloud_lp_norm(cloud, u, p, &w);
                if (lhs > rhs * (1.0 + 1e-13)) ++violations;
            }
        }
        rep.cases.push_back(SuiteCase::value("lemma51_violations", Provenance::paper, 0.0, violations, 0.0));
        // Ahlfors norm ratio on a 1-D grid cloud
        Space line = euclidean_lebesgue(1);
        RegionSpec reg;
        reg.dim = 1;
        reg.lo = {0.0, 0, 0};
        reg.hi = {1.0, 0, 0};
        AtomCloud grid = make_atom_cloud(line, reg, 400);
        DiscreteOperator Tg = build_Tr(grid, 0.1001);
        NormProbe probe = op_norm_probe(Tg, 2.0, AhlforsInfo{1.0, 0.9, 2.05});
        rep.cases.push_back(SuiteCase::value("ahlfors_norm_ratio_leq_1", Provenance::paper, 0.0,
                                             std::max(0.0, probe.ratio - 1.0), 0.0));
    }

    // (d) Poisson solve: maximum principle and monotone comparison
    {
        Space line = euclidean_lebesgue(1);
        RegionSpec reg;
        reg.dim = 1;
        reg.lo = {0.0, 0, 0};
        reg.hi = {1.0, 0, 0};
        AtomCloud grid = make_atom_cloud(line, reg, 300);
        double r = 0.0617;
        std::vector<std::size_t> boundary;
        std::vector<double> gvals;
        std::vector<std::size_t> interior;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double x = grid.atoms[i].p[0];
            if (x < r || x > 1.0 - r) {
                boundary.push_back(i);
                gvals.push_back(0.0);
            } else {
                interior.push_back(i);
            }
        }
        std::vector<double> f1(grid.size(), 0.0), f2(grid.size(), 0.0);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            f1[i] = 1.0 + 0.5 * std::sin(3.0 * grid.atoms[i].p[0]);
            f2[i] = f1[i] + 0.3;
        }
        std::vector<double> u1 = solve_poisson(grid, r, f1, boundary, gvals);
        std::vector<double> u2 = solve_poisson(grid, r, f2, boundary, gvals);
        double mono_viol = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) mono_viol = std::max(mono_viol, u2[i] - u1[i]);
        rep.cases.push_back(SuiteCase::value("poisson_comparison", Provenance::trivial, 0.0,
                                             std::max(0.0, mono_viol), 1e-12));
        // f >= 0 pushes the maximum to the boundary
        double max_int = -1e300, max_bdy = -1e300;
        for (std::size_t i : interior) max_int = std::max(max_int, u1[i]);
        for (std::size_t i : boundary) max_bdy = std::max(max_bdy, u1[i]);
        rep.cases.push_back(SuiteCase::value("poisson_max_on_boundary", Provenance::trivial, 0.0,
                                             std::max(0.0, max_int - max_bdy), 1e-12));
        // constant data reproduces the constant
        std::vector<double> gconst(boundary.size(), 2.5);
        std::vector<double> uc = solve_poisson(grid, r, std::vector<double>(grid.size(), 0.0), boundary, gconst);
        double cdev = 0.0;
        for (double x : uc) cdev = std::max(cdev, std::abs(x - 2.5));
        rep.cases.push_back(SuiteCase::value("poisson_constant", Provenance::trivial, 0.0, cdev, 1e-10));

        // (e) maximum-principle audits: strict subharmonic solutions pass
        int fails = 0;
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> f(grid.size());
            for (auto& x : f) x = rng.uniform(0.1, 1.0);
            std::vector<double> g2(boundary.size());
            for (auto& x : g2) x = rng.uniform(-1.0, 1.0);
            std::vector<double> u = solve_poisson(grid, r, f, boundary, g2);
            MaxPrinAudit audit = maxprin_audit(grid, r, u, interior);
            if (!audit.pass) ++fails;
        }
        rep.cases.push_back(SuiteCase::value("maxprin_subharmonic_pass", Provenance::trivial, 0.0, fails, 0.0));

        // the sgn-based counterexample is flagged
        RegionSpec reg2;
        reg2.dim = 1;
        reg2.lo = {-1.0, 0, 0};
        reg2.hi = {2.0, 0, 0};
        AtomCloud wide = make_atom_cloud(line, reg2, 600);
        std::vector<double> usgn(wide.size());
        auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
        std::vector<std::size_t> wide_interior;
        for (std::size_t i = 0; i < wide.size(); ++i) {
            double x = wide.atoms[i].p[0];
            usgn[i] = sgn(x) - sgn(x - 1.0);
            if (x > -1.0 + 0.15 && x < 2.0 - 0.15) wide_interior.push_back(i);
        }
        MaxPrinAudit audit = maxprin_audit(wide, 0.15, usgn, wide_interior);
        rep.cases.push_back(SuiteCase::value("maxprin_sgn_flagged", Provenance::paper, 1.0,
                                             audit.pass ? 0.0 : 1.0, 0.0));
        std::vector<double> uconst(wide.size(), 1.0);
        MaxPrinAudit audit2 = maxprin_audit(wide, 0.15, uconst, wide_interior);
        rep.cases.push_back(SuiteCase::value("maxprin_constant_passes", Provenance::trivial, 1.0,
                                             audit2.pass ? 1.0 : 0.0, 0.0));
    }

    // (f) weak AMV pairing with the sign function: limit -phi'(0)/3
    {
        Space line = euclidean_lebesgue(1);
        ScalarField usgn = ScalarField::from_function(1, [](const Point& p) {
            return p[0] > 0 ? 1.0 : (p[0] < 0 ? -1.0 : 0.0);
        });
        usgn.with_singularities({0.0});
        RadiusSchedule wsched(0.2, 0.7, 12);

        struct Bump {
            const char* id;
            ScalarField phi;
            double dphi0;
            Provenance prov;
        };
        ScalarField phi1 = field_from_expression("(1-x^2)^2*(1+x)", 1);
        phi1.with_support(Point{-1.0}, Point{1.0});
        ScalarField phi2 = ScalarField::from_function(1, [](const Point& p) {
            double s = std::max(0.0, 1.0 - p[0] * p[0]);
            return s * s;
        });
        phi2.with_support(Point{-1.0}, Point{1.0});
        ScalarField phi3 = field_from_expression("(1-x^2)^2*(1+x)^2", 1);
        phi3.with_support(Point{-1.0}, Point{1.0});
        ScalarField phi4 = field_from_expression("((x-0.3)*(0.9-x))^2", 1);
        phi4.with_support(Point{0.3}, Point{0.9});
        std::vector<Bump> bumps;
        bumps.push_back({"weak_sgn_phi1", phi1, 1.0, Provenance::paper});
        bumps.push_back({"weak_sgn_phi2_symmetric", phi2, 0.0, Provenance::trivial});
        bumps.push_back({"weak_sgn_phi3", phi3, 2.0, Provenance::paper});
        bumps.push_back({"weak_sgn_phi4_away", phi4, 0.0, Provenance::trivial});
        for (auto& b : bumps) {
            AmvResult res = weak_pairing(line, usgn, b.phi, wsched);
            rep.cases.push_back(SuiteCase::value(b.id, b.prov, -b.dphi0 / 3.0, res.value, 1e-4));
        }
        // AMV-regular u: pairing limit equals the direct integral of phi Lap u / 6
        Polynomial x1 = Polynomial::coordinate(1, 0);
        ScalarField ureg = ScalarField::from_polynomial(x1 * x1);
        AmvResult res = weak_pairing(line, ureg, phi1, wsched);
        ScalarField third = ScalarField::from_function(1, [&](const Point& p) { return phi1(p) / 3.0; });
        BallEstimate oracle = ball_integrate(line, Point{0.0}, 1.0 + 1e-9, third);
        rep.cases.push_back(SuiteCase::value("weak_regular_oracle", Provenance::derived, oracle.integral,
                                             res.value, 1e-6));
    }
    rep.duration_seconds = timer.seconds();
    return rep;
}

}  // namespace amv
