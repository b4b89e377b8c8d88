#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "field.hpp"
#include "mc.hpp"
#include "point.hpp"
#include "polynomial.hpp"
#include "quadrature.hpp"
#include "space.hpp"

namespace amv {

namespace detail {

inline double eval_checked(const ScalarField& f, const Point& p) {
    double v = f(p);
    if (!std::isfinite(v))
        throw evaluation_error("ball_integrate: non-finite field value at node " + p.str());
    return v;
}

// Rejection Monte Carlo over the bounding box of a Euclidean ball with a
// measure density. Used as the cross-validation route for every
// Lebesgue-type backend.
inline BallEstimate mc_box_rejection(int n, const Point& x, double r, const ScalarField* f,
                                     const ScalarField* density, const EffortBudget& budget) {
    double boxvol = std::pow(2.0 * r, n);
    std::uint64_t salt = hash_double(r) ^ hash_double(x[0]) * 3 ^ (n * 0x9E37u);
    RatioAccumulator acc = mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
        Point p = x;
        double d2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double o = rng.uniform(-r, r);
            p[i] = x[i] + o;
            d2 += o * o;
        }
        if (!(d2 < r * r)) return {0.0, 0.0};
        double w = density ? (*density)(p) : 1.0;
        double a = f ? eval_checked(*f, p) * w : 0.0;
        return {a * boxvol, w * boxvol};
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

}  // namespace detail

// ---------------------------------------------------------------------------
// (R^n, d_e, L^n)
// ---------------------------------------------------------------------------

class EuclideanLebesgueImpl : public SpaceImpl {
public:
    explicit EuclideanLebesgueImpl(int n) : n_(n) {
        if (n < 1 || n > 3) throw input_error("euclidean_lebesgue: dimension must be 1, 2 or 3");
    }

    int ambient_dim() const override { return n_; }

    BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                               const EffortBudget& budget) const override {
        BallEstimate e;
        e.mass = ball_monomial_moment(n_, r, {0, 0, 0});
        if (!f) return e;
        if (const Polynomial* p = f->polynomial()) {
            e.integral = ball_polynomial_integral(*p, x, r);
            return e;
        }
        // node-consistent pair: the mass is re-integrated on the same node
        // set so that integral/mass is a faithful ball average
        e.method = EstimateMethod::quadrature;
        QuadPairResult q;
        if (n_ == 1) {
            std::vector<double> breaks;
            for (double s : f->singularities()) breaks.push_back(s);
            q = integrate_1d_pair(
                [&](double t) {
                    return std::pair<double, double>(detail::eval_checked(*f, Point{t}), 1.0);
                },
                x[0] - r, x[0] + r, breaks);
        } else if (n_ == 2) {
            q = disk_pair_quadrature(
                [&](double rho, double th) {
                    return std::pair<double, double>(
                        detail::eval_checked(*f, Point{x[0] + rho * std::cos(th), x[1] + rho * std::sin(th)}),
                        1.0);
                },
                r);
        } else {
            q = ball3_pair_quadrature(
                [&](double dx, double dy, double dz) {
                    return std::pair<double, double>(
                        detail::eval_checked(*f, Point{x[0] + dx, x[1] + dy, x[2] + dz}), 1.0);
                },
                r);
        }
        e.integral = q.integral;
        e.mass = q.mass;
        e.abs_error = q.integral_error;
        e.mass_error = q.mass_error;
        e.samples_used = q.evals;
        e.average_error = e.abs_error / e.mass + std::abs(e.integral) / (e.mass * e.mass) * e.mass_error;
        return e;
    }

    std::optional<BallEstimate> mc_ball_estimate(const Point& x, double r, const ScalarField* f,
                                                 const EffortBudget& budget) const override {
        return detail::mc_box_rejection(n_, x, r, f, nullptr, budget);
    }

    std::optional<std::pair<double, double>> centered_ball_estimate(const Point& x, double r,
                                                                    const ScalarField& f) const override {
        const Polynomial* p = f.polynomial();
        if (!p) return std::nullopt;
        double num = centered_ball_integral(without_constant(p->translated(x)), r);
        return std::make_pair(num, ball_monomial_moment(n_, r, {0, 0, 0}));
    }

    std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                 std::uint64_t) const override {
        if (region.dim != n_ || region.empty()) throw domain_error("discretize: empty region");
        std::vector<Atom> atoms;
        double cell = 1.0;
        std::array<int, 3> m{1, 1, 1};
        std::array<double, 3> h{0, 0, 0};
        for (int i = 0; i < n_; ++i) {
            m[static_cast<std::size_t>(i)] = resolution;
            h[static_cast<std::size_t>(i)] = (region.hi[static_cast<std::size_t>(i)] - region.lo[static_cast<std::size_t>(i)]) / resolution;
            cell *= h[static_cast<std::size_t>(i)];
        }
        for (int a = 0; a < m[0]; ++a)
            for (int b = 0; b < m[1]; ++b)
                for (int c = 0; c < m[2]; ++c) {
                    Point p = Point::zero(n_);
                    int idx[3] = {a, b, c};
                    for (int i = 0; i < n_; ++i)
                        p[i] = region.lo[static_cast<std::size_t>(i)] + (idx[i] + 0.5) * h[static_cast<std::size_t>(i)];
                    atoms.push_back({p, cell});
                }
        return atoms;
    }

    json descriptor() const override { return json{{"kind", "euclidean"}, {"dim", n_}}; }

    std::optional<AhlforsInfo> ahlfors() const override {
        double w = unit_ball_volume(n_);
        return AhlforsInfo{static_cast<double>(n_), w, w};
    }

private:
    int n_;
};

inline Space euclidean_lebesgue(int n) {
    return Space(std::make_shared<EuclideanLebesgueImpl>(n));
}

// ---------------------------------------------------------------------------
// (Omega, d_e, w L^n)
// ---------------------------------------------------------------------------

struct WeightSpec {
    ScalarField density;
    std::string zero_set_hint;
    enum class Regularity { C1, measurable } regularity = Regularity::C1;
};

class WeightedLebesgueImpl : public SpaceImpl {
public:
    WeightedLebesgueImpl(int n, WeightSpec w) : n_(n), w_(std::move(w)) {
        if (n < 1 || n > 3) throw input_error("weighted_lebesgue: dimension must be 1, 2 or 3");
        // sampled nonnegativity check
        SplitMix64 rng(0xBADCAFEu);
        for (int k = 0; k < 200; ++k) {
            Point p = Point::zero(n_);
            for (int i = 0; i < n_; ++i) p[i] = rng.uniform(-2.0, 2.0);
            check_density(p);
        }
    }

    int ambient_dim() const override { return n_; }

    BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                               const EffortBudget& budget) const override {
        const Polynomial* wp = w_.density.polynomial();
        BallEstimate e;
        if (wp) {
            e.mass = ball_polynomial_integral(*wp, x, r);
            if (!f) return e;
            if (const Polynomial* p = f->polynomial()) {
                e.integral = ball_polynomial_integral(*p * *wp, x, r);
                return e;
            }
        }
        // quadrature route: density and integrand evaluated once per node,
        // mass and integral accumulated over the same node set
        e.method = EstimateMethod::quadrature;
        auto pair_at = [&](const Point& p) {
            double w = check_density(p);
            return std::pair<double, double>(f ? w * detail::eval_checked(*f, p) : 0.0, w);
        };
        QuadPairResult q;
        if (n_ == 1) {
            q = integrate_1d_pair([&](double t) { return pair_at(Point{t}); }, x[0] - r, x[0] + r,
                                  f ? f->singularities() : std::vector<double>{});
        } else if (n_ == 2) {
            q = disk_pair_quadrature(
                [&](double rho, double th) {
                    return pair_at(Point{x[0] + rho * std::cos(th), x[1] + rho * std::sin(th)});
                },
                r);
        } else {
            q = ball3_pair_quadrature(
                [&](double a, double b, double c) { return pair_at(Point{x[0] + a, x[1] + b, x[2] + c}); },
                r);
        }
        e.mass = q.mass;
        e.mass_error = q.mass_error;
        e.samples_used = q.evals;
        if (f) {
            e.integral = q.integral;
            e.abs_error = q.integral_error;
        }
        if (e.mass > 0.0)
            e.average_error = e.abs_error / e.mass + std::abs(e.integral) / (e.mass * e.mass) * e.mass_error;
        return e;
    }

    std::optional<BallEstimate> mc_ball_estimate(const Point& x, double r, const ScalarField* f,
                                                 const EffortBudget& budget) const override {
        return detail::mc_box_rejection(n_, x, r, f, &w_.density, budget);
    }

    std::optional<std::pair<double, double>> centered_ball_estimate(const Point& x, double r,
                                                                    const ScalarField& f) const override {
        const Polynomial* p = f.polynomial();
        const Polynomial* wp = w_.density.polynomial();
        if (!p || !wp) return std::nullopt;
        Polynomial wc = wp->translated(x);
        double num = centered_ball_integral(without_constant(p->translated(x)) * wc, r);
        return std::make_pair(num, centered_ball_integral(wc, r));
    }

    std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                 std::uint64_t seed) const override {
        EuclideanLebesgueImpl base(n_);
        std::vector<Atom> atoms = base.discretize(region, resolution, seed);
        for (auto& a : atoms) a.weight *= check_density(a.p);
        std::erase_if(atoms, [](const Atom& a) { return a.weight == 0.0; });
        if (atoms.empty()) throw domain_error("discretize: region carries no mass");
        return atoms;
    }

    json descriptor() const override {
        json j{{"kind", "weighted"}, {"dim", n_}};
        if (!w_.zero_set_hint.empty()) j["zero_set"] = w_.zero_set_hint;
        return j;
    }

    const ScalarField& density() const { return w_.density; }

private:
    double check_density(const Point& p) const {
        double w = w_.density(p);
        if (w < -1e-12 || !std::isfinite(w))
            throw evaluation_error("weighted_lebesgue: negative density at sample point " + p.str());
        return std::max(w, 0.0);
    }

    int n_;
    WeightSpec w_;
};

inline Space weighted_lebesgue(int n, WeightSpec w) {
    return Space(std::make_shared<WeightedLebesgueImpl>(n, std::move(w)));
}

// ---------------------------------------------------------------------------
// (R^n, d_e, L^n + delta_o)
// ---------------------------------------------------------------------------

class LebesguePlusDiracImpl : public SpaceImpl {
public:
    explicit LebesguePlusDiracImpl(int n) : base_(n), n_(n) {}

    int ambient_dim() const override { return n_; }

    BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                               const EffortBudget& budget) const override {
        BallEstimate e = base_.ball_estimate(x, r, f, budget);
        if (euclidean_distance(x, Point::zero(n_)) < r) {
            e.mass += 1.0;
            if (f) e.integral += detail::eval_checked(*f, Point::zero(n_));
            if (e.mass > 0.0)
                e.average_error =
                    e.abs_error / e.mass + std::abs(e.integral) / (e.mass * e.mass) * e.mass_error;
        }
        return e;
    }

    std::optional<BallEstimate> mc_ball_estimate(const Point& x, double r, const ScalarField* f,
                                                 const EffortBudget& budget) const override {
        auto e = base_.mc_ball_estimate(x, r, f, budget);
        if (e && euclidean_distance(x, Point::zero(n_)) < r) {
            e->mass += 1.0;  // the atom is carried exactly
            if (f) e->integral += detail::eval_checked(*f, Point::zero(n_));
        }
        return e;
    }

    std::optional<std::pair<double, double>> centered_ball_estimate(const Point& x, double r,
                                                                    const ScalarField& f) const override {
        auto base = base_.centered_ball_estimate(x, r, f);
        if (!base) return std::nullopt;
        auto [num, mass] = *base;
        if (euclidean_distance(x, Point::zero(n_)) < r) {
            mass += 1.0;
            // at x = o the atom term u(o) - u(o) cancels identically
            Point o = Point::zero(n_);
            if (euclidean_distance(x, o) > 0.0) num += detail::eval_checked(f, o) - detail::eval_checked(f, x);
        }
        return std::make_pair(num, mass);
    }

    std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                 std::uint64_t seed) const override {
        std::vector<Atom> atoms = base_.discretize(region, resolution, seed);
        Point o = Point::zero(n_);
        if (region.contains(o)) atoms.push_back({o, 1.0});
        return atoms;
    }

    json descriptor() const override { return json{{"kind", "lebesgue_plus_dirac"}, {"dim", n_}}; }

private:
    EuclideanLebesgueImpl base_;
    int n_;
};

inline Space lebesgue_plus_dirac(int n) {
    return Space(std::make_shared<LebesguePlusDiracImpl>(n));
}

// ---------------------------------------------------------------------------
// Strata: Ahlfors-regular pieces of a stratified measure
// ---------------------------------------------------------------------------

struct Stratum {
    enum class Kind { segment, rectangle, circle, graph_curve };
    Kind kind = Kind::segment;

    // segment geometry: from a to b; a doubles as the named vertex
    Point a, b;
    // rectangle geometry
    std::array<double, 2> lo{0, 0}, hi{0, 0};
    // circle geometry
    Point center;
    double radius = 0.0;
    // graph curve y = g(x), x in [x0, x1]
    Polynomial graph;
    double gx0 = 0.0, gx1 = 0.0;

    ScalarField density;  // ambient field restricted to the piece
    bool unit_density = true;

    double ahlfors_q = 1.0;
    std::optional<std::pair<double, double>> ahlfors_constants;
    std::string name;

    static Stratum segment(Point a, Point b, double q = 1.0) {
        Stratum s;
        s.kind = Kind::segment;
        s.a = a;
        s.b = b;
        s.ahlfors_q = q;
        return s;
    }
    static Stratum segment_with_density(Point a, Point b, ScalarField dens, double q) {
        Stratum s = segment(a, b, q);
        s.density = std::move(dens);
        s.unit_density = false;
        return s;
    }
    static Stratum rectangle(std::array<double, 2> lo, std::array<double, 2> hi, double q = 2.0) {
        Stratum s;
        s.kind = Kind::rectangle;
        s.lo = lo;
        s.hi = hi;
        s.ahlfors_q = q;
        return s;
    }
    static Stratum circle(Point center, double radius, double q = 1.0) {
        Stratum s;
        s.kind = Kind::circle;
        s.center = center;
        s.radius = radius;
        s.ahlfors_q = q;
        return s;
    }
    static Stratum graph_curve(Polynomial g, double x0, double x1, double q = 1.0) {
        Stratum s;
        s.kind = Kind::graph_curve;
        s.graph = std::move(g);
        s.gx0 = x0;
        s.gx1 = x1;
        s.ahlfors_q = q;
        return s;
    }

    // unit direction out of the named vertex (Kirchhoff sums)
    Vec3 vertex_direction() const {
        if (kind != Kind::segment) throw input_error("vertex_direction: not a segment stratum");
        double L = euclidean_distance(a, b);
        return {(b[0] - a[0]) / L, (b[1] - a[1]) / L, 0.0};
    }

    double dens_at(const Point& p) const { return unit_density ? 1.0 : density(p); }

    json to_json() const {
        json j;
        switch (kind) {
            case Kind::segment:
                j["kind"] = "segment";
                j["a"] = {a[0], a[1]};
                j["b"] = {b[0], b[1]};
                break;
            case Kind::rectangle:
                j["kind"] = "rectangle";
                j["lo"] = {lo[0], lo[1]};
                j["hi"] = {hi[0], hi[1]};
                break;
            case Kind::circle:
                j["kind"] = "circle";
                j["center"] = {center[0], center[1]};
                j["radius"] = radius;
                break;
            case Kind::graph_curve:
                j["kind"] = "graph_curve";
                j["range"] = {gx0, gx1};
                break;
        }
        j["Q"] = ahlfors_q;
        if (!unit_density) j["density"] = "custom";
        return j;
    }
};

namespace detail {

// parameter interval of the open ball along the segment [a,b]
inline std::optional<std::pair<double, double>> segment_ball_window(const Point& a, const Point& b,
                                                                    const Point& x, double r) {
    double L = euclidean_distance(a, b);
    if (L <= 0.0) throw domain_error("segment stratum with empty support");
    double ux = (b[0] - a[0]) / L, uy = (b[1] - a[1]) / L;
    double dx = x[0] - a[0], dy = x[1] - a[1];
    double m = ux * dx + uy * dy;
    double perp2 = dx * dx + dy * dy - m * m;
    double disc = r * r - perp2;
    if (disc <= 0.0) return std::nullopt;
    double h = std::sqrt(disc);
    double s0 = std::max(0.0, m - h), s1 = std::min(L, m + h);
    if (s1 <= s0) return std::nullopt;
    return std::make_pair(s0, s1);
}

inline Point segment_param(const Stratum& st, double s) {
    double L = euclidean_distance(st.a, st.b);
    return Point{st.a[0] + s * (st.b[0] - st.a[0]) / L, st.a[1] + s * (st.b[1] - st.a[1]) / L};
}

// [t_in, t_out] of the ray x + t d inside the rectangle, t >= 0
inline std::optional<std::pair<double, double>> ray_box_window(const Stratum& st, const Point& x,
                                                               double cth, double sth) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    double d[2] = {cth, sth};
    for (int k = 0; k < 2; ++k) {
        double xk = x[k];
        if (std::abs(d[k]) < 1e-15) {
            if (xk < st.lo[static_cast<std::size_t>(k)] || xk > st.hi[static_cast<std::size_t>(k)]) return std::nullopt;
            continue;
        }
        double a = (st.lo[static_cast<std::size_t>(k)] - xk) / d[k];
        double b = (st.hi[static_cast<std::size_t>(k)] - xk) / d[k];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
    }
    if (!(t1 > t0)) return std::nullopt;
    return std::make_pair(t0, t1);
}

// Integrates a pair integrand over (rectangle intersect B_r(x)) by rays
// from x: the radial part runs over [max(t_in,0), min(t_out,r)] with
// Gauss-Legendre, the angular part splits at corner angles and
// scan-detected kinks of the radial window.
template <typename F>
QuadPairResult rect_ball_integral(const Stratum& st, const Point& x, double r, const F& integrand) {
    std::vector<double> breaks;
    for (double cx : {st.lo[0], st.hi[0]})
        for (double cy : {st.lo[1], st.hi[1]}) {
            double th = std::atan2(cy - x[1], cx - x[0]);
            if (th < 0) th += 2.0 * pi();
            breaks.push_back(th);
        }
    for (int k = 0; k < 4; ++k) breaks.push_back(k * pi() / 2.0);
    breaks.push_back(0.0);
    breaks.push_back(2.0 * pi());
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double u, double v) { return std::abs(u - v) < 1e-13; }),
                 breaks.end());

    auto window = [&](double th) -> std::pair<double, double> {
        auto w = ray_box_window(st, x, std::cos(th), std::sin(th));
        if (!w) return {0.0, 0.0};
        double t0 = w->first, t1 = std::min(w->second, r);
        if (!(t1 > t0)) return {0.0, 0.0};
        return {t0, t1};
    };

    // refine panels where the radial window switches between the ball edge
    // and the slab edge (or empties)
    std::vector<double> panels;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        double a = breaks[i], b = breaks[i + 1];
        panels.push_back(a);
        const int scan = 24;
        auto state = [&](double th) {
            auto w = ray_box_window(st, x, std::cos(th), std::sin(th));
            if (!w || !(std::min(w->second, r) > w->first)) return 0;     // empty
            return w->second < r ? 1 : 2;                                 // slab-limited / ball-limited
        };
        int prev = state(a + 1e-12 * (b - a));
        for (int k = 1; k <= scan; ++k) {
            double th = a + (b - a) * k / scan;
            int cur = state(th - 1e-12 * (b - a));
            if (cur != prev) {
                double u = a + (b - a) * (k - 1) / static_cast<double>(scan), v = th;
                for (int it = 0; it < 60; ++it) {
                    double m = 0.5 * (u + v);
                    if (state(m) == prev)
                        u = m;
                    else
                        v = m;
                }
                panels.push_back(0.5 * (u + v));
                prev = cur;
            }
        }
    }
    panels.push_back(breaks.back());
    std::sort(panels.begin(), panels.end());

    auto run = [&](int n_theta, int n_rho, double& oa, double& ob) {
        double ta = 0.0, tb = 0.0;
        const GaussRule& tr = gauss_legendre(n_theta);
        const GaussRule& rr = gauss_legendre(n_rho);
        for (std::size_t i = 0; i + 1 < panels.size(); ++i) {
            double a = panels[i], b = panels[i + 1];
            if (!(b - a > 1e-14)) continue;
            double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            for (std::size_t it = 0; it < tr.nodes.size(); ++it) {
                double th = mid + half * tr.nodes[it];
                auto [t0, t1] = window(th);
                if (!(t1 > t0)) continue;
                double cth = std::cos(th), sth = std::sin(th);
                double rmid = 0.5 * (t0 + t1), rhalf = 0.5 * (t1 - t0);
                double ra = 0.0, rb = 0.0;
                for (std::size_t ir = 0; ir < rr.nodes.size(); ++ir) {
                    double rho = rmid + rhalf * rr.nodes[ir];
                    Point p{x[0] + rho * cth, x[1] + rho * sth};
                    auto [va, vb] = integrand(p);
                    ra += rr.weights[ir] * va * rho;
                    rb += rr.weights[ir] * vb * rho;
                }
                ta += tr.weights[it] * half * ra * rhalf;
                tb += tr.weights[it] * half * rb * rhalf;
            }
        }
        oa = ta;
        ob = tb;
    };
    QuadPairResult out;
    double hi_a, hi_b, lo_a, lo_b;
    run(24, 16, hi_a, hi_b);
    run(12, 8, lo_a, lo_b);
    out.integral = hi_a;
    out.mass = hi_b;
    out.integral_error = std::abs(hi_a - lo_a);
    out.mass_error = std::abs(hi_b - lo_b);
    out.evals = static_cast<std::int64_t>(panels.size()) * (24 * 16 + 12 * 8);
    return out;
}

inline BallEstimate stratum_ball_estimate(const Stratum& st, const Point& x, double r,
                                          const ScalarField* f, const EffortBudget&) {
    BallEstimate e;
    auto take_pair = [&](const QuadPairResult& q) {
        e.mass += q.mass;
        e.mass_error += q.mass_error;
        e.samples_used += q.evals;
        if (f) {
            e.integral += q.integral;
            e.abs_error += q.integral_error;
        }
        e.method = EstimateMethod::quadrature;
    };
    switch (st.kind) {
        case Stratum::Kind::segment: {
            auto w = segment_ball_window(st.a, st.b, x, r);
            if (!w) return e;
            if (st.unit_density && !f) {
                e.mass = w->second - w->first;
                break;
            }
            take_pair(integrate_1d_pair(
                [&](double s) {
                    Point p = segment_param(st, s);
                    double dens = st.dens_at(p);
                    return std::pair<double, double>(f ? dens * eval_checked(*f, p) : 0.0, dens);
                },
                w->first, w->second));
            break;
        }
        case Stratum::Kind::rectangle: {
            // fully inside with unit density: closed-form disk mass
            double edge = std::min(std::min(x[0] - st.lo[0], st.hi[0] - x[0]),
                                   std::min(x[1] - st.lo[1], st.hi[1] - x[1]));
            if (st.unit_density && !f && edge >= r) {
                e.mass = pi() * r * r;
                break;
            }
            take_pair(rect_ball_integral(st, x, r, [&](const Point& p) {
                double dens = st.dens_at(p);
                return std::pair<double, double>(f ? dens * eval_checked(*f, p) : 0.0, dens);
            }));
            break;
        }
        case Stratum::Kind::circle: {
            double R = st.radius;
            double D = euclidean_distance(x, st.center);
            double th0 = D > 0 ? std::atan2(x[1] - st.center[1], x[0] - st.center[0]) : 0.0;
            double half = 0.0;  // half-width of the angular window
            if (D == 0.0) {
                half = R < r ? pi() : 0.0;
            } else {
                double q = (R * R + D * D - r * r) / (2.0 * R * D);
                if (q >= 1.0)
                    half = 0.0;
                else if (q <= -1.0)
                    half = pi();
                else
                    half = std::acos(q);
            }
            if (half == 0.0) return e;
            if (st.unit_density && !f) {
                e.mass = 2.0 * half * R;
                break;
            }
            take_pair(integrate_1d_pair(
                [&](double th) {
                    Point p{st.center[0] + R * std::cos(th), st.center[1] + R * std::sin(th)};
                    double dens = R * st.dens_at(p);
                    return std::pair<double, double>(f ? dens * eval_checked(*f, p) : 0.0, dens);
                },
                th0 - half, th0 + half));
            break;
        }
        case Stratum::Kind::graph_curve: {
            Polynomial dg = st.graph.partial(0);
            auto gy = [&](double t) { return st.graph.eval(Point{t}); };
            auto q = [&](double t) {
                double dx = t - x[0], dy = gy(t) - x[1];
                return dx * dx + dy * dy - r * r;
            };
            // locate ball windows by sign scan + bisection
            const int scan = 512;
            std::vector<std::pair<double, double>> windows;
            double prev_t = st.gx0;
            bool inside = q(prev_t) < 0;
            double win_start = inside ? prev_t : 0.0;
            for (int k = 1; k <= scan; ++k) {
                double t = st.gx0 + (st.gx1 - st.gx0) * k / scan;
                bool cur = q(t) < 0;
                if (cur != inside) {
                    double u = prev_t, v = t;
                    for (int it = 0; it < 80; ++it) {
                        double m = 0.5 * (u + v);
                        if ((q(m) < 0) == inside)
                            u = m;
                        else
                            v = m;
                    }
                    double crossing = 0.5 * (u + v);
                    if (inside)
                        windows.emplace_back(win_start, crossing);
                    else
                        win_start = crossing;
                    inside = cur;
                }
                prev_t = t;
            }
            if (inside) windows.emplace_back(win_start, st.gx1);
            e.method = EstimateMethod::quadrature;
            for (auto [t0, t1] : windows)
                take_pair(integrate_1d_pair(
                    [&](double t) {
                        double d = dg.eval(Point{t});
                        Point p{t, gy(t)};
                        double dens = std::sqrt(1.0 + d * d) * st.dens_at(p);
                        return std::pair<double, double>(f ? dens * eval_checked(*f, p) : 0.0, dens);
                    },
                    t0, t1));
            break;
        }
    }
    if (e.mass > 0.0)
        e.average_error = e.abs_error / e.mass + std::abs(e.integral) / (e.mass * e.mass) * e.mass_error;
    return e;
}

inline bool stratum_in_support(const Stratum& st, const Point& p, double tol = 1e-9) {
    switch (st.kind) {
        case Stratum::Kind::segment: {
            double L = euclidean_distance(st.a, st.b);
            double ux = (st.b[0] - st.a[0]) / L, uy = (st.b[1] - st.a[1]) / L;
            double m = ux * (p[0] - st.a[0]) + uy * (p[1] - st.a[1]);
            if (m < -tol || m > L + tol) return false;
            double px = st.a[0] + m * ux, py = st.a[1] + m * uy;
            return std::hypot(p[0] - px, p[1] - py) <= tol;
        }
        case Stratum::Kind::rectangle:
            return p[0] >= st.lo[0] - tol && p[0] <= st.hi[0] + tol && p[1] >= st.lo[1] - tol &&
                   p[1] <= st.hi[1] + tol;
        case Stratum::Kind::circle:
            return std::abs(euclidean_distance(p, st.center) - st.radius) <= tol;
        case Stratum::Kind::graph_curve:
            return p[0] >= st.gx0 - tol && p[0] <= st.gx1 + tol &&
                   std::abs(st.graph.eval(Point{p[0]}) - p[1]) <= tol;
    }
    return false;
}

inline void stratum_discretize(const Stratum& st, const RegionSpec& region, int resolution,
                               std::vector<Atom>& out) {
    switch (st.kind) {
        case Stratum::Kind::segment: {
            double L = euclidean_distance(st.a, st.b);
            double h = L / resolution;
            for (int k = 0; k < resolution; ++k) {
                Point p = segment_param(st, (k + 0.5) * h);
                if (!region.contains(p)) continue;
                out.push_back({p, st.dens_at(p) * h});
            }
            break;
        }
        case Stratum::Kind::rectangle: {
            double hx = (st.hi[0] - st.lo[0]) / resolution, hy = (st.hi[1] - st.lo[1]) / resolution;
            for (int i = 0; i < resolution; ++i)
                for (int j = 0; j < resolution; ++j) {
                    Point p{st.lo[0] + (i + 0.5) * hx, st.lo[1] + (j + 0.5) * hy};
                    if (!region.contains(p)) continue;
                    out.push_back({p, st.dens_at(p) * hx * hy});
                }
            break;
        }
        case Stratum::Kind::circle: {
            double h = 2.0 * pi() / resolution;
            for (int k = 0; k < resolution; ++k) {
                double th = (k + 0.5) * h;
                Point p{st.center[0] + st.radius * std::cos(th), st.center[1] + st.radius * std::sin(th)};
                if (!region.contains(p)) continue;
                out.push_back({p, st.dens_at(p) * st.radius * h});
            }
            break;
        }
        case Stratum::Kind::graph_curve: {
            Polynomial dg = st.graph.partial(0);
            double h = (st.gx1 - st.gx0) / resolution;
            for (int k = 0; k < resolution; ++k) {
                double t = st.gx0 + (k + 0.5) * h;
                Point p{t, st.graph.eval(Point{t})};
                if (!region.contains(p)) continue;
                double d = dg.eval(Point{t});
                out.push_back({p, st.dens_at(p) * std::sqrt(1.0 + d * d) * h});
            }
            break;
        }
    }
}

// parameter-space Monte Carlo per stratum (cross-validation route)
inline BallEstimate stratum_mc_estimate(const Stratum& st, const Point& x, double r,
                                        const ScalarField* f, const EffortBudget& budget) {
    std::uint64_t salt = hash_double(r) ^ hash_double(x[0]) * 5 ^ hash_double(x[1]) * 7;
    auto finish = [&](const RatioAccumulator& acc) {
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
    };
    switch (st.kind) {
        case Stratum::Kind::segment: {
            double L = euclidean_distance(st.a, st.b);
            return finish(mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
                Point p = segment_param(st, rng.uniform(0.0, L));
                if (!(euclidean_distance(p, x) < r)) return {0.0, 0.0};
                double w = st.dens_at(p) * L;
                return {f ? w * eval_checked(*f, p) : 0.0, w};
            }));
        }
        case Stratum::Kind::rectangle: {
            double area = (st.hi[0] - st.lo[0]) * (st.hi[1] - st.lo[1]);
            return finish(mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
                Point p{rng.uniform(st.lo[0], st.hi[0]), rng.uniform(st.lo[1], st.hi[1])};
                if (!(euclidean_distance(p, x) < r)) return {0.0, 0.0};
                double w = st.dens_at(p) * area;
                return {f ? w * eval_checked(*f, p) : 0.0, w};
            }));
        }
        case Stratum::Kind::circle: {
            return finish(mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
                double th = rng.uniform(0.0, 2.0 * pi());
                Point p{st.center[0] + st.radius * std::cos(th),
                        st.center[1] + st.radius * std::sin(th)};
                if (!(euclidean_distance(p, x) < r)) return {0.0, 0.0};
                double w = st.dens_at(p) * 2.0 * pi() * st.radius;
                return {f ? w * eval_checked(*f, p) : 0.0, w};
            }));
        }
        case Stratum::Kind::graph_curve: {
            Polynomial dg = st.graph.partial(0);
            return finish(mc_run(budget, salt, [&](SplitMix64& rng) -> std::pair<double, double> {
                double t = rng.uniform(st.gx0, st.gx1);
                Point p{t, st.graph.eval(Point{t})};
                if (!(euclidean_distance(p, x) < r)) return {0.0, 0.0};
                double d = dg.eval(Point{t});
                double w = st.dens_at(p) * std::sqrt(1.0 + d * d) * (st.gx1 - st.gx0);
                return {f ? w * eval_checked(*f, p) : 0.0, w};
            }));
        }
    }
    return {};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stratified measure: sum of Ahlfors-regular strata on closed supports
// ---------------------------------------------------------------------------

class StratifiedImpl : public SpaceImpl {
public:
    explicit StratifiedImpl(std::vector<Stratum> strata, std::string kind_name = "stratified")
        : strata_(std::move(strata)), kind_name_(std::move(kind_name)) {
        if (strata_.empty()) throw input_error("stratified_complex: no strata");
        for (const auto& st : strata_)
            if (st.kind == Stratum::Kind::segment && !(euclidean_distance(st.a, st.b) > 0.0))
                throw domain_error("stratified_complex: stratum with empty support");
    }

    int ambient_dim() const override { return 2; }

    bool in_support(const Point& p) const override {
        for (const auto& st : strata_)
            if (detail::stratum_in_support(st, p)) return true;
        return false;
    }

    BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                               const EffortBudget& budget) const override {
        BallEstimate total;
        bool first = true;
        for (const auto& st : strata_) {
            BallEstimate e = detail::stratum_ball_estimate(st, x, r, f, budget);
            total = first ? e : combine_sum(total, e);
            first = false;
        }
        return total;
    }

    std::optional<BallEstimate> mc_ball_estimate(const Point& x, double r, const ScalarField* f,
                                                 const EffortBudget& budget) const override {
        BallEstimate total;
        bool first = true;
        for (const auto& st : strata_) {
            BallEstimate e = detail::stratum_mc_estimate(st, x, r, f, budget);
            total = first ? e : combine_sum(total, e);
            first = false;
        }
        return total;
    }

    std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                 std::uint64_t) const override {
        std::vector<Atom> atoms;
        for (const auto& st : strata_) detail::stratum_discretize(st, region, resolution, atoms);
        if (atoms.empty()) throw domain_error("discretize: region misses every stratum");
        return atoms;
    }

    json descriptor() const override {
        json j{{"kind", kind_name_}};
        json arr = json::array();
        for (const auto& st : strata_) arr.push_back(st.to_json());
        j["strata"] = arr;
        return j;
    }

    std::optional<AhlforsInfo> ahlfors() const override {
        // meaningful only when every stratum declares constants and shares Q
        AhlforsInfo info;
        bool ok = true;
        for (std::size_t i = 0; i < strata_.size(); ++i) {
            if (!strata_[i].ahlfors_constants || (i && strata_[i].ahlfors_q != info.Q)) {
                ok = false;
                break;
            }
            info.Q = strata_[i].ahlfors_q;
            info.c += strata_[i].ahlfors_constants->first;
            info.C += strata_[i].ahlfors_constants->second;
        }
        if (!ok) return std::nullopt;
        return info;
    }

    const std::vector<Stratum>& strata() const { return strata_; }

private:
    std::vector<Stratum> strata_;
    std::string kind_name_;
};

inline Space stratified_complex(std::vector<Stratum> strata) {
    return Space(std::make_shared<StratifiedImpl>(std::move(strata)));
}

// ---------------------------------------------------------------------------
// Embedded submanifolds of R^2 with H^m and the extrinsic distance
// ---------------------------------------------------------------------------

struct SubmanifoldSpec {
    enum class Kind { circle, segment, graph_curve };
    Kind kind = Kind::circle;
    double radius = 1.0;   // circle
    Point a, b;            // segment
    Polynomial graph;      // graph curve
    double gx0 = 0, gx1 = 0;
    int intrinsic_dim = 1;
    // optional curvature data for expansion checks
    std::optional<double> second_fundamental_norm, mean_curvature_norm, scalar_curvature;
};

inline Space embedded_submanifold(const SubmanifoldSpec& spec) {
    Stratum st;
    switch (spec.kind) {
        case SubmanifoldSpec::Kind::circle:
            st = Stratum::circle(Point{0.0, 0.0}, spec.radius, 1.0);
            st.ahlfors_constants = {{1.0, 2.5}};
            break;
        case SubmanifoldSpec::Kind::segment:
            st = Stratum::segment(spec.a, spec.b, 1.0);
            st.ahlfors_constants = {{1.0, 2.0}};
            break;
        case SubmanifoldSpec::Kind::graph_curve:
            st = Stratum::graph_curve(spec.graph, spec.gx0, spec.gx1, 1.0);
            break;
        default:
            throw input_error("embedded_submanifold: unsupported kind");
    }
    return Space(std::make_shared<StratifiedImpl>(std::vector<Stratum>{st}, "submanifold"));
}

}  // namespace amv
