#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cloud.hpp"
#include "common.hpp"
#include "estimator.hpp"
#include "space.hpp"

namespace amv {

namespace detail {

// Ball adjacency under the cloud metric, strict inequality d < r (open
// balls); every atom is its own neighbor. O(N^2) is fine at desk scale.
inline std::vector<std::vector<int>> ball_neighbors(const AtomCloud& cloud, double r,
                                                    bool* tie_detected = nullptr) {
    std::size_t n = cloud.size();
    std::vector<std::vector<int>> nb(n);
    bool custom = static_cast<bool>(cloud.metric);
    parallel_for(n, [&](std::size_t i) {
        auto& row = nb[i];
        for (std::size_t j = 0; j < n; ++j) {
            double d = custom ? cloud.metric(cloud.atoms[i].p, cloud.atoms[j].p)
                              : euclidean_distance(cloud.atoms[i].p, cloud.atoms[j].p);
            if (d < r)
                row.push_back(static_cast<int>(j));
            else if (tie_detected && d == r)
                *tie_detected = true;
        }
    });
    return nb;
}

}  // namespace detail

// Bumps r by ulps until no atom pair sits exactly on the sphere, keeping
// operator sparsity patterns reproducible.
inline double untie_radius(const AtomCloud& cloud, double r) {
    for (int k = 0; k < 8; ++k) {
        bool tie = false;
        detail::ball_neighbors(cloud, r, &tie);
        if (!tie) return r;
        r = std::nextafter(r, std::numeric_limits<double>::infinity());
    }
    return r;
}

enum class OperatorKind { ball_average, amv };

// Discrete T_r or Delta_r = (T_r - I)/r^2 on an atom cloud. `apply` divides
// by the row mass after the weighted sum, which keeps T_r 1 = 1 exact; the
// sparse matrix mirrors the same action for export and solves.
struct DiscreteOperator {
    AtomCloud cloud;
    double r = 0.0;
    OperatorKind kind = OperatorKind::ball_average;
    Eigen::SparseMatrix<double> action;
    std::vector<double> row_masses;
    std::vector<std::vector<int>> neighbors;

    std::size_t size() const { return cloud.size(); }

    std::vector<double> apply(const std::vector<double>& u) const {
        std::size_t n = size();
        if (u.size() != n) throw input_error("DiscreteOperator::apply: size mismatch");
        std::vector<double> out(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j : neighbors[i]) s += cloud.atoms[static_cast<std::size_t>(j)].weight * u[static_cast<std::size_t>(j)];
            double avg = s / row_masses[i];
            out[i] = kind == OperatorKind::ball_average ? avg : (avg - u[i]) / (r * r);
        }
        return out;
    }
};

inline DiscreteOperator build_Tr(const AtomCloud& cloud, double r) {
    cloud.validate();
    if (!(r > 0.0)) throw input_error("build_Tr: radius must be positive");
    DiscreteOperator op;
    op.cloud = cloud;
    op.r = r;
    op.kind = OperatorKind::ball_average;
    op.neighbors = detail::ball_neighbors(cloud, r);
    std::size_t n = cloud.size();
    op.row_masses.resize(n);
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (int j : op.neighbors[i]) m += cloud.atoms[static_cast<std::size_t>(j)].weight;
        if (!(m > 0.0))
            throw domain_error("build_Tr: empty ball at atom " + std::to_string(i) + " " +
                               cloud.atoms[i].p.str());
        op.row_masses[i] = m;
        for (int j : op.neighbors[i])
            trips.emplace_back(static_cast<int>(i), j, cloud.atoms[static_cast<std::size_t>(j)].weight / m);
    }
    op.action.resize(static_cast<int>(n), static_cast<int>(n));
    op.action.setFromTriplets(trips.begin(), trips.end());
    return op;
}

inline DiscreteOperator build_amv_operator(const AtomCloud& cloud, double r) {
    DiscreteOperator op = build_Tr(cloud, r);
    op.kind = OperatorKind::amv;
    double inv_r2 = 1.0 / (r * r);
    Eigen::SparseMatrix<double> eye(op.action.rows(), op.action.cols());
    eye.setIdentity();
    op.action = ((op.action - eye) * inv_r2).pruned(0.0, 0.0);
    return op;
}

// w(x_i) = sum over the ball of w_j / mu(B_r(x_j)): the weight that turns
// the L^p mapping bound for T_r into an exact finite-sum inequality.
inline std::vector<double> lemma_weight(const AtomCloud& cloud, double r) {
    DiscreteOperator T = build_Tr(cloud, r);
    std::size_t n = cloud.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (int j : T.neighbors[i])
            w[i] += cloud.atoms[static_cast<std::size_t>(j)].weight / T.row_masses[static_cast<std::size_t>(j)];
    return w;
}

// weighted L^p norms on the cloud (mu = atom weights, optionally times an
// extra per-atom factor)
inline double cloud_lp_norm(const AtomCloud& cloud, const std::vector<double>& u, double p,
                            const std::vector<double>* extra = nullptr) {
    std::size_t n = cloud.size();
    if (std::isinf(p)) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(u[i]));
        return m;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double w = cloud.atoms[i].weight * (extra ? (*extra)[i] : 1.0);
        s += w * std::pow(std::abs(u[i]), p);
    }
    return std::pow(s, 1.0 / p);
}

struct GreenReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double defect = 0.0;
    double selfadjoint_defect = 0.0;
    double scale = 1.0;  // sum of |terms| entering the rhs, for tolerance scaling
};

// Both sides of the Green-type identity are rearrangements of one finite
// double sum, so the defect is pure floating-point noise. The two sides are
// summed in deliberately different orders (i-major vs j-major) to make the
// reported defect meaningful.
inline GreenReport green_check(const AtomCloud& cloud, double r, const std::vector<double>& u,
                               const std::vector<double>& v) {
    std::size_t n = cloud.size();
    if (u.size() != n || v.size() != n) throw input_error("green_check: field size mismatch");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
            throw evaluation_error("green_check: non-finite field value at atom " + std::to_string(i));
    DiscreteOperator D = build_amv_operator(cloud, r);

    GreenReport rep;
    std::vector<double> Du = D.apply(u), Dv = D.apply(v);
    for (std::size_t i = 0; i < n; ++i)
        rep.lhs += cloud.atoms[i].weight * (v[i] * Du[i] - u[i] * Dv[i]);

    // rhs: (1/r^2) sum_i w_i u_i sum_{j in B(i)} w_j v_j (1/m_j - 1/m_i),
    // accumulated j-major
    std::vector<std::vector<int>> rev(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int j : D.neighbors[i]) rev[static_cast<std::size_t>(j)].push_back(static_cast<int>(i));
    double inv_r2 = 1.0 / (r * r);
    double abs_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double col = 0.0, col_abs = 0.0;
        for (int ii : rev[j]) {
            std::size_t i = static_cast<std::size_t>(ii);
            double term = cloud.atoms[i].weight * u[i] * cloud.atoms[j].weight * v[j] *
                          (1.0 / D.row_masses[j] - 1.0 / D.row_masses[i]);
            col += term;
            col_abs += std::abs(term);
        }
        rep.rhs += col * inv_r2;
        abs_sum += col_abs * inv_r2;
    }
    rep.defect = std::abs(rep.lhs - rep.rhs);
    rep.scale = 1.0 + abs_sum;

    // asymmetry of Delta_r in L^2(mu): Frobenius norm of M - M^T with
    // M = D^{1/2} A D^{-1/2}
    Eigen::VectorXd sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[static_cast<Eigen::Index>(i)] = std::sqrt(cloud.atoms[i].weight);
    Eigen::SparseMatrix<double> M = sq.asDiagonal() * D.action * sq.cwiseInverse().asDiagonal();
    Eigen::SparseMatrix<double> Mt = Eigen::SparseMatrix<double>(M.transpose());
    rep.selfadjoint_defect = Eigen::SparseMatrix<double>(M - Mt).norm();
    return rep;
}

struct NormProbe {
    double empirical = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
};

// Empirical operator norm on L^p(mu) against the Ahlfors bound C/c for T_r
// (and (1 + C/c)/r^2 for Delta_r); a uniform measure is the case c = C.
inline NormProbe op_norm_probe(const DiscreteOperator& op, double p,
                               std::optional<AhlforsInfo> info = std::nullopt) {
    if (!info) throw input_error("op_norm_probe: Ahlfors/doubling constants missing");
    std::size_t n = op.size();
    const auto& A = op.action;
    double norm = 0.0;
    if (std::isinf(p)) {
        std::vector<double> rowsum(n, 0.0);
        for (int k = 0; k < A.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
                rowsum[static_cast<std::size_t>(it.row())] += std::abs(it.value());
        for (double s : rowsum) norm = std::max(norm, s);
    } else if (p == 1.0) {
        std::vector<double> colsum(n, 0.0);
        for (int k = 0; k < A.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
                colsum[static_cast<std::size_t>(it.col())] +=
                    op.cloud.atoms[static_cast<std::size_t>(it.row())].weight * std::abs(it.value());
        for (std::size_t j = 0; j < n; ++j) norm = std::max(norm, colsum[j] / op.cloud.atoms[j].weight);
    } else if (p == 2.0) {
        // power iteration for the largest singular value of D^{1/2} A D^{-1/2}
        Eigen::VectorXd sq(n);
        for (std::size_t i = 0; i < n; ++i) sq[static_cast<Eigen::Index>(i)] = std::sqrt(op.cloud.atoms[i].weight);
        Eigen::SparseMatrix<double> M = sq.asDiagonal() * A * sq.cwiseInverse().asDiagonal();
        Eigen::VectorXd x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)).normalized();
        for (int i = 0; i < static_cast<int>(n); ++i) x[i] += 1e-3 * std::sin(1.0 + i);
        x.normalize();
        double sigma = 0.0;
        for (int it = 0; it < 300; ++it) {
            Eigen::VectorXd y = M.transpose() * (M * x);
            double ny = y.norm();
            if (ny == 0.0) break;
            x = y / ny;
            sigma = std::sqrt(ny);
        }
        norm = sigma;
    } else {
        throw input_error("op_norm_probe: p must be 1, 2 or inf");
    }
    NormProbe probe;
    probe.empirical = norm;
    double cc = info->C / info->c;
    probe.bound = op.kind == OperatorKind::ball_average ? cc : (1.0 + cc) / (op.r * op.r);
    probe.ratio = norm / probe.bound;
    return probe;
}

// Solves Delta_r u = f on interior atoms with u = g on boundary atoms via a
// sparse direct factorization plus one step of iterative refinement.
inline std::vector<double> solve_poisson(const AtomCloud& cloud, double r,
                                         const std::vector<double>& f,
                                         const std::vector<std::size_t>& boundary,
                                         const std::vector<double>& g) {
    std::size_t n = cloud.size();
    if (boundary.empty()) throw input_error("solve_poisson: boundary atom set is empty");
    if (g.size() != boundary.size()) throw input_error("solve_poisson: boundary data size mismatch");
    DiscreteOperator D = build_amv_operator(cloud, r);

    std::vector<int> role(n, -1);  // interior index or -2 for boundary
    for (std::size_t b = 0; b < boundary.size(); ++b) {
        if (boundary[b] >= n) throw input_error("solve_poisson: boundary index out of range");
        role[boundary[b]] = -2;
    }
    std::vector<std::size_t> interior;
    for (std::size_t i = 0; i < n; ++i)
        if (role[i] != -2) {
            role[i] = static_cast<int>(interior.size());
            interior.push_back(i);
        }
    std::size_t ni = interior.size();
    if (ni == 0) {
        std::vector<double> u(n, 0.0);
        for (std::size_t b = 0; b < boundary.size(); ++b) u[boundary[b]] = g[b];
        return u;
    }
    if (f.size() != n && f.size() != ni) throw input_error("solve_poisson: rhs size mismatch");

    std::vector<double> ub(n, 0.0);
    for (std::size_t b = 0; b < boundary.size(); ++b) ub[boundary[b]] = g[b];

    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(ni));
    for (std::size_t k = 0; k < ni; ++k) {
        std::size_t i = interior[k];
        double b = f.size() == n ? f[i] : f[k];
        double inv_r2 = 1.0 / (r * r), m = D.row_masses[i];
        for (int j : D.neighbors[i]) {
            double a = cloud.atoms[static_cast<std::size_t>(j)].weight / m * inv_r2;
            if (static_cast<std::size_t>(j) == i) a -= inv_r2;
            if (role[static_cast<std::size_t>(j)] >= 0)
                trips.emplace_back(static_cast<int>(k), role[static_cast<std::size_t>(j)], a);
            else
                b -= a * ub[static_cast<std::size_t>(j)];
        }
        rhs[static_cast<Eigen::Index>(k)] = b;
    }
    Eigen::SparseMatrix<double> A(static_cast<int>(ni), static_cast<int>(ni));
    A.setFromTriplets(trips.begin(), trips.end());
    A.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    auto fail = [&](const std::string& why) {
        // crude condition estimate from a few power iterations on A and A^-1
        double amax = 0.0;
        for (int k = 0; k < A.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(A, k); it; ++it)
                amax = std::max(amax, std::abs(it.value()));
        throw numeric_error("solve_poisson: " + why + " (matrix " + std::to_string(ni) + "x" +
                            std::to_string(ni) + ", max entry " + std::to_string(amax) + ")");
    };
    if (lu.info() != Eigen::Success) fail("singular interior system");
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success) fail("factorization solve failed");
    // one refinement pass
    Eigen::VectorXd resid = rhs - A * x;
    x += lu.solve(resid);
    resid = rhs - A * x;
    double amax = A.coeffs().cwiseAbs().maxCoeff();
    double bmax = rhs.cwiseAbs().maxCoeff() + 1e-300;
    double xmax = x.cwiseAbs().maxCoeff();
    double scale = bmax + amax * xmax;
    if (!(resid.cwiseAbs().maxCoeff() <= 1e-8 * scale)) fail("residual too large after refinement");
    // a near-null-space solution passes the backward-error test with a huge
    // x; the growth factor is a cheap condition lower bound
    double cond_lb = amax * xmax / bmax;
    if (!(cond_lb < 1e12))
        fail("interior system numerically singular (condition >= " + std::to_string(cond_lb) + ")");

    std::vector<double> u = ub;
    for (std::size_t k = 0; k < ni; ++k) u[interior[k]] = x[static_cast<Eigen::Index>(k)];
    return u;
}

// Maximum-principle audit: flags interior atoms that attain the global max
// strictly above the boundary maximum. Per the fixed-r contradiction, any
// flagged atom must have Delta_r u <= 0 there; the discrete AMV value is
// reported per flagged atom as a diagnostic.
struct MaxPrinAudit {
    std::vector<std::size_t> interior_max_atoms;
    std::vector<double> amv_at_flagged;
    double margin = 0.0;  // max over interior minus max over boundary
    bool pass = true;
};

inline MaxPrinAudit maxprin_audit(const AtomCloud& cloud, double r, const std::vector<double>& u,
                                  const std::vector<std::size_t>& interior) {
    std::size_t n = cloud.size();
    if (u.size() != n) throw input_error("maxprin_audit: field size mismatch");
    std::vector<bool> is_int(n, false);
    for (std::size_t i : interior) {
        if (i >= n) throw input_error("maxprin_audit: interior index out of range");
        is_int[i] = true;
    }
    double max_int = -std::numeric_limits<double>::infinity();
    double max_bdy = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) (is_int[i] ? max_int : max_bdy) = std::max(is_int[i] ? max_int : max_bdy, u[i]);

    MaxPrinAudit audit;
    audit.margin = max_int - max_bdy;
    double span = 0.0;
    for (std::size_t i = 0; i < n; ++i) span = std::max(span, std::abs(u[i]));
    double tol = 1e-12 * std::max(span, 1.0);
    if (audit.margin > tol) {
        DiscreteOperator D = build_amv_operator(cloud, r);
        std::vector<double> Du = D.apply(u);
        for (std::size_t i = 0; i < n; ++i)
            if (is_int[i] && u[i] >= max_int - tol) {
                audit.interior_max_atoms.push_back(i);
                audit.amv_at_flagged.push_back(Du[i]);
            }
        audit.pass = audit.interior_max_atoms.empty();
    }
    return audit;
}

// Exports the sparse action in triplet text form: a header line with the
// dimensions and r, then one "row col value" line per entry.
inline void export_operator(const DiscreteOperator& op, std::ostream& out) {
    out << "# amv-operator " << (op.kind == OperatorKind::ball_average ? "T_r" : "Delta_r") << " n="
        << op.size() << " r=" << op.r << "\n";
    char buf[96];
    for (int k = 0; k < op.action.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(op.action, k); it; ++it) {
            std::snprintf(buf, sizeof buf, "%ld %ld %.17g\n", static_cast<long>(it.row()),
                          static_cast<long>(it.col()), it.value());
            out << buf;
        }
}

// Weak AMV pairing: for each scheduled radius integrates
// phi(x) Delta_{mu,r} u(x) over supp phi against mu, then extrapolates the
// r -> 0 limit exactly like amv_limit. The integral over supp phi is
// realized as a ball integral of a field that vanishes off the support box.
inline AmvResult weak_pairing(const Space& space, const ScalarField& u, const ScalarField& phi,
                              const RadiusSchedule& schedule, const EffortBudget& budget = {},
                              const FitOptions& opts = {}) {
    if (!phi.support()) throw input_error("weak_pairing: phi must declare a compact support box");
    auto [lo, hi] = *phi.support();
    int dim = space.ambient_dim();
    Point center = Point::zero(dim);
    double rad2 = 0.0;
    for (int i = 0; i < dim; ++i) {
        center[i] = 0.5 * (lo[i] + hi[i]);
        double h = 0.5 * (hi[i] - lo[i]);
        rad2 += h * h;
    }
    double big_r = std::sqrt(rad2) * (1.0 + 1e-9) + 1e-12;

    std::vector<double> rs = schedule.radii();
    std::vector<TracePoint> trace(rs.size());
    parallel_for(rs.size(), [&](std::size_t k) {
        double r = rs[k];
        EffortBudget b = budget;
        b.seed = mix_seed(budget.seed, k + 101);
        std::vector<double> breaks = phi.singularities();
        for (double s : u.singularities()) {
            breaks.push_back(s);
            breaks.push_back(s - r);
            breaks.push_back(s + r);
        }
        ScalarField integrand = ScalarField::from_function(dim, [&, r, b](const Point& x) {
            for (int i = 0; i < dim; ++i)
                if (x[i] < lo[i] || x[i] > hi[i]) return 0.0;
            double ph = phi(x);
            if (ph == 0.0) return 0.0;
            return ph * amv_at_radius(space, u, x, r, b).value;
        });
        integrand.with_singularities(breaks);
        BallEstimate est = ball_integrate(space, center, big_r, integrand, b);
        trace[k] = TracePoint{r, est.integral, est.abs_error};
    });
    return classify_trace(trace, opts);
}

}  // namespace amv
