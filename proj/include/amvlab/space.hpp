#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "field.hpp"
#include "point.hpp"

namespace amv {

using json = nlohmann::ordered_json;

// Axis-aligned box region of the ambient chart; the carrier description for
// atom-cloud discretizations.
struct RegionSpec {
    int dim = 0;
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};

    bool empty() const {
        for (int i = 0; i < dim; ++i)
            if (!(hi[static_cast<std::size_t>(i)] > lo[static_cast<std::size_t>(i)])) return true;
        return dim == 0;
    }
    bool contains(const Point& p, double tol = 0.0) const {
        for (int i = 0; i < dim; ++i)
            if (p[i] < lo[static_cast<std::size_t>(i)] - tol || p[i] > hi[static_cast<std::size_t>(i)] + tol)
                return false;
        return true;
    }
    json to_json() const {
        json j;
        j["lo"] = std::vector<double>(lo.begin(), lo.begin() + dim);
        j["hi"] = std::vector<double>(hi.begin(), hi.begin() + dim);
        return j;
    }
};

struct Atom {
    Point p;
    double weight;
};

// Ahlfors regularity data c r^Q <= mu(B_r) <= C r^Q, when declared.
struct AhlforsInfo {
    double Q = 0.0;
    double c = 0.0;
    double C = 0.0;
};

// A metric measure space: metric oracle + ball-integration backend + support
// membership. Implementations are immutable after construction and safe to
// share across threads.
class SpaceImpl {
public:
    virtual ~SpaceImpl() = default;

    virtual int ambient_dim() const = 0;

    virtual double distance(const Point& p, const Point& q) const { return euclidean_distance(p, q); }

    virtual bool metric_is_euclidean() const { return true; }

    virtual bool in_support(const Point&) const { return true; }

    // f == nullptr requests the mass only (integral field left at zero).
    virtual BallEstimate ball_estimate(const Point& x, double r, const ScalarField* f,
                                       const EffortBudget& budget) const = 0;

    // Independent Monte Carlo route for backend cross-validation; spaces
    // whose primary backend is already Monte Carlo return nothing here.
    virtual std::optional<BallEstimate> mc_ball_estimate(const Point&, double, const ScalarField*,
                                                         const EffortBudget&) const {
        return std::nullopt;
    }

    // Exact centered estimate (integral of f - f(x) over the ball, ball
    // mass) where a closed form exists; the AMV estimator prefers it since
    // the r^-2 scaling punishes any cancellation in the average.
    virtual std::optional<std::pair<double, double>> centered_ball_estimate(const Point&, double,
                                                                            const ScalarField&) const {
        return std::nullopt;
    }

    virtual std::vector<Atom> discretize(const RegionSpec& region, int resolution,
                                         std::uint64_t seed) const = 0;

    virtual json descriptor() const = 0;

    virtual std::optional<AhlforsInfo> ahlfors() const { return std::nullopt; }
};

class Space {
public:
    Space() = default;
    explicit Space(std::shared_ptr<const SpaceImpl> impl) : impl_(std::move(impl)) {}

    int ambient_dim() const { return impl().ambient_dim(); }
    bool in_support(const Point& p) const { return impl().in_support(p); }
    json descriptor() const { return impl().descriptor(); }
    std::optional<AhlforsInfo> ahlfors() const { return impl().ahlfors(); }
    const SpaceImpl& impl() const {
        if (!impl_) throw input_error("Space: empty handle");
        return *impl_;
    }

private:
    std::shared_ptr<const SpaceImpl> impl_;
};

inline void check_point(const Space& s, const Point& p, const char* who) {
    if (p.dim != s.ambient_dim())
        throw input_error(std::string(who) + ": point dimension " + std::to_string(p.dim) +
                          " does not match ambient dimension " + std::to_string(s.ambient_dim()));
    p.check_finite();
}

inline double distance(const Space& s, const Point& p, const Point& q) {
    check_point(s, p, "distance");
    check_point(s, q, "distance");
    return s.impl().distance(p, q);
}

inline BallEstimate ball_mass(const Space& s, const Point& x, double r,
                              const EffortBudget& budget = {}) {
    check_point(s, x, "ball_mass");
    if (!(r > 0.0)) throw input_error("ball_mass: radius must be positive");
    if (!s.in_support(x)) throw domain_error("ball_mass: point " + x.str() + " outside supp mu");
    BallEstimate e = s.impl().ball_estimate(x, r, nullptr, budget);
    if (!(e.mass > 0.0)) throw domain_error("ball_mass: zero mass at " + x.str());
    return e;
}

inline BallEstimate ball_integrate(const Space& s, const Point& x, double r, const ScalarField& f,
                                   const EffortBudget& budget = {}) {
    check_point(s, x, "ball_integrate");
    if (!(r > 0.0)) throw input_error("ball_integrate: radius must be positive");
    if (!s.in_support(x)) throw domain_error("ball_integrate: point " + x.str() + " outside supp mu");
    BallEstimate e = s.impl().ball_estimate(x, r, &f, budget);
    if (!(e.mass > 0.0)) throw domain_error("ball_integrate: zero mass at " + x.str());
    return e;
}

// Monte Carlo cross-check route (backend agreement tests); empty when the
// primary backend is itself Monte Carlo.
inline std::optional<BallEstimate> ball_mass_mc(const Space& s, const Point& x, double r,
                                                const EffortBudget& budget = {}) {
    check_point(s, x, "ball_mass_mc");
    return s.impl().mc_ball_estimate(x, r, nullptr, budget);
}

}  // namespace amv
