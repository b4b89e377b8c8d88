#pragma once

#include <functional>
#include <string>
#include <vector>

#include "common.hpp"
#include "point.hpp"
#include "space.hpp"

namespace amv {

// Finite quadrature discretization of a region: the carrier of the discrete
// operators T_r and Delta_r. Atoms are midpoint-rule nodes with
// weight = density x cell volume; Dirac atoms are carried exactly.
struct AtomCloud {
    std::vector<Atom> atoms;
    std::function<double(const Point&, const Point&)> metric;  // defaults to Euclidean
    std::string region_desc;
    json source_space;
    std::uint64_t seed = 0;

    std::size_t size() const { return atoms.size(); }

    double dist(std::size_t i, std::size_t j) const {
        if (metric) return metric(atoms[i].p, atoms[j].p);
        return euclidean_distance(atoms[i].p, atoms[j].p);
    }

    double total_weight() const {
        double s = 0.0;
        for (const auto& a : atoms) s += a.weight;
        return s;
    }

    void validate() const {
        if (atoms.empty()) throw domain_error("AtomCloud: empty cloud");
        for (const auto& a : atoms)
            if (!(a.weight > 0.0)) throw input_error("AtomCloud: nonpositive atom weight");
    }
};

// Deterministic for fixed (region, resolution, seed).
inline AtomCloud make_atom_cloud(const Space& space, const RegionSpec& region, int resolution,
                                 std::uint64_t seed = 0) {
    if (region.empty()) throw domain_error("make_atom_cloud: empty region");
    if (resolution < 1) throw input_error("make_atom_cloud: resolution must be positive");
    AtomCloud cloud;
    cloud.atoms = space.impl().discretize(region, resolution, seed);
    if (!space.impl().metric_is_euclidean())
        cloud.metric = [keepalive = space](const Point& p, const Point& q) {
            return keepalive.impl().distance(p, q);
        };
    cloud.region_desc = region.to_json().dump();
    cloud.source_space = space.descriptor();
    cloud.seed = seed;
    cloud.validate();
    return cloud;
}

}  // namespace amv
