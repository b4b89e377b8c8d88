#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cloud.hpp"
#include "common.hpp"
#include "estimator.hpp"
#include "expr.hpp"
#include "heisenberg.hpp"
#include "operators.hpp"
#include "space.hpp"
#include "spaces.hpp"
#include "suites.hpp"

namespace amv {

// JSON-configured experiment surface behind the CLI. Parse errors throw
// input_error naming the offending field; the CLI maps those to exit 1 and
// evaluation/numeric failures to exit 2.

namespace detail {

inline Point point_from_json(const json& j, int dim, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim)
        throw input_error(what + ": expected an array of " + std::to_string(dim) + " coordinates");
    Point p = Point::zero(dim);
    for (int i = 0; i < dim; ++i) p[i] = j[static_cast<std::size_t>(i)].get<double>();
    p.check_finite();
    return p;
}

inline Polynomial poly_from_coeffs(const json& j) {
    // coefficients of a univariate polynomial in x, constant term first
    Polynomial p(1);
    int k = 0;
    for (const auto& c : j) p.add_term(c.get<double>(), {k++, 0, 0});
    return p;
}

}  // namespace detail

inline Stratum stratum_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    Stratum st;
    if (kind == "segment") {
        st = Stratum::segment(detail::point_from_json(j.at("a"), 2, "stratum.a"),
                              detail::point_from_json(j.at("b"), 2, "stratum.b"),
                              j.value("Q", 1.0));
    } else if (kind == "rectangle") {
        auto lo = j.at("lo"), hi = j.at("hi");
        st = Stratum::rectangle({lo[0].get<double>(), lo[1].get<double>()},
                                {hi[0].get<double>(), hi[1].get<double>()}, j.value("Q", 2.0));
    } else if (kind == "circle") {
        st = Stratum::circle(detail::point_from_json(j.at("center"), 2, "stratum.center"),
                             j.at("radius").get<double>(), j.value("Q", 1.0));
    } else if (kind == "graph_curve") {
        auto range = j.at("range");
        st = Stratum::graph_curve(detail::poly_from_coeffs(j.at("coeffs")), range[0].get<double>(),
                                  range[1].get<double>(), j.value("Q", 1.0));
    } else {
        throw input_error("stratum.kind: unknown kind '" + kind + "'");
    }
    if (j.contains("density")) {
        st.density = field_from_expression(j.at("density").get<std::string>(), 2);
        st.unit_density = false;
    }
    if (j.contains("ahlfors_constants")) {
        auto cc = j.at("ahlfors_constants");
        st.ahlfors_constants = {{cc[0].get<double>(), cc[1].get<double>()}};
    }
    return st;
}

inline Space space_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "euclidean") return euclidean_lebesgue(j.at("dim").get<int>());
    if (kind == "weighted") {
        int dim = j.at("dim").get<int>();
        WeightSpec w;
        w.density = field_from_expression(j.at("density").get<std::string>(), dim);
        w.zero_set_hint = j.value("zero_set", "");
        return weighted_lebesgue(dim, std::move(w));
    }
    if (kind == "lebesgue_plus_dirac") return lebesgue_plus_dirac(j.at("dim").get<int>());
    if (kind == "heisenberg") return heisenberg_cc();
    if (kind == "stratified") {
        std::vector<Stratum> strata;
        for (const auto& sj : j.at("strata")) strata.push_back(stratum_from_json(sj));
        return stratified_complex(std::move(strata));
    }
    if (kind == "submanifold") {
        SubmanifoldSpec spec;
        std::string sub = j.at("shape").get<std::string>();
        if (sub == "circle") {
            spec.kind = SubmanifoldSpec::Kind::circle;
            spec.radius = j.value("radius", 1.0);
        } else if (sub == "segment") {
            spec.kind = SubmanifoldSpec::Kind::segment;
            spec.a = detail::point_from_json(j.at("a"), 2, "submanifold.a");
            spec.b = detail::point_from_json(j.at("b"), 2, "submanifold.b");
        } else if (sub == "graph_curve") {
            spec.kind = SubmanifoldSpec::Kind::graph_curve;
            spec.graph = detail::poly_from_coeffs(j.at("coeffs"));
            auto range = j.at("range");
            spec.gx0 = range[0].get<double>();
            spec.gx1 = range[1].get<double>();
        } else {
            throw input_error("submanifold.shape: unknown shape '" + sub + "'");
        }
        return embedded_submanifold(spec);
    }
    throw input_error("space.kind: unknown kind '" + kind + "'");
}

// Named built-in fields, documented in the README.
inline ScalarField builtin_field(const std::string& name, int dim) {
    if (name == "bose_u") {
        Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);
        return ScalarField::from_polynomial(x * x - (x * y).scaled(3.0) + y * y);
    }
    if (name == "sgn_x") {
        ScalarField f = field_from_expression("sgn(x)", dim);
        f.with_singularities({0.0});
        return f;
    }
    if (name == "abs_x") {
        ScalarField f = field_from_expression("abs(x)", dim);
        f.with_singularities({0.0});
        return f;
    }
    if (name == "radial2") {
        Polynomial s(dim);
        for (int i = 0; i < dim; ++i) {
            Polynomial c = Polynomial::coordinate(dim, i);
            s = s + c * c;
        }
        return ScalarField::from_polynomial(s);
    }
    throw input_error("field: unknown built-in field '" + name + "'");
}

inline ScalarField field_from_json(const json& j, int dim) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        try {
            return builtin_field(s, dim);
        } catch (const input_error&) {
            return field_from_expression(s, dim);
        }
    }
    if (j.is_object()) {
        ScalarField f = j.contains("name") ? builtin_field(j.at("name").get<std::string>(), dim)
                                           : field_from_expression(j.at("expr").get<std::string>(), dim);
        if (j.contains("singularities")) {
            std::vector<double> s;
            for (const auto& v : j.at("singularities")) s.push_back(v.get<double>());
            f.with_singularities(s);
        }
        if (j.contains("support")) {
            auto sp = j.at("support");
            f.with_support(detail::point_from_json(sp.at("lo"), dim, "field.support.lo"),
                           detail::point_from_json(sp.at("hi"), dim, "field.support.hi"));
        }
        return f;
    }
    throw input_error("field: expected a string or an object");
}

inline RadiusSchedule schedule_from_json(const json& j) {
    if (!j.contains("r0") || !j.contains("ratio") || !j.contains("count"))
        throw input_error("schedule: fields r0, ratio, count are required");
    double r0 = j.at("r0").get<double>();
    double ratio = j.at("ratio").get<double>();
    int count = j.at("count").get<int>();
    if (!(r0 > 0.0)) throw input_error("schedule.r0: must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw input_error("schedule.ratio: must lie in (0,1)");
    if (count < 4) throw input_error("schedule.count: must be at least 4");
    return RadiusSchedule(r0, ratio, count);
}

inline EffortBudget budget_from_json(const json& j, std::uint64_t seed) {
    EffortBudget b;
    b.seed = seed;
    if (j.is_null()) return b;
    if (j.contains("max_evals")) b.max_evals = j.at("max_evals").get<std::int64_t>();
    if (j.contains("target_error")) b.target_error = j.at("target_error").get<double>();
    if (j.contains("mc_sigma_k")) b.mc_sigma_k = j.at("mc_sigma_k").get<double>();
    if (!(b.max_evals > 0)) throw input_error("budget.max_evals: must be positive");
    if (b.target_error < 0.0) throw input_error("budget.target_error: must be nonnegative");
    return b;
}

inline RegionSpec region_from_json(const json& j, int dim) {
    RegionSpec reg;
    reg.dim = dim;
    auto lo = j.at("lo"), hi = j.at("hi");
    if (static_cast<int>(lo.size()) != dim || static_cast<int>(hi.size()) != dim)
        throw input_error("region: lo/hi must have the ambient dimension");
    for (int i = 0; i < dim; ++i) {
        reg.lo[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)].get<double>();
        reg.hi[static_cast<std::size_t>(i)] = hi[static_cast<std::size_t>(i)].get<double>();
    }
    if (reg.empty()) throw input_error("region: empty box");
    return reg;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("output.path: cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw input_error("output.path: write to '" + path + "' failed");
}

}  // namespace detail

// --- eval command ----------------------------------------------------------

struct EvalPointResult {
    Point x;
    AmvResult result;
    std::string error;  // non-empty when evaluation failed at this point
};

struct EvalOutcome {
    std::vector<EvalPointResult> points;
    int exit_code = 0;
    std::string report;  // rendered csv or json body
};

// Runs the r -> 0 study for every configured point. Per-radius rows plus a
// summary row per point; the summary row carries the r = 0 sentinel and the
// verdict.
inline EvalOutcome run_eval(const json& config, const std::string& format_override = "",
                            const std::string& out_override = "") {
    Space space = space_from_json(config.at("space"));
    int dim = space.ambient_dim();
    ScalarField field = field_from_json(config.at("field"), dim);
    RadiusSchedule schedule = schedule_from_json(config.at("schedule"));
    std::uint64_t seed;
    if (config.contains("seed"))
        seed = config.at("seed").get<std::uint64_t>();
    else if (config.at("space").at("kind") == "heisenberg")
        throw input_error("seed: mandatory when a Monte Carlo backend is selected");
    else
        seed = 0;
    EffortBudget budget = budget_from_json(config.value("budget", json()), seed);
    if (!config.contains("points") || config.at("points").empty())
        throw input_error("points: at least one evaluation point is required");
    std::vector<Point> points;
    for (const auto& pj : config.at("points"))
        points.push_back(detail::point_from_json(pj, dim, "points[]"));

    std::string format = format_override.empty() ? config.value("output", json::object()).value("format", "csv")
                                                 : format_override;
    if (format != "csv" && format != "json" && format != "structured-text")
        throw input_error("output.format: must be csv or json");
    std::string path = out_override.empty() ? config.value("output", json::object()).value("path", "")
                                            : out_override;

    EvalOutcome out;
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        EvalPointResult pr;
        pr.x = points[pi];
        EffortBudget b = budget;
        b.seed = mix_seed(seed, pi + 1);
        try {
            pr.result = amv_limit(space, field, points[pi], schedule, b);
        } catch (const trace_error& e) {
            pr.result.trace = e.partial_trace;
            pr.error = e.what();
            out.exit_code = 2;
        } catch (const error& e) {
            pr.error = e.what();
            out.exit_code = 2;
        }
        out.points.push_back(std::move(pr));
    }

    if (format == "csv") {
        std::string body = "point_id,r,value,abs_error,verdict\n";
        for (std::size_t pi = 0; pi < out.points.size(); ++pi) {
            const auto& pr = out.points[pi];
            for (const auto& t : pr.result.trace)
                body += std::to_string(pi) + "," + detail::fmt17(t.r) + "," + detail::fmt17(t.value) +
                        "," + detail::fmt17(t.abs_error) + ",\n";
            if (pr.error.empty()) {
                const auto& r = pr.result;
                double sv = r.verdict == Verdict::converged ? r.value : r.rate;
                double se = r.verdict == Verdict::converged ? r.value_error : 0.0;
                body += std::to_string(pi) + ",0," + detail::fmt17(sv) + "," + detail::fmt17(se) + "," +
                        verdict_name(r.verdict) + "\n";
            } else {
                body += std::to_string(pi) + ",0,nan,nan,error\n";
            }
        }
        out.report = body;
    } else {
        json j;
        j["schema_version"] = 1;
        j["space"] = space.descriptor();
        j["schedule"] = {{"r0", schedule.r0}, {"ratio", schedule.ratio}, {"count", schedule.count}};
        j["seed"] = seed;
        json arr = json::array();
        for (std::size_t pi = 0; pi < out.points.size(); ++pi) {
            const auto& pr = out.points[pi];
            json pj;
            pj["point_id"] = pi;
            pj["point"] = std::vector<double>(pr.x.c.begin(), pr.x.c.begin() + dim);
            json tr = json::array();
            for (const auto& t : pr.result.trace)
                tr.push_back({{"r", t.r}, {"value", t.value}, {"abs_error", t.abs_error}});
            pj["trace"] = tr;
            if (pr.error.empty()) {
                pj["verdict"] = verdict_name(pr.result.verdict);
                if (pr.result.verdict == Verdict::converged) {
                    pj["value"] = pr.result.value;
                    pj["value_error"] = pr.result.value_error;
                } else if (pr.result.verdict == Verdict::divergent) {
                    pj["rate"] = pr.result.rate;
                    pj["regression_r2"] = pr.result.regression_r2;
                }
            } else {
                pj["error"] = pr.error;
            }
            arr.push_back(pj);
        }
        j["results"] = arr;
        out.report = j.dump(2) + "\n";
    }
    if (!path.empty()) detail::write_text(path, out.report);
    return out;
}

// --- green command ---------------------------------------------------------

inline json run_green(const json& config) {
    Space space = space_from_json(config.at("space"));
    int dim = space.ambient_dim();
    RegionSpec region = region_from_json(config.at("region"), dim);
    int resolution = config.at("resolution").get<int>();
    std::uint64_t seed = config.value("seed", 0);
    AtomCloud cloud = make_atom_cloud(space, region, resolution, seed);
    double r = untie_radius(cloud, config.at("r").get<double>());
    ScalarField uf = field_from_json(config.at("u"), dim);
    ScalarField vf = field_from_json(config.at("v"), dim);
    std::vector<double> u(cloud.size()), v(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        u[i] = uf(cloud.atoms[i].p);
        v[i] = vf(cloud.atoms[i].p);
    }
    GreenReport g = green_check(cloud, r, u, v);
    json j;
    j["schema_version"] = 1;
    j["space"] = space.descriptor();
    j["atoms"] = cloud.size();
    j["r"] = r;
    j["lhs"] = g.lhs;
    j["rhs"] = g.rhs;
    j["defect"] = g.defect;
    j["defect_scale"] = g.scale;
    j["selfadjoint_defect"] = g.selfadjoint_defect;
    return j;
}

// --- poisson command -------------------------------------------------------

inline json run_poisson(const json& config, std::string* csv_out = nullptr) {
    Space space = space_from_json(config.at("space"));
    int dim = space.ambient_dim();
    RegionSpec region = region_from_json(config.at("region"), dim);
    int resolution = config.at("resolution").get<int>();
    AtomCloud cloud = make_atom_cloud(space, region, resolution, config.value("seed", 0));
    double r = untie_radius(cloud, config.at("r").get<double>());
    ScalarField ff = field_from_json(config.at("f"), dim);
    ScalarField gf = field_from_json(config.at("g"), dim);
    double band = config.value("boundary_band", r);

    std::vector<std::size_t> boundary;
    std::vector<double> gvals;
    std::vector<double> f(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point& p = cloud.atoms[i].p;
        f[i] = ff(p);
        bool near = false;
        for (int k = 0; k < dim; ++k)
            near = near || p[k] < region.lo[static_cast<std::size_t>(k)] + band ||
                   p[k] > region.hi[static_cast<std::size_t>(k)] - band;
        if (near) {
            boundary.push_back(i);
            gvals.push_back(gf(p));
        }
    }
    std::vector<double> u = solve_poisson(cloud, r, f, boundary, gvals);

    if (csv_out) {
        std::string body;
        for (int k = 0; k < dim; ++k) body += (k ? ",x" : "x") + std::to_string(k);
        body += ",u,boundary\n";
        std::vector<bool> is_b(cloud.size(), false);
        for (std::size_t b : boundary) is_b[b] = true;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            for (int k = 0; k < dim; ++k)
                body += (k ? "," : "") + detail::fmt17(cloud.atoms[i].p[k]);
            body += "," + detail::fmt17(u[i]) + "," + (is_b[i] ? "1" : "0") + "\n";
        }
        *csv_out = body;
    }
    json j;
    j["schema_version"] = 1;
    j["space"] = space.descriptor();
    j["atoms"] = cloud.size();
    j["r"] = r;
    j["boundary_atoms"] = boundary.size();
    json sol = json::array();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        json a;
        a["p"] = std::vector<double>(cloud.atoms[i].p.c.begin(), cloud.atoms[i].p.c.begin() + dim);
        a["u"] = u[i];
        sol.push_back(a);
    }
    j["solution"] = sol;
    return j;
}

// --- verify command --------------------------------------------------------

inline SuiteReport run_suite(const std::string& name, const SuiteOptions& opts) {
    if (name == "euclid") return suite_euclid(opts);
    if (name == "bose") return suite_bose(opts);
    if (name == "dirac") return suite_dirac(opts);
    if (name == "heisenberg") return suite_heisenberg(opts);
    if (name == "stratified") return suite_stratified(opts);
    if (name == "submanifold") return suite_submanifold(opts);
    if (name == "operator") return suite_operator(opts);
    throw input_error("suite: unknown suite '" + name + "'");
}

inline std::vector<std::string> suite_names() {
    return {"euclid", "bose", "dirac", "heisenberg", "stratified", "submanifold", "operator"};
}

inline std::string suite_report_csv(const SuiteReport& rep) {
    std::string body = "suite,case_id,expected_provenance,expected,measured,tolerance,pass\n";
    for (const auto& c : rep.cases) {
        body += rep.suite + "," + c.case_id + "," + provenance_name(c.provenance) + ",";
        if (c.is_verdict_case)
            body += c.expected_verdict + "," + c.measured_verdict + ",,";
        else
            body += detail::fmt17(c.expected) + "," + detail::fmt17(c.measured) + "," +
                    detail::fmt17(c.tolerance) + ",";
        body += (c.pass ? "1" : "0");
        body += "\n";
    }
    return body;
}

}  // namespace amv
