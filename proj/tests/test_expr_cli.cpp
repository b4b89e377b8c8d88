#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "amvlab/config.hpp"

using namespace amv;

TEST_CASE("expression parsing and evaluation") {
    Expression e = Expression::parse("x^2 - 3*x*y + y^2", 2);
    CHECK(e.eval(Point{1.0, 1.0}) == Catch::Approx(-1.0));
    CHECK(e.eval(Point{2.0, -0.5}) == Catch::Approx(4.0 + 3.0 + 0.25));

    Taylor2 t = e.eval_taylor(Point{1.0, 2.0});
    CHECK(t.v == Catch::Approx(-1.0));
    CHECK(t.g[0] == Catch::Approx(2.0 * 1 - 3 * 2));
    CHECK(t.g[1] == Catch::Approx(-3.0 * 1 + 2 * 2));
    CHECK(t.h[0][0] == Catch::Approx(2.0));
    CHECK(t.h[0][1] == Catch::Approx(-3.0));
    CHECK(t.h[1][1] == Catch::Approx(2.0));

    auto p = e.as_polynomial();
    REQUIRE(p.has_value());
    CHECK(p->degree() == 2);
    CHECK(p->eval(Point{0.3, -0.7}) == Catch::Approx(e.eval(Point{0.3, -0.7})));

    // division, power, unary minus, abs, sgn
    Expression q = Expression::parse("-x^2/(1+y^2) + abs(x) - sgn(y)", 2);
    CHECK(q.eval(Point{2.0, 1.0}) == Catch::Approx(-2.0 + 2.0 - 1.0));
    CHECK_FALSE(q.as_polynomial().has_value());
    Expression cube = Expression::parse("(1-x^2)^2*(1+x)", 1);
    REQUIRE(cube.as_polynomial().has_value());
    CHECK(cube.as_polynomial()->degree() == 5);

    // derivative of a rational expression via forward AD
    Expression rat = Expression::parse("1/(1+x^2+y^2)", 2);
    Taylor2 rt = rat.eval_taylor(Point{0.5, -0.25});
    double denom = 1.0 + 0.25 + 0.0625;
    CHECK(rt.v == Catch::Approx(1.0 / denom));
    CHECK(rt.g[0] == Catch::Approx(-2.0 * 0.5 / (denom * denom)));

    // errors
    CHECK_THROWS_AS(Expression::parse("x +", 1), input_error);
    CHECK_THROWS_AS(Expression::parse("foo(x)", 1), input_error);
    CHECK_THROWS_AS(Expression::parse("z", 2), input_error);
    CHECK_THROWS_AS(Expression::parse("x ) y", 1), input_error);
    // t aliases the third coordinate
    Expression ht = Expression::parse("t^2 + x", 3);
    CHECK(ht.eval(Point{1.0, 0.0, 2.0}) == Catch::Approx(5.0));
}

TEST_CASE("fields from json") {
    CHECK(field_from_json(json("bose_u"), 2)(Point{1.0, 1.0}) == Catch::Approx(-1.0));
    CHECK(field_from_json(json("x^2+y"), 2)(Point{2.0, 1.0}) == Catch::Approx(5.0));
    json with_sing = {{"expr", "sgn(x)"}, {"singularities", {0.0}}};
    ScalarField f = field_from_json(with_sing, 1);
    CHECK(f.singularities() == std::vector<double>{0.0});
    CHECK_THROWS_AS(field_from_json(json("no_such_builtin("), 1), input_error);
}

TEST_CASE("spaces from json") {
    CHECK(space_from_json(json::parse(R"({"kind":"euclidean","dim":2})")).ambient_dim() == 2);
    CHECK(space_from_json(json::parse(R"({"kind":"heisenberg"})")).ambient_dim() == 3);
    Space w = space_from_json(json::parse(R"({"kind":"weighted","dim":2,"density":"(x+y)^2"})"));
    CHECK(ball_mass(w, Point{0.0, 0.0}, 0.5).mass == Catch::Approx(pi() * 0.0625 / 2.0).epsilon(1e-12));
    Space s = space_from_json(json::parse(
        R"({"kind":"stratified","strata":[{"kind":"segment","a":[0,0],"b":[1,0]},{"kind":"rectangle","lo":[-1,-0.5],"hi":[0,0.5],"Q":2}]})"));
    CHECK(s.in_support(Point{0.5, 0.0}));
    Space c = space_from_json(json::parse(R"({"kind":"submanifold","shape":"circle","radius":1.0})"));
    CHECK(ball_mass(c, Point{1.0, 0.0}, 0.2).mass == Catch::Approx(4.0 * std::asin(0.1)).epsilon(1e-13));
    CHECK_THROWS_AS(space_from_json(json::parse(R"({"kind":"banach"})")), input_error);
}

TEST_CASE("run_eval csv contract") {
    json config = json::parse(R"({
        "space": {"kind": "euclidean", "dim": 1},
        "field": "x^2",
        "points": [[0.0]],
        "schedule": {"r0": 0.25, "ratio": 0.7, "count": 12},
        "seed": 1
    })");
    EvalOutcome out = run_eval(config, "csv");
    CHECK(out.exit_code == 0);
    std::istringstream is(out.report);
    std::string header;
    std::getline(is, header);
    CHECK(header == "point_id,r,value,abs_error,verdict");
    int rows = 0;
    std::string line, last;
    while (std::getline(is, line))
        if (!line.empty()) {
            ++rows;
            last = line;
        }
    CHECK(rows == 13);  // 12 trace rows + summary
    // summary row: r = 0 sentinel, converged verdict, value 1/3
    CHECK(last.substr(0, 4) == "0,0,");
    CHECK(last.find("converged") != std::string::npos);
    CHECK(last.find("0.333333") != std::string::npos);

    // byte-identical reruns
    EvalOutcome again = run_eval(config, "csv");
    CHECK(again.report == out.report);

    // malformed schedule names the field
    json bad = config;
    bad["schedule"]["ratio"] = 1.5;
    try {
        run_eval(bad, "csv");
        FAIL("expected input_error");
    } catch (const input_error& e) {
        CHECK(std::string(e.what()).find("ratio") != std::string::npos);
    }
}

TEST_CASE("run_eval json format and evaluation failures") {
    // a point off the strata: evaluation error -> exit code 2, error recorded
    json config = json::parse(R"({
        "space": {"kind":"stratified","strata":[{"kind":"segment","a":[0,0],"b":[1,0]}]},
        "field": "x^2",
        "points": [[0.5, 0.0],[5.0, 5.0]],
        "schedule": {"r0": 0.2, "ratio": 0.7, "count": 12},
        "seed": 1,
        "output": {"format": "json"}
    })");
    EvalOutcome out = run_eval(config);
    CHECK(out.exit_code == 2);
    json rep = json::parse(out.report);
    CHECK(rep.at("results").size() == 2);
    CHECK(rep.at("results")[0].contains("verdict"));
    CHECK(rep.at("results")[1].contains("error"));
}

TEST_CASE("bose per-radius rows match the closed form through the cli surface") {
    json config = json::parse(R"({
        "space": {"kind": "weighted", "dim": 2, "density": "(x+y)^2"},
        "field": "x^2 - 3*x*y + y^2",
        "points": [[1.0, 1.0]],
        "schedule": {"r0": 0.4, "ratio": 0.7, "count": 8},
        "seed": 3
    })");
    EvalOutcome out = run_eval(config, "json");
    json rep = json::parse(out.report);
    for (const auto& row : rep.at("results")[0].at("trace")) {
        double r = row.at("r").get<double>();
        double want = r * r / (6.0 * (r * r + 8.0));
        CHECK(row.at("value").get<double>() == Catch::Approx(want).epsilon(1e-8));
    }
}

namespace {

struct CmdResult {
    int exit_code;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const char* bin = std::getenv("AMVLAB_BIN");
    REQUIRE(bin != nullptr);
    std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    std::array<char, 4096> buf;
    while (std::size_t got = fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), got);
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string write_temp(const std::string& name, const std::string& body) {
    std::string path = name;
    std::ofstream f(path);
    f << body;
    return path;
}

}  // namespace

TEST_CASE("cli end to end") {
    std::string cfg = write_temp("cli_eval_cfg.json", R"({
        "space": {"kind": "euclidean", "dim": 1},
        "field": "x^2",
        "points": [[0.0]],
        "schedule": {"r0": 0.25, "ratio": 0.7, "count": 12},
        "seed": 1,
        "output": {"path": "cli_eval_out.csv", "format": "csv"}
    })");
    CmdResult r = run_cli("eval --config " + cfg);
    CHECK(r.exit_code == 0);
    std::ifstream rep("cli_eval_out.csv");
    REQUIRE(rep.good());
    std::stringstream ss;
    ss << rep.rdbuf();
    CHECK(ss.str().find("converged") != std::string::npos);

    // identical inputs give byte-identical outputs
    CmdResult r2 = run_cli("eval --config " + cfg + " --out cli_eval_out2.csv");
    CHECK(r2.exit_code == 0);
    std::ifstream rep2("cli_eval_out2.csv");
    std::stringstream ss2;
    ss2 << rep2.rdbuf();
    CHECK(ss2.str() == ss.str());

    // config errors exit 1
    std::string bad = write_temp("cli_bad_cfg.json", R"({
        "space": {"kind": "euclidean", "dim": 1},
        "field": "x^2",
        "points": [[0.0]],
        "schedule": {"r0": 0.25, "ratio": 1.5, "count": 12}
    })");
    CHECK(run_cli("eval --config " + bad).exit_code == 1);
    CHECK(run_cli("verify --suite nosuchsuite").exit_code == 1);

    // verify a cheap suite end to end
    CmdResult v = run_cli("verify --suite submanifold --out cli_suite.json");
    CHECK(v.exit_code == 0);
    std::ifstream sj("cli_suite.json");
    json suite = json::parse(sj);
    CHECK(suite.at("all_pass").get<bool>());
    CHECK(suite.at("cases")[0].contains("expected_provenance"));

    // green subcommand: uniform grid has vanishing asymmetry
    std::string gcfg = write_temp("cli_green_cfg.json", R"({
        "space": {"kind": "euclidean", "dim": 1},
        "region": {"lo": [0.0], "hi": [1.0]},
        "resolution": 150,
        "r": 0.0613,
        "u": "x^2",
        "v": "x"
    })");
    CmdResult g = run_cli("green --config " + gcfg + " --out cli_green.json");
    CHECK(g.exit_code == 0);
    std::ifstream gj("cli_green.json");
    json green = json::parse(gj);
    CHECK(green.at("defect").get<double>() <= 1e-10 * green.at("defect_scale").get<double>());

    // poisson: constant boundary data, constant solution
    std::string pcfg = write_temp("cli_poisson_cfg.json", R"({
        "space": {"kind": "euclidean", "dim": 1},
        "region": {"lo": [0.0], "hi": [1.0]},
        "resolution": 120,
        "r": 0.0613,
        "f": "0",
        "g": "2.5"
    })");
    CmdResult p = run_cli("poisson --config " + pcfg + " --out cli_poisson.json");
    CHECK(p.exit_code == 0);
    std::ifstream pj("cli_poisson.json");
    json poisson = json::parse(pj);
    for (const auto& atom : poisson.at("solution"))
        CHECK(atom.at("u").get<double>() == Catch::Approx(2.5).margin(1e-9));

    // singular interior system exits 2 with a diagnostic
    std::string scfg = write_temp("cli_poisson_singular.json", R"({
        "space": {"kind": "euclidean", "dim": 1},
        "region": {"lo": [0.0], "hi": [1.0]},
        "resolution": 50,
        "r": 1e-6,
        "boundary_band": 0.02,
        "f": "1",
        "g": "0"
    })");
    CHECK(run_cli("poisson --config " + scfg).exit_code == 2);
}

TEST_CASE("cli heisenberg eval needs a seed and converges with one") {
    std::string noseed = write_temp("cli_heis_noseed.json", R"({
        "space": {"kind": "heisenberg"},
        "field": "x^2",
        "points": [[0.0, 0.0, 0.0]],
        "schedule": {"r0": 0.2, "ratio": 0.7, "count": 5},
        "budget": {"max_evals": 120000, "target_error": 0}
    })");
    CHECK(run_cli("eval --config " + noseed).exit_code == 1);

    std::string cfg = write_temp("cli_heis_cfg.json", R"({
        "space": {"kind": "heisenberg"},
        "field": "x^2",
        "points": [[0.0, 0.0, 0.0]],
        "schedule": {"r0": 0.2, "ratio": 0.7, "count": 5},
        "budget": {"max_evals": 120000, "target_error": 0},
        "seed": 9,
        "output": {"path": "cli_heis_out.json", "format": "json"}
    })");
    CmdResult r = run_cli("eval --config " + cfg);
    CHECK(r.exit_code == 0);
    std::ifstream rep("cli_heis_out.json");
    json out = json::parse(rep);
    CHECK(out.at("results")[0].at("verdict") == "converged");
    // Delta_H x^2 = 2, so the limit is 2c with c around 0.116
    double v = out.at("results")[0].at("value").get<double>();
    CHECK(v > 0.15);
    CHECK(v < 0.32);
}
