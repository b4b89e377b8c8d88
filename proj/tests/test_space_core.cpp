#include <catch2/catch_amalgamated.hpp>

#include "amvlab/cloud.hpp"
#include "amvlab/estimator.hpp"
#include "amvlab/spaces.hpp"

using namespace amv;

namespace {
Polynomial sq(int nvars, int i) {
    Polynomial c = Polynomial::coordinate(nvars, i);
    return c * c;
}
}  // namespace

TEST_CASE("point validation") {
    Space e2 = euclidean_lebesgue(2);
    CHECK_THROWS_AS(distance(e2, Point{0.0}, Point{0.0, 0.0}), input_error);
    CHECK_THROWS_AS((Point{1.0, std::numeric_limits<double>::infinity()}), input_error);
    CHECK(distance(e2, Point{0.0, 0.0}, Point{3.0, 4.0}) == 5.0);
    Point p{0.3, -0.7};
    CHECK(distance(e2, p, p) == 0.0);
}

TEST_CASE("euclidean ball integrate examples") {
    Space e1 = euclidean_lebesgue(1);
    double r = 0.37;
    // u(y) = y^2 at 0: integral 2r^3/3, average r^2/3
    BallEstimate est = ball_integrate(e1, Point{0.0}, r, ScalarField::from_polynomial(sq(1, 0)));
    CHECK(est.integral == Catch::Approx(2.0 * r * r * r / 3.0).epsilon(1e-14));
    CHECK(est.average() == Catch::Approx(r * r / 3.0).epsilon(1e-14));
    CHECK(est.method == EstimateMethod::analytic);
    CHECK(est.abs_error == 0.0);
}

TEST_CASE("the constant field 1 averages to 1 exactly on every backend") {
    // integral and mass come from the same node set, and multiplying by 1.0
    // is lossless, so the ratio is exactly 1 on each backend
    for (int n : {1, 2, 3}) {
        Space sp = euclidean_lebesgue(n);
        CHECK(ball_integrate(sp, Point::zero(n), 0.4,
                             ScalarField::from_polynomial(Polynomial::constant(n, 1.0)))
                  .average() == 1.0);
        CHECK(ball_integrate(sp, Point::zero(n), 0.4,
                             ScalarField::from_function(n, [](const Point&) { return 1.0; }))
                  .average() == 1.0);
    }
    {
        ScalarField w = ScalarField::from_function(2, [](const Point& p) { return 1.0 + p[0] * p[0]; });
        Space sp = weighted_lebesgue(2, WeightSpec{w});
        CHECK(ball_integrate(sp, Point{0.2, -0.1}, 0.3,
                             ScalarField::from_function(2, [](const Point&) { return 1.0; }))
                  .average() == 1.0);
    }
    {
        Space sp = euclidean_lebesgue(2);
        EffortBudget budget;
        budget.max_evals = 200000;
        ScalarField one = ScalarField::from_function(2, [](const Point&) { return 1.0; });
        auto est = sp.impl().mc_ball_estimate(Point{0.0, 0.0}, 0.5, &one, budget);
        REQUIRE(est.has_value());
        CHECK(est->average() == 1.0);
    }
    {
        Space sp = stratified_complex({Stratum::segment(Point{0.0, 0.0}, Point{1.0, 0.0}),
                                       Stratum::rectangle({-1.0, -0.5}, {0.0, 0.5}, 2.0)});
        CHECK(ball_integrate(sp, Point{0.0, 0.0}, 0.2,
                             ScalarField::from_function(2, [](const Point&) { return 1.0; }))
                  .average() == 1.0);
    }
    // general constants agree to summation roundoff
    for (int n : {1, 2, 3}) {
        Space sp = euclidean_lebesgue(n);
        BallEstimate est = ball_integrate(sp, Point::zero(n), 0.4,
                                          ScalarField::from_function(n, [](const Point&) { return 2.5; }));
        CHECK(est.average() == Catch::Approx(2.5).epsilon(1e-12));
    }
}

TEST_CASE("ball mass monotone in the radius") {
    std::vector<Space> spaces = {euclidean_lebesgue(2), lebesgue_plus_dirac(2),
                                 stratified_complex({Stratum::segment(Point{0.0, 0.0}, Point{1.0, 0.0}),
                                                     Stratum::rectangle({-1.0, -0.5}, {0.0, 0.5}, 2.0)})};
    for (const auto& sp : spaces) {
        double prev = 0.0;
        for (double r : {0.05, 0.1, 0.2, 0.3, 0.5}) {
            double m = ball_mass(sp, Point{0.0, 0.0}, r).mass;
            CHECK(m >= prev);
            prev = m;
        }
    }
}

TEST_CASE("analytic and monte-carlo masses agree within three standard errors") {
    EffortBudget budget;
    budget.max_evals = 400000;
    budget.seed = 1234;
    struct CaseDef {
        Space space;
        Point x;
    };
    std::vector<CaseDef> cases;
    cases.push_back({euclidean_lebesgue(1), Point{0.2}});
    cases.push_back({euclidean_lebesgue(2), Point{0.1, -0.4}});
    cases.push_back({euclidean_lebesgue(3), Point{0.0, 0.3, 0.1}});
    {
        Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);
        cases.push_back({weighted_lebesgue(2, WeightSpec{ScalarField::from_polynomial((x + y) * (x + y))}),
                         Point{0.7, 0.1}});
    }
    cases.push_back({lebesgue_plus_dirac(2), Point{0.0, 0.0}});
    cases.push_back({stratified_complex({Stratum::segment(Point{0.0, 0.0}, Point{1.0, 0.0}),
                                         Stratum::rectangle({-1.0, -0.5}, {0.0, 0.5}, 2.0)}),
                     Point{0.0, 0.0}});
    for (auto& cd : cases) {
        double r = 0.31;
        BallEstimate exact = ball_mass(cd.space, cd.x, r, budget);
        auto mc = ball_mass_mc(cd.space, cd.x, r, budget);
        REQUIRE(mc.has_value());
        CHECK(mc->method == EstimateMethod::monte_carlo);
        CHECK(mc->sigma_k == 3.0);
        // mass_error is already 3 sigma
        CHECK(std::abs(mc->mass - exact.mass) <= mc->mass_error + 1e-12);
    }
}

TEST_CASE("triangle inequality on random triples") {
    SplitMix64 rng(99);
    std::vector<Space> spaces = {euclidean_lebesgue(2), lebesgue_plus_dirac(3)};
    for (const auto& sp : spaces) {
        int n = sp.ambient_dim();
        for (int k = 0; k < 10000; ++k) {
            Point a = Point::zero(n), b = Point::zero(n), c = Point::zero(n);
            for (int i = 0; i < n; ++i) {
                a[i] = rng.uniform(-2, 2);
                b[i] = rng.uniform(-2, 2);
                c[i] = rng.uniform(-2, 2);
            }
            CHECK(distance(sp, a, b) <= distance(sp, a, c) + distance(sp, c, b) + 1e-12);
        }
    }
}

TEST_CASE("atom cloud construction") {
    Space e1 = euclidean_lebesgue(1);
    RegionSpec reg;
    reg.dim = 1;
    reg.lo = {0.0, 0, 0};
    reg.hi = {1.0, 0, 0};
    AtomCloud cloud = make_atom_cloud(e1, reg, 100);
    REQUIRE(cloud.size() == 100);
    for (const auto& a : cloud.atoms) CHECK(a.weight == Catch::Approx(0.01).epsilon(1e-15));
    CHECK(cloud.atoms[0].p[0] == Catch::Approx(0.005));
    CHECK(cloud.total_weight() == Catch::Approx(1.0).epsilon(1e-14));

    // weighted grid: total weight approximates the region's mu-mass
    Polynomial x = Polynomial::coordinate(2, 0), y = Polynomial::coordinate(2, 1);
    Space wsp = weighted_lebesgue(2, WeightSpec{ScalarField::from_polynomial((x + y) * (x + y))});
    RegionSpec reg2;
    reg2.dim = 2;
    reg2.lo = {0.0, 0.0, 0};
    reg2.hi = {1.0, 1.0, 0};
    AtomCloud wcloud = make_atom_cloud(wsp, reg2, 40);
    CHECK(std::abs(wcloud.total_weight() - 7.0 / 6.0) / (7.0 / 6.0) < 1e-3);

    // the Dirac atom is carried exactly
    Space dsp = lebesgue_plus_dirac(2);
    RegionSpec reg3;
    reg3.dim = 2;
    reg3.lo = {-0.5, -0.5, 0};
    reg3.hi = {0.5, 0.5, 0};
    AtomCloud dcloud = make_atom_cloud(dsp, reg3, 20);
    bool found = false;
    for (const auto& a : dcloud.atoms)
        if (a.p[0] == 0.0 && a.p[1] == 0.0 && a.weight == 1.0) found = true;
    CHECK(found);

    // determinism
    AtomCloud again = make_atom_cloud(wsp, reg2, 40);
    REQUIRE(again.size() == wcloud.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
        CHECK(again.atoms[i].weight == wcloud.atoms[i].weight);
        CHECK(again.atoms[i].p[0] == wcloud.atoms[i].p[0]);
    }

    RegionSpec empty;
    empty.dim = 1;
    empty.lo = {1.0, 0, 0};
    empty.hi = {0.0, 0, 0};
    CHECK_THROWS_AS(make_atom_cloud(e1, empty, 10), domain_error);
}

TEST_CASE("error taxonomy") {
    // outside the support
    Space strat = stratified_complex({Stratum::segment(Point{0.0, 0.0}, Point{1.0, 0.0})});
    CHECK_THROWS_AS(ball_mass(strat, Point{5.0, 5.0}, 0.1), domain_error);
    // non-finite field value at a positive-weight node names the node
    Space e1 = euclidean_lebesgue(1);
    ScalarField bad = ScalarField::from_function(1, [](const Point& p) {
        return p[0] > 0.1 ? std::numeric_limits<double>::quiet_NaN() : 1.0;
    });
    try {
        ball_integrate(e1, Point{0.0}, 0.5, bad);
        FAIL("expected evaluation_error");
    } catch (const evaluation_error& e) {
        CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    }
    // nonpositive radius
    CHECK_THROWS_AS(ball_mass(e1, Point{0.0}, 0.0), input_error);
}

TEST_CASE("budget exhaustion reports the achieved error instead of failing") {
    Space e2 = euclidean_lebesgue(2);
    EffortBudget tiny;
    tiny.max_evals = 40000;
    tiny.target_error = 1e-12;  // unreachable with that few samples
    auto est = ball_mass_mc(e2, Point{0.0, 0.0}, 0.5, tiny);
    REQUIRE(est.has_value());
    CHECK(est->mass_error > 0.0);
    CHECK(est->mass > 0.0);
}
