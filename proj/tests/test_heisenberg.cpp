#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>

#include "amvlab/estimator.hpp"
#include "amvlab/heisenberg.hpp"

#include "support/cc_control_oracle.hpp"

using namespace amv;

TEST_CASE("group algebra") {
    Point p{0.3, -0.7, 1.1}, q{-0.2, 0.5, 0.4};
    Point pq = h_compose(p, q);
    CHECK(pq[0] == Catch::Approx(0.1));
    CHECK(pq[1] == Catch::Approx(-0.2));
    CHECK(pq[2] == Catch::Approx(1.1 + 0.4 + 2.0 * ((-0.7) * (-0.2) - 0.5 * 0.3)));
    Point e = h_compose(p, h_inverse(p));
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 0.0);
    CHECK(e[2] == 0.0);
}

TEST_CASE("cc distance closed cases") {
    Point o{0.0, 0.0, 0.0};
    CHECK(cc_distance(o, o) == 0.0);
    CHECK(cc_distance(o, Point{1.0, 0.0, 0.0}) == Catch::Approx(1.0).margin(1e-10));
    CHECK(cc_distance(o, Point{0.0, 0.0, 1.0}) == Catch::Approx(std::sqrt(pi())).margin(1e-10));
    CHECK_THROWS_AS(cc_distance(Point{0.0, 0.0}, Point{0.0, 0.0}), input_error);

    // planar geodesics are straight lines
    SplitMix64 rng(42);
    for (int k = 0; k < 100; ++k) {
        double x = rng.uniform(-3, 3), y = rng.uniform(-3, 3);
        CHECK(cc_distance(o, Point{x, y, 0.0}) == Catch::Approx(std::hypot(x, y)).margin(1e-8));
    }

    // dilation homogeneity d(o, delta_lam p) = lam d(o, p)
    for (int k = 0; k < 50; ++k) {
        Point p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        double lam = rng.uniform(0.1, 3.0);
        CHECK(cc_distance(o, h_dilate(lam, p)) == Catch::Approx(lam * cc_distance(o, p)).margin(1e-11));
    }

    // left invariance d(g a, g b) = d(a, b)
    for (int k = 0; k < 50; ++k) {
        Point a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Point b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Point g{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(cc_distance(h_compose(g, a), h_compose(g, b)) ==
              Catch::Approx(cc_distance(a, b)).margin(1e-9));
    }

    // almost-vertical points, where the solver runs in its pi-side branch;
    // to first order d = sqrt(pi |t|) - |z|
    CHECK(cc_distance(o, Point{1e-9, 0.0, 1.0}) == Catch::Approx(std::sqrt(pi())).margin(1e-8));
    CHECK(cc_distance(o, Point{1e-3, 1e-3, 5.0}) ==
          Catch::Approx(std::sqrt(pi() * 5.0) - std::hypot(1e-3, 1e-3)).margin(1e-5));
}

TEST_CASE("cc triangle inequality on random triples") {
    SplitMix64 rng(7);
    Point o{0.0, 0.0, 0.0};
    for (int k = 0; k < 10000; ++k) {
        Point a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Point b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Point c{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        CHECK(cc_distance(a, b) <= cc_distance(a, c) + cc_distance(c, b) + 1e-8);
    }
}

TEST_CASE("vertical distance against the discretized-control oracle") {
    // two independent numerical methods must agree; no value asserted a
    // priori
    double solver = cc_distance(Point{0.0, 0.0, 0.0}, Point{0.0, 0.0, 1.0});
    double oracle = cc_oracle::distance(0.0, 0.0, 1.0, 120);
    CHECK(std::abs(solver - oracle) < 1e-3);
    // and a planar point, where the optimum is the straight segment
    double solver2 = cc_distance(Point{0.0, 0.0, 0.0}, Point{0.8, -0.6, 0.0});
    double oracle2 = cc_oracle::distance(0.8, -0.6, 0.0, 120);
    CHECK(std::abs(solver2 - oracle2) < 1e-3);
}

TEST_CASE("ball mass scales as r^4") {
    Space hs = heisenberg_cc();
    EffortBudget budget;
    budget.max_evals = 1500000;
    budget.target_error = 0.0;
    budget.seed = 11;
    BallEstimate m1 = ball_mass(hs, Point{0.0, 0.0, 0.0}, 1.0, budget);
    EffortBudget budget2 = budget;
    budget2.seed = 12;
    double r = 0.6;
    BallEstimate mr = ball_mass(hs, Point{0.0, 0.0, 0.0}, r, budget2);
    double scale = std::pow(r, 4);
    // both errors are 3 sigma already
    CHECK(std::abs(mr.mass - scale * m1.mass) <= mr.mass_error + scale * m1.mass_error);
    CHECK(m1.method == EstimateMethod::monte_carlo);
    CHECK(m1.samples_used > 0);
}

TEST_CASE("monte carlo determinism across worker counts") {
    Space hs = heisenberg_cc();
    EffortBudget budget;
    budget.max_evals = 400000;
    budget.target_error = 0.0;
    budget.seed = 77;
    Polynomial x = Polynomial::coordinate(3, 0);
    ScalarField u = ScalarField::from_polynomial(x * x);
    setenv("AMV_THREADS", "1", 1);
    RadiusValue a = amv_at_radius(hs, u, Point{0.2, 0.1, 0.0}, 0.25, budget);
    setenv("AMV_THREADS", "4", 1);
    RadiusValue b = amv_at_radius(hs, u, Point{0.2, 0.1, 0.0}, 0.25, budget);
    unsetenv("AMV_THREADS");
    CHECK(a.value == b.value);
    CHECK(a.abs_error == b.abs_error);
}

TEST_CASE("kohn laplacian oracle") {
    Polynomial x = Polynomial::coordinate(3, 0), y = Polynomial::coordinate(3, 1),
               t = Polynomial::coordinate(3, 2);
    Point p{0.5, -0.3, 0.2};
    CHECK(kohn_laplacian(ScalarField::from_polynomial(x * x), p) == Catch::Approx(2.0));
    CHECK(kohn_laplacian(ScalarField::from_polynomial(x * y), p) == Catch::Approx(0.0));
    CHECK(kohn_laplacian(ScalarField::from_polynomial(t), p) == Catch::Approx(0.0));
    CHECK(kohn_laplacian(ScalarField::from_polynomial(t * t), p) ==
          Catch::Approx(8.0 * (p[0] * p[0] + p[1] * p[1])));
}

TEST_CASE("constants file round trip") {
    HeisenbergConstants hc = estimate_heisenberg_constants(500000, 5);
    CHECK(hc.c_estimate > 0.05);
    CHECK(hc.c_estimate < 0.25);
    CHECK(hc.std_error > 0.0);
    std::string path = "hc_roundtrip_test.json";
    save_heisenberg_constants(hc, path);
    HeisenbergConstants back = load_heisenberg_constants(path);
    CHECK(back.c_estimate == hc.c_estimate);
    CHECK(back.std_error == hc.std_error);
    CHECK(back.samples == hc.samples);
    CHECK(back.seed == hc.seed);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_heisenberg_constants("does_not_exist_anywhere.json"), input_error);
}
