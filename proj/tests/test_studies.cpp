#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hapfv/studies.hpp"

using namespace hapfv;

TEST_CASE("ode oracle reproduces the logistic closed form") {
    Params p; // mu = 1, r = 2, eps = 0
    const OdePoint s = ode_oracle(2.0, 1.0, p, 1.0);
    // u' = u(1-u): u(1) = 2/(2 - 1/e); w(1) = 1/(2e - 1)
    CHECK(s.u == Catch::Approx(1.2253996735605641).epsilon(1e-12));
    CHECK(s.w == Catch::Approx(0.22539967356056408).epsilon(1e-12));
}

TEST_CASE("ode oracle reproduces the cubic logistic closed form") {
    Params p;
    p.r = 3.0;
    const OdePoint s = ode_oracle(2.0, 1.0, p, 1.0);
    // u' = u(1-u^2): u(t)^2 = 4 / (4 - 3 e^(-2t))
    const double u1 = std::sqrt(4.0 / (4.0 - 3.0 * std::exp(-2.0)));
    CHECK(s.u == Catch::Approx(u1).epsilon(1e-12));
    CHECK(u1 == Catch::Approx(1.0549729219451955).epsilon(1e-15));
    // decay factor frozen from an independent high precision integration
    CHECK(s.w == Catch::Approx(0.28329048390245837).epsilon(1e-10));
}

TEST_CASE("ode oracle fixed points and trivial data") {
    Params p;
    SECTION("u = 1 is a fixed point, w decays exponentially") {
        const OdePoint s = ode_oracle(1.0, 2.0, p, 1.5);
        CHECK(s.u == 1.0);
        CHECK(s.w == Catch::Approx(2.0 * std::exp(-1.5)).epsilon(1e-12));
    }
    SECTION("u = 0 freezes both components") {
        const OdePoint s = ode_oracle(0.0, 0.7, p, 3.0);
        CHECK(s.u == 0.0);
        CHECK(s.w == 0.7);
    }
    SECTION("regularized exponent enters the oracle") {
        Params pe = p;
        pe.eps = 0.5;
        const OdePoint a = ode_oracle(2.0, 1.0, p, 1.0);
        const OdePoint b = ode_oracle(2.0, 1.0, pe, 1.0);
        CHECK(a.u != b.u);
        CHECK(b.u < a.u); // harder penalty above the carrying capacity
    }
    SECTION("step count must be positive") {
        CHECK_THROWS_AS(ode_oracle(1.0, 1.0, p, 1.0, 0), ConfigError);
    }
}

TEST_CASE("initial data specs parse and evaluate") {
    SECTION("uniform") {
        const InitSpec s = InitSpec::parse("uniform:2.5");
        CHECK(s.eval(0.0, 0.0) == 2.5);
        CHECK(s.eval(-0.9, 0.7) == 2.5);
        CHECK(InitSpec::parse("uniform").eval(0.3, 0.3) == 1.0);
        CHECK(InitSpec::parse("uniform:").eval(0.3, 0.3) == 1.0);
    }
    SECTION("cosbump clamps at zero") {
        const InitSpec s = InitSpec::parse("cosbump:1:0.5");
        CHECK(s.eval(0.0, 0.0) == Catch::Approx(1.5).epsilon(1e-15));
        CHECK(s.eval(1.0, 0.0) == Catch::Approx(0.5).epsilon(1e-12));
        const InitSpec t = InitSpec::parse("cosbump:0.1:1");
        CHECK(t.eval(1.0, 0.0) == 0.0);
    }
    SECTION("gauss peaks at the center") {
        const InitSpec s = InitSpec::parse("gauss:0.5:-0.25:0.2:2");
        CHECK(s.eval(0.5, -0.25) == 2.0);
        CHECK(s.eval(0.7, -0.25) ==
              Catch::Approx(2.0 * std::exp(-0.04 / 0.08)).epsilon(1e-12));
    }
    SECTION("leftstep includes the threshold") {
        const InitSpec s = InitSpec::parse("leftstep:-0.25:1");
        CHECK(s.eval(-0.3, 0.9) == 1.0);
        CHECK(s.eval(-0.25, 0.0) == 1.0);
        CHECK(s.eval(-0.2, 0.0) == 0.0);
    }
    SECTION("rejections") {
        CHECK_THROWS_AS(InitSpec::parse(""), ConfigError);
        CHECK_THROWS_AS(InitSpec::parse("nonsense:1"), ConfigError);
        CHECK_THROWS_AS(InitSpec::parse("uniform:abc"), ConfigError);
        CHECK_THROWS_AS(InitSpec::parse("gauss:0:0:0:1"), ConfigError);
    }
}

TEST_CASE("presets are complete and valid") {
    const auto names = preset_names();
    REQUIRE(names.size() == 4);
    for (const auto& n : names) {
        const Scenario sc = make_preset(n);
        CHECK(sc.name == n);
        CHECK_NOTHROW(validate_scenario(sc));
    }
    CHECK_THROWS_AS(make_preset("no-such-preset"), ConfigError);

    const Scenario d1 = make_preset("d1-degenerate");
    CHECK(d1.domain.kind == DomainKind::Disk);
    CHECK(d1.tensor.kind == TensorKind::RadialPower);
    CHECK(d1.params.eps == 0.01);
    CHECK(d1.params.r == 3.0);
    CHECK(d1.beta == 0.75);

    const Scenario d2 = make_preset("d2-membrane");
    CHECK(d2.tensor.kind == TensorKind::AxisPower);
    CHECK(d2.u0.kind == InitSpec::Kind::LeftStep);
    CHECK(d2.frames == 50);

    const Scenario sm = make_preset("smooth-spd");
    CHECK(sm.tensor.kind == TensorKind::Constant);
    CHECK(sm.params.T == 0.5);
    // off-diagonal anisotropy is genuinely present
    CHECK(sm.tensor.constant.a12 != 0.0);

    const Scenario ul = make_preset("uniform-logistic");
    CHECK(ul.params.chi == 0.5);
    CHECK(ul.u0.kind == InitSpec::Kind::Uniform);
}

TEST_CASE("scenario validation rejects broken setups") {
    Scenario sc = make_preset("uniform-logistic");
    SECTION("beta outside [1/2, 1)") {
        sc.beta = 0.4;
        CHECK_THROWS_AS(validate_scenario(sc), ConfigError);
        sc.beta = 1.0;
        CHECK_THROWS_AS(validate_scenario(sc), ConfigError);
    }
    SECTION("weak mode enforces the hypotheses") {
        sc.params.eps = 0.0;
        sc.beta = 0.8; // beta/(1-beta) = 4 > r = 2
        CHECK_THROWS_AS(validate_scenario(sc), ConfigError);
        sc.params.eps = 0.05; // regularized mode has no such gate
        CHECK_NOTHROW(validate_scenario(sc));
    }
    SECTION("frames and seed") {
        sc.frames = 0;
        CHECK_THROWS_AS(validate_scenario(sc), ConfigError);
        sc.frames = 10;
        sc.seed = 0;
        CHECK_THROWS_AS(validate_scenario(sc), ConfigError);
    }
}

TEST_CASE("space-time distance closed form and schedule checks") {
    const Grid g = build_grid(2, 2, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    auto mk = [&](double value, double t0, double t1) {
        Trajectory tr;
        tr.grid = &g;
        State a;
        a.t = t0;
        a.u.assign(g.ncells(), value);
        a.w.assign(g.ncells(), 0.0);
        State b = a;
        b.t = t1;
        tr.frames = {a, b};
        return tr;
    };
    const Trajectory A = mk(1.0, 0.0, 1.0);
    const Trajectory B = mk(1.5, 0.0, 1.0);
    // |diff| = 0.5 over area 4 and duration 1: (0.5^p * 4)^(1/p)
    const double d3 = spacetime_lp_distance(g, A, B, 3.0);
    CHECK(d3 == Catch::Approx(0.5 * std::pow(4.0, 1.0 / 3.0)).epsilon(1e-13));
    const double d1 = spacetime_lp_distance(g, A, B, 1.0);
    CHECK(d1 == Catch::Approx(2.0).epsilon(1e-13));
    CHECK(spacetime_lp_distance(g, A, A, 2.0) == 0.0);

    const Trajectory C = mk(1.5, 0.0, 0.9);
    CHECK_THROWS_AS(spacetime_lp_distance(g, A, C, 2.0), ConfigError);
    Trajectory D4 = mk(1.5, 0.0, 1.0);
    D4.frames.push_back(D4.frames.back());
    CHECK_THROWS_AS(spacetime_lp_distance(g, A, D4, 2.0), ConfigError);
}

TEST_CASE("epsilon study contracts distances on a varying scenario") {
    Scenario sc = make_preset("smooth-spd");
    sc.nx = sc.ny = 12;
    sc.frames = 8;
    const auto es = epsilon_study(sc, {0.2, 0.1, 0.05}, 3.0);
    REQUIRE(es.eps.size() == 3);
    CHECK(es.eps[0] == 0.2);   // sorted descending
    CHECK(es.eps[2] == 0.05);
    REQUIRE(es.distances.size() == 2);
    CHECK(es.distances[0] > 0.0);
    CHECK(es.distances[1] > 0.0);
    CHECK(es.distances[1] < es.distances[0]);
    CHECK(es.violations == 0);
    CHECK(es.pass);
    CHECK(es.slope_valid);
    CHECK(es.slope > 0.0);
    CHECK_FALSE(es.aborted);

    SECTION("threaded execution is bit identical") {
        const auto es3 = epsilon_study(sc, {0.2, 0.1, 0.05}, 3.0, 3);
        CHECK(es3.distances == es.distances);
        CHECK(es3.slope == es.slope);
    }
}

TEST_CASE("epsilon study isolates the exponent shift on uniform data") {
    // Constant tensor, constant data: the tensor regularization acts on a
    // zero gradient and members differ only through the regularized logistic
    // exponent r + eps. The member distance is then O(eps), so halving eps
    // halves the distance and the fitted slope sits near one.
    Scenario sc = make_preset("uniform-logistic");
    sc.nx = sc.ny = 8;
    sc.frames = 5;
    sc.params.T = 0.1;
    sc.params.dt_max = 1e-3; // level independent steps
    const auto es = epsilon_study(sc, {0.4, 0.2, 0.1}, 3.0);
    REQUIRE(es.distances.size() == 2);
    CHECK(es.distances[0] > 0.0);
    CHECK(es.distances[1] > 0.0);
    CHECK(es.distances[0] / es.distances[1] == Catch::Approx(2.0).margin(0.25));
    CHECK(es.pass);
    CHECK(es.violations == 0);
    CHECK(es.slope_valid);
    CHECK(es.slope == Catch::Approx(1.0).margin(0.2));
}

TEST_CASE("epsilon study rejects bad inputs") {
    Scenario sc = make_preset("uniform-logistic");
    sc.nx = sc.ny = 8;
    CHECK_THROWS_AS(epsilon_study(sc, {0.1}, 3.0), ConfigError);
    CHECK_THROWS_AS(epsilon_study(sc, {0.1, 0.0}, 3.0), ConfigError);
    CHECK_THROWS_AS(epsilon_study(sc, {0.5, 1.5}, 3.0), ConfigError);
    CHECK_THROWS_AS(epsilon_study(sc, {0.2, 0.1}, 0.5), ConfigError);
}

TEST_CASE("refinement study measures first order convergence") {
    Scenario sc = make_preset("smooth-spd");
    sc.frames = 4;
    const auto rs = refinement_study(sc, {8, 16, 32}, 2, 0.5);
    REQUIRE(rs.errors.size() == 2);
    CHECK(rs.errors[0] > rs.errors[1]);
    CHECK_FALSE(rs.roundoff);
    CHECK(rs.observed_order > 0.5);
    CHECK(rs.pass);
    CHECK(rs.levels == std::vector<int>{8, 16, 32});
}

TEST_CASE("refinement study detects convergence at rounding level") {
    // With the step cap far below every level's stability bound all levels
    // march through identical times, and a spatially uniform exact solution
    // makes the restriction differences exactly zero.
    Scenario sc = make_preset("uniform-logistic");
    sc.params.T = 0.1;
    sc.params.dt_max = 1e-3;
    sc.frames = 4;
    const auto rs = refinement_study(sc, {4, 8, 16});
    CHECK(rs.roundoff);
    CHECK(rs.pass);
    CHECK(rs.errors[0] == 0.0);
    CHECK(rs.errors[1] == 0.0);
    CHECK(rs.note == "converged to rounding level");
}

TEST_CASE("refinement study rejects bad level lists") {
    Scenario sc = make_preset("uniform-logistic");
    CHECK_THROWS_AS(refinement_study(sc, {8, 16}), ConfigError);
    CHECK_THROWS_AS(refinement_study(sc, {8, 12, 24}), ConfigError);
}

TEST_CASE("formulation crosscheck discrepancy shrinks under refinement") {
    const Scenario ul = make_preset("uniform-logistic");
    const double d8 = formulation_crosscheck(ul, 8);
    const double d16 = formulation_crosscheck(ul, 16);
    const double d32 = formulation_crosscheck(ul, 32);
    CAPTURE(d8, d16, d32);
    CHECK(d8 > d16);
    CHECK(d16 > d32);
    CHECK(d32 < 1e-3);
}

TEST_CASE("run_scenario honors frame overrides and produces diagnostics") {
    Scenario sc = make_preset("uniform-logistic");
    sc.nx = sc.ny = 8;
    sc.frames = 7;
    const auto r1 = run_scenario(sc);
    CHECK(r1.traj.frames.size() == 8); // initial frame plus 7 intervals
    CHECK(r1.series.size() == 8);
    CHECK(r1.verdict.pass);
    const auto r2 = run_scenario(sc, false, 3);
    CHECK(r2.traj.frames.size() == 4);
    CHECK(r2.series.empty());
}
