#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hapfv/dynamics.hpp"

using namespace hapfv;

namespace {

Params base_params() {
    Params p;
    p.chi = 1.0;
    p.mu = 1.0;
    p.r = 3.0;
    p.eps = 0.01;
    p.T = 1.0;
    p.cfl = 0.9;
    p.dt_max = 1e-2;
    return p;
}

} // namespace

TEST_CASE("params validation rejects each bad field") {
    CHECK_NOTHROW(base_params().validate());
    auto bad = [](auto setter) {
        Params p = base_params();
        setter(p);
        return p;
    };
    CHECK_THROWS_AS(bad([](Params& p) { p.chi = -1; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.mu = -0.5; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.r = 1.5; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.eps = 1.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.T = -1; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.cfl = 0.0; }).validate(), ConfigError);
    CHECK_THROWS_AS(bad([](Params& p) { p.dt_max = 0.0; }).validate(), ConfigError);
    CHECK(base_params().r_eff() == Catch::Approx(3.01));
}

TEST_CASE("discrete mass identity holds to rounding on a degenerate disk run") {
    const Grid g = build_grid(32, 32, Domain::disk(0.0, 0.0, 1.0));
    const TensorField D = regularize(make_radial_power_field(g, 2.0), 0.01);
    const Params p = base_params();
    State s;
    s.u = make_field(g, [](double x, double y) {
        return std::max(0.0, 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y));
    });
    s.w = make_field(g, [](double, double) { return 1.0; });
    for (int n = 0; n < 50; ++n) {
        const CflBreakdown cb = cfl_dt(g, D, p, s.u, s.w);
        const StepStats st = step(g, D, p, s, cb.dt);
        CHECK(st.mass_residual <= 1e-12);
        CHECK(st.clips == 0);
    }
}

TEST_CASE("w update is the exact exponential and exactly monotone") {
    const Grid g = build_grid(4, 4, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    std::vector<double> u(g.ncells(), 1.0), w(g.ncells(), 1.0);
    step_w_exact(g, u, w, 1.0);
    for (int c : g.active_cells) CHECK(w[c] == std::exp(-1.0));

    SplitMix64 rng(7);
    std::vector<double> u2(g.ncells()), w2(g.ncells()), w_old(g.ncells());
    for (int c : g.active_cells) {
        u2[c] = rng.uniform(0.0, 5.0);
        w2[c] = w_old[c] = rng.uniform(0.0, 2.0);
    }
    step_w_exact(g, u2, w2, 0.37);
    for (int c : g.active_cells) {
        CHECK(w2[c] <= w_old[c]); // exact: exp(-u dt) <= 1
        if (u2[c] == 0.0) CHECK(w2[c] == w_old[c]);
    }
}

TEST_CASE("cfl breakdown reproduces the closed-form bounds") {
    SECTION("diffusion-limited: D = I, h = 0.1, cfl = 0.5") {
        const Grid g = build_grid(10, 10, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
        const TensorField D = make_constant_field(g, SymMat2::identity());
        Params p = base_params();
        p.chi = 0.0;
        p.mu = 1e-8;
        p.cfl = 0.5;
        p.dt_max = 1.0;
        const std::vector<double> u(g.ncells(), 0.01), w(g.ncells(), 1.0);
        const CflBreakdown cb = cfl_dt(g, D, p, u, w);
        CHECK(cb.dt == Catch::Approx(0.00125).epsilon(1e-12));
    }
    SECTION("unconstrained: D = 0 and no drift gives dt_max exactly") {
        const Grid g = build_grid(10, 10, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
        const TensorField D = make_constant_field(g, SymMat2{0.0, 0.0, 0.0});
        Params p = base_params();
        p.chi = 0.0;
        p.mu = 0.0;
        p.dt_max = 0.025;
        const std::vector<double> u(g.ncells(), 1.0), w(g.ncells(), 1.0);
        const CflBreakdown cb = cfl_dt(g, D, p, u, w);
        CHECK(cb.dt == 0.025);
    }
    SECTION("doubling resolution shrinks the diffusion bound 4x") {
        Params p = base_params();
        p.chi = 0.0;
        p.mu = 1e-8;
        p.dt_max = 1.0;
        double dt_coarse = 0.0;
        for (int n : {10, 20}) {
            const Grid g = build_grid(n, n, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
            const TensorField D = make_constant_field(g, SymMat2::identity());
            const std::vector<double> u(g.ncells(), 0.01), w(g.ncells(), 1.0);
            const CflBreakdown cb = cfl_dt(g, D, p, u, w);
            if (dt_coarse == 0.0) dt_coarse = cb.dt;
            else CHECK(cb.dt == Catch::Approx(dt_coarse / 4.0).epsilon(0.01));
        }
    }
}

TEST_CASE("mu = 0 conserves mass over a full run") {
    const Grid g = build_grid(32, 32, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    const TensorField D =
        make_constant_field(g, SymMat2::rotated_diag(1.0, 0.1, M_PI / 6.0));
    Params p = base_params();
    p.mu = 0.0;
    p.eps = 0.0;
    p.r = 2.0;
    p.chi = 0.5;
    p.T = 0.1;
    auto u0 = make_field(g, [](double x, double y) {
        return std::max(0.0, 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y));
    });
    auto w0 = make_field(g, [](double x, double y) {
        return std::max(0.0, 1.0 + 0.3 * std::cos(M_PI * x) * std::cos(M_PI * y));
    });
    const double mass0 = cell_integral(g, u0);
    RunOptions opt;
    opt.frames = 4;
    const Trajectory traj = run(g, D, p, std::move(u0), std::move(w0), opt);
    REQUIRE_FALSE(traj.report.aborted);
    const double massT = cell_integral(g, traj.frames.back().u);
    CHECK(std::abs(massT - mass0) / mass0 < 1e-11);
    CHECK(traj.report.clip_count == 0);
}

TEST_CASE("sharp data stays nonnegative without clips") {
    const Grid g = build_grid(64, 64, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    const TensorField D = make_axis_power_field(g, 2.0);
    Params p = base_params();
    p.r = 2.0;
    p.eps = 0.0;
    p.T = 0.25;
    auto u0 = make_field(g, [](double x, double) { return x <= -0.25 ? 1.0 : 0.0; });
    auto w0 = make_field(g, [](double, double) { return 1.0; });
    RunOptions opt;
    opt.frames = 10;
    const Trajectory traj = run(g, D, p, std::move(u0), std::move(w0), opt);
    REQUIRE_FALSE(traj.report.aborted);
    CHECK(traj.report.clip_count == 0);
    for (const State& s : traj.frames)
        for (int c : g.active_cells) CHECK(s.u[c] >= 0.0);
}

TEST_CASE("uniform logistic run matches the closed form") {
    const Grid g = build_grid(64, 64, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity());
    Params p;
    p.chi = 0.5;
    p.mu = 1.0;
    p.r = 2.0;
    p.eps = 0.0;
    p.T = 1.0;
    auto u0 = make_field(g, [](double, double) { return 2.0; });
    auto w0 = make_field(g, [](double, double) { return 1.0; });
    RunOptions opt;
    opt.frames = 10;
    const Trajectory traj = run(g, D, p, std::move(u0), std::move(w0), opt);
    REQUIRE_FALSE(traj.report.aborted);
    const double exact = 2.0 / (2.0 - std::exp(-1.0));
    for (int c : g.active_cells)
        CHECK(traj.frames.back().u[c] == Catch::Approx(exact).epsilon(1e-3));
}

TEST_CASE("trajectory frames land exactly on the requested times") {
    const Grid g = build_grid(8, 8, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity(0.1));
    Params p = base_params();
    p.T = 1.0;
    auto u0 = make_field(g, [](double, double) { return 1.0; });
    auto w0 = make_field(g, [](double, double) { return 1.0; });
    RunOptions opt;
    opt.output_times = {0.3, 0.7};
    const Trajectory traj = run(g, D, p, u0, w0, opt);
    REQUIRE(traj.frames.size() == 3);
    CHECK(traj.frames[0].t == 0.0);
    CHECK(traj.frames[1].t == 0.3);
    CHECK(traj.frames[2].t == 0.7);

    SECTION("T = 0 stores only the initial state") {
        Params p0 = p;
        p0.T = 0.0;
        const Trajectory tz = run(g, D, p0, u0, w0, {});
        REQUIRE(tz.frames.size() == 1);
        CHECK(tz.frames[0].t == 0.0);
    }
    SECTION("times outside [0, T] are rejected") {
        RunOptions bad;
        bad.output_times = {0.5, 1.5};
        CHECK_THROWS_AS(run(g, D, p, u0, w0, bad), ConfigError);
    }
}

TEST_CASE("reruns are bitwise deterministic") {
    const Grid g = build_grid(24, 24, Domain::disk(0.0, 0.0, 1.0));
    const TensorField D = regularize(make_radial_power_field(g, 2.0), 0.01);
    Params p = base_params();
    p.T = 0.1;
    auto u0 = make_field(g, [](double x, double y) {
        return std::max(0.0, 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y));
    });
    auto w0 = make_field(g, [](double, double) { return 1.0; });
    RunOptions opt;
    opt.frames = 5;
    const Trajectory a = run(g, D, p, u0, w0, opt);
    const Trajectory b = run(g, D, p, u0, w0, opt);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t k = 0; k < a.frames.size(); ++k)
        for (int c : g.active_cells) {
            CHECK(a.frames[k].u[c] == b.frames[k].u[c]);
            CHECK(a.frames[k].w[c] == b.frames[k].w[c]);
        }
}

TEST_CASE("initial data validation") {
    const Grid g = build_grid(8, 8, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity());
    const Params p = base_params();
    std::vector<double> good(g.ncells(), 1.0);
    std::vector<double> neg(g.ncells(), 1.0);
    neg[g.idx(2, 2)] = -0.5;
    std::vector<double> nan(g.ncells(), 1.0);
    nan[g.idx(1, 1)] = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> short_vec(4, 1.0);
    CHECK_THROWS_AS(run(g, D, p, neg, good, {}), ConfigError);
    CHECK_THROWS_AS(run(g, D, p, good, nan, {}), ConfigError);
    CHECK_THROWS_AS(run(g, D, p, short_vec, good, {}), ConfigError);
}

TEST_CASE("blow-up aborts with a partial trajectory") {
    const Grid g = build_grid(8, 8, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity());
    Params p = base_params();
    p.r = 2.0;
    p.eps = 0.0;
    // Overflow the logistic term: u^q overflows to inf at the first rate
    // evaluation, which must surface as an abort, not an exception.
    std::vector<double> u0(g.ncells(), 1e308), w0(g.ncells(), 1.0);
    const Trajectory traj = run(g, D, p, u0, w0, {});
    CHECK(traj.report.aborted);
    CHECK_FALSE(traj.report.abort_reason.empty());
    REQUIRE(traj.frames.size() >= 1); // the initial snapshot survives
    CHECK(traj.frames[0].t == 0.0);
}

TEST_CASE("transform round-trips and reduces bitwise when taxis is off") {
    const Grid g = build_grid(16, 16, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    SplitMix64 rng(11);
    std::vector<double> u(g.ncells()), w(g.ncells());
    for (int c : g.active_cells) {
        u[c] = rng.uniform(0.0, 3.0);
        w[c] = rng.uniform(0.0, 2.0);
    }
    const auto a = transform(u, w, 0.7);
    const auto back = inverse_transform(a, w, 0.7);
    for (int c : g.active_cells) CHECK(back[c] == Catch::Approx(u[c]).margin(1e-14));

    // chi = 0: a == u bitwise and both integrators take identical steps.
    const auto a0 = transform(u, w, 0.0);
    for (int c : g.active_cells) CHECK(a0[c] == u[c]);
}

TEST_CASE("transformed integrator reduces to the primal one without taxis coupling") {
    const Grid g = build_grid(16, 16, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity(0.5));
    auto u0 = make_field(g, [](double x, double y) {
        return std::max(0.0, 1.0 + 0.5 * std::cos(M_PI * x) * std::cos(M_PI * y));
    });
    RunOptions opt;
    opt.frames = 3;

    SECTION("chi = 0") {
        Params p = base_params();
        p.chi = 0.0;
        p.r = 2.0;
        p.eps = 0.0;
        p.T = 0.05;
        auto w0 = make_field(g, [](double x, double) { return 1.0 + 0.2 * x; });
        const Trajectory prim = run(g, D, p, u0, w0, opt);
        const Trajectory trans = run_transformed(g, D, p, u0, w0, opt);
        REQUIRE_FALSE(prim.report.aborted);
        REQUIRE_FALSE(trans.report.aborted);
        REQUIRE(prim.frames.size() == trans.frames.size());
        for (std::size_t k = 0; k < prim.frames.size(); ++k)
            for (int c : g.active_cells) {
                CHECK(prim.frames[k].u[c] == trans.frames[k].u[c]);
                CHECK(prim.frames[k].w[c] == trans.frames[k].w[c]);
            }
    }
    SECTION("w = 0") {
        Params p = base_params();
        p.chi = 1.0;
        p.r = 2.0;
        p.eps = 0.0;
        p.T = 0.05;
        std::vector<double> w0(g.ncells(), 0.0);
        const Trajectory prim = run(g, D, p, u0, w0, opt);
        const Trajectory trans = run_transformed(g, D, p, u0, w0, opt);
        REQUIRE_FALSE(prim.report.aborted);
        REQUIRE_FALSE(trans.report.aborted);
        for (std::size_t k = 0; k < prim.frames.size(); ++k)
            for (int c : g.active_cells)
                CHECK(prim.frames[k].u[c] == trans.frames[k].u[c]);
    }
}

TEST_CASE("flux telescoping: rates sum to zero without sources") {
    const Grid g = build_grid(16, 16, Domain::disk(0.0, 0.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity());
    Params p = base_params();
    p.chi = 0.0;
    p.mu = 0.0;
    std::vector<double> u(g.ncells(), 0.0), w(g.ncells(), 1.0), rate(g.ncells(), 0.0);
    u[g.active_cells[g.active_cells.size() / 2]] = 3.0;
    assemble_rates(g, D, p, u, w, rate);
    double sum = 0.0;
    for (int c : g.active_cells) sum += rate[c];
    CHECK(std::abs(sum) * g.cell_area() < 1e-13);
}

TEST_CASE("zero state is absorbing") {
    const Grid g = build_grid(8, 8, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    const TensorField D = make_constant_field(g, SymMat2::identity());
    const Params p = base_params();
    std::vector<double> u(g.ncells(), 0.0), w(g.ncells(), 0.7), rate(g.ncells(), 1.0);
    assemble_rates(g, D, p, u, w, rate);
    for (int c : g.active_cells) CHECK(rate[c] == 0.0);
}
