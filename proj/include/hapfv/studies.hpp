#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "hapfv/diagnostics.hpp"
#include "hapfv/dynamics.hpp"
#include "hapfv/grid.hpp"
#include "hapfv/tensor_field.hpp"

namespace hapfv {

// Closed-form initial data, parseable from "kind:arg:arg" strings.
struct InitSpec {
    enum class Kind { Uniform, CosBump, Gauss, LeftStep };
    Kind kind = Kind::Uniform;
    double a = 1.0, b = 0.0, c = 0.0, d = 0.0;

    double eval(double x, double y) const {
        switch (kind) {
        case Kind::Uniform:
            return a;
        case Kind::CosBump: // max(0, a + b cos(pi x) cos(pi y))
            return std::max(0.0, a + b * std::cos(M_PI * x) * std::cos(M_PI * y));
        case Kind::Gauss: // d * exp(-((x-a)^2 + (y-b)^2) / (2 c^2))
            return d * std::exp(-((x - a) * (x - a) + (y - b) * (y - b)) / (2.0 * c * c));
        case Kind::LeftStep: // b for x <= a, else 0
            return x <= a ? b : 0.0;
        }
        return 0.0;
    }

    static InitSpec parse(const std::string& text) {
        std::vector<std::string> parts;
        std::size_t pos = 0;
        while (true) {
            const std::size_t next = text.find(':', pos);
            if (next == std::string::npos) {
                parts.push_back(text.substr(pos));
                break;
            }
            parts.push_back(text.substr(pos, next - pos));
            pos = next + 1;
        }
        auto num = [&](std::size_t i, double fallback) {
            if (i >= parts.size() || parts[i].empty()) return fallback;
            try {
                return std::stod(parts[i]);
            } catch (...) {
                throw ConfigError("bad number in initial data spec: " + text);
            }
        };
        InitSpec s;
        if (parts.empty() || parts[0].empty()) throw ConfigError("empty initial data spec");
        const std::string& k = parts[0];
        if (k == "uniform") {
            s.kind = Kind::Uniform;
            s.a = num(1, 1.0);
        } else if (k == "cosbump") {
            s.kind = Kind::CosBump;
            s.a = num(1, 1.0);
            s.b = num(2, 0.5);
        } else if (k == "gauss") {
            s.kind = Kind::Gauss;
            s.a = num(1, 0.0);
            s.b = num(2, 0.0);
            s.c = num(3, 0.2);
            s.d = num(4, 1.0);
            if (!(s.c > 0.0)) throw ConfigError("gauss width must be positive");
        } else if (k == "leftstep") {
            s.kind = Kind::LeftStep;
            s.a = num(1, -0.25);
            s.b = num(2, 1.0);
        } else {
            throw ConfigError("unknown initial data kind: " + k);
        }
        return s;
    }
};

struct TensorSpec {
    TensorKind kind = TensorKind::Constant;
    double s = 2.0;
    SymMat2 constant = SymMat2::identity();
    std::string csv_path;
};

// A complete, runnable problem description.
struct Scenario {
    std::string name = "custom";
    TensorSpec tensor;
    Domain domain = Domain::rectangle(-1.0, -1.0, 1.0, 1.0);
    int nx = 64, ny = 64;
    Params params;
    double beta = 0.5;
    InitSpec u0, w0;
    int frames = 100;
    std::uint64_t seed = 12345;
};

inline TensorField make_base_tensor(const Scenario& sc, const Grid& g) {
    switch (sc.tensor.kind) {
    case TensorKind::RadialPower:
        return make_radial_power_field(g, sc.tensor.s);
    case TensorKind::AxisPower:
        return make_axis_power_field(g, sc.tensor.s);
    case TensorKind::Constant:
        return make_constant_field(g, sc.tensor.constant);
    case TensorKind::Imported:
        return make_imported_field(g, read_tensor_csv(sc.tensor.csv_path));
    }
    throw ConfigError("unknown tensor kind");
}

// The tensor the integrator sees: regularized when eps > 0.
inline TensorField make_run_tensor(const Scenario& sc, const Grid& g) {
    TensorField base = make_base_tensor(sc, g);
    return sc.params.eps > 0.0 ? regularize(base, sc.params.eps) : base;
}

// Weak mode (eps = 0) additionally requires the well-posedness hypotheses.
inline void validate_scenario(const Scenario& sc) {
    sc.params.validate();
    if (!(sc.beta >= 0.5 && sc.beta < 1.0)) throw ConfigError("beta must lie in [1/2, 1)");
    if (sc.params.eps == 0.0) {
        const HypothesesReport h = validate_theorem_hypotheses(sc.beta, sc.params.r);
        if (!h.ok) throw ConfigError("weak mode (eps = 0) rejected: " + h.message);
    }
    if (sc.frames < 1) throw ConfigError("frame count must be positive");
    if (sc.seed == 0) throw ConfigError("seed must be nonzero");
}

inline std::vector<std::string> preset_names() {
    return {"uniform-logistic", "d1-degenerate", "smooth-spd", "d2-membrane"};
}

// Shipped scenario presets; configs select one by name and may override
// individual keys.
inline Scenario make_preset(const std::string& name) {
    Scenario sc;
    sc.name = name;
    if (name == "uniform-logistic") {
        sc.tensor = {TensorKind::Constant, 2.0, SymMat2::identity(), {}};
        sc.domain = Domain::rectangle(-1.0, -1.0, 1.0, 1.0);
        sc.params = {.chi = 0.5, .mu = 1.0, .r = 2.0, .eps = 0.0, .T = 1.0, .cfl = 0.9, .dt_max = 1e-2};
        sc.beta = 0.5;
        sc.u0 = {.kind = InitSpec::Kind::Uniform, .a = 2.0};
        sc.w0 = {.kind = InitSpec::Kind::Uniform, .a = 1.0};
    } else if (name == "d1-degenerate") {
        sc.tensor = {TensorKind::RadialPower, 2.0, SymMat2::identity(), {}};
        sc.domain = Domain::disk(0.0, 0.0, 1.0);
        sc.params = {.chi = 1.0, .mu = 1.0, .r = 3.0, .eps = 0.01, .T = 1.0, .cfl = 0.9, .dt_max = 1e-2};
        sc.beta = 0.75;
        sc.u0 = {.kind = InitSpec::Kind::CosBump, .a = 1.0, .b = 0.5};
        sc.w0 = {.kind = InitSpec::Kind::Uniform, .a = 1.0};
    } else if (name == "smooth-spd") {
        sc.tensor = {TensorKind::Constant, 2.0, SymMat2::rotated_diag(1.0, 0.1, M_PI / 6.0), {}};
        sc.domain = Domain::rectangle(-1.0, -1.0, 1.0, 1.0);
        sc.params = {.chi = 0.5, .mu = 1.0, .r = 2.0, .eps = 0.0, .T = 0.5, .cfl = 0.9, .dt_max = 1e-2};
        sc.beta = 0.5;
        sc.u0 = {.kind = InitSpec::Kind::CosBump, .a = 1.0, .b = 0.5};
        sc.w0 = {.kind = InitSpec::Kind::CosBump, .a = 1.0, .b = 0.3};
    } else if (name == "d2-membrane") {
        sc.tensor = {TensorKind::AxisPower, 2.0, SymMat2::identity(), {}};
        sc.domain = Domain::rectangle(-1.0, -1.0, 1.0, 1.0);
        sc.params = {.chi = 1.0, .mu = 1.0, .r = 2.0, .eps = 0.0, .T = 1.0, .cfl = 0.9, .dt_max = 1e-2};
        sc.beta = 0.6;
        sc.u0 = {.kind = InitSpec::Kind::LeftStep, .a = -0.25, .b = 1.0};
        sc.w0 = {.kind = InitSpec::Kind::Uniform, .a = 1.0};
        sc.frames = 50;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return sc;
}

// Grid, tensor, trajectory, and diagnostics of one finished run. Grid and
// tensor live behind stable pointers because the trajectory refers to them.
struct ScenarioRun {
    std::unique_ptr<Grid> grid;
    std::unique_ptr<TensorField> D;
    Trajectory traj;
    std::vector<EnergySample> series;
    DiagnosticsVerdict verdict;
};

inline ScenarioRun run_scenario(const Scenario& sc, bool with_diagnostics = true,
                                int frames_override = -1) {
    validate_scenario(sc);
    ScenarioRun out;
    out.grid = std::make_unique<Grid>(build_grid(sc.nx, sc.ny, sc.domain));
    out.D = std::make_unique<TensorField>(make_run_tensor(sc, *out.grid));

    auto u0 = make_field(*out.grid, [&](double x, double y) { return sc.u0.eval(x, y); });
    auto w0 = make_field(*out.grid, [&](double x, double y) { return sc.w0.eval(x, y); });

    RunOptions opt;
    opt.frames = frames_override > 0 ? frames_override : sc.frames;
    DiagnosticsMonitor mon(*out.D, sc.params);
    if (with_diagnostics)
        opt.monitor = [&mon](const State& s, const Grid& g) { mon(s, g); };

    out.traj = run(*out.grid, *out.D, sc.params, std::move(u0), std::move(w0), opt);
    if (with_diagnostics) {
        out.series = mon.series();
        out.verdict = verdicts(out.traj, out.series, sc.params);
    }
    return out;
}

// Discrete L^p(Omega x (0,T)) distance between the u-fields of two
// trajectories sharing one grid and output schedule (trapezoid in time).
inline double spacetime_lp_distance(const Grid& g, const Trajectory& A, const Trajectory& B,
                                    double p) {
    if (A.frames.size() != B.frames.size() || A.frames.size() < 2)
        throw ConfigError("trajectories do not share an output schedule");
    const std::size_t nk = A.frames.size();
    double acc = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
        const double t = A.frames[k].t;
        if (std::abs(t - B.frames[k].t) > 1e-10 * std::max(1.0, t))
            throw ConfigError("trajectories do not share an output schedule");
        const double t_prev = k > 0 ? A.frames[k - 1].t : t;
        const double t_next = k + 1 < nk ? A.frames[k + 1].t : t;
        const double tw = 0.5 * (t_next - t_prev);
        double cell_sum = 0.0;
        for (int c : g.active_cells)
            cell_sum += std::pow(std::abs(A.frames[k].u[c] - B.frames[k].u[c]), p);
        acc += tw * cell_sum * g.cell_area();
    }
    return std::pow(acc, 1.0 / p);
}

namespace detail {

template <typename Fn>
void parallel_over(std::size_t n, int threads, Fn fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t next = 0;
    const std::size_t chunk = 1;
    (void)chunk;
    // static block assignment keeps results independent of thread count
    const int nt = std::min<std::size_t>(threads, n);
    for (int t = 0; t < nt; ++t)
        pool.emplace_back([&fn, t, nt, n]() {
            for (std::size_t i = t; i < n; i += nt) fn(i);
        });
    for (auto& th : pool) th.join();
    (void)next;
}

} // namespace detail

struct EpsilonStudy {
    std::vector<double> eps;       // descending
    std::vector<double> distances; // d_j between members j and j+1
    double metric_p = 3.0;
    int violations = 0;  // increases of d_j beyond relative grace
    bool pass = false;   // at most one violation and no aborts
    double slope = 0.0;  // least squares of ln d_j against ln eps_j
    bool slope_valid = false;
    bool aborted = false;
    std::string note;
};

// Runs the scenario for each regularization level on a shared grid and
// output schedule and measures consecutive space-time L^p distances. For a
// family converging as eps -> 0 the distances decay; halving eps should
// roughly halve d_j when the dependence is first order in eps.
inline EpsilonStudy epsilon_study(const Scenario& base, std::vector<double> eps_list,
                                  double metric_p, int threads = 1) {
    if (eps_list.size() < 2) throw ConfigError("epsilon study needs at least two levels");
    std::sort(eps_list.begin(), eps_list.end(), std::greater<double>());
    for (double e : eps_list)
        if (!(e > 0.0 && e < 1.0)) throw ConfigError("epsilon levels must lie in (0, 1)");
    if (!(metric_p >= 1.0)) throw ConfigError("metric exponent must be >= 1");

    EpsilonStudy out;
    out.eps = eps_list;
    out.metric_p = metric_p;

    const Grid grid = build_grid(base.nx, base.ny, base.domain);
    const TensorField D0 = make_base_tensor(base, grid);
    const auto u0 = make_field(grid, [&](double x, double y) { return base.u0.eval(x, y); });
    const auto w0 = make_field(grid, [&](double x, double y) { return base.w0.eval(x, y); });

    std::vector<Trajectory> trajs(eps_list.size());
    std::vector<TensorField> tensors;
    tensors.reserve(eps_list.size());
    for (double e : eps_list) tensors.push_back(regularize(D0, e));

    detail::parallel_over(eps_list.size(), threads, [&](std::size_t i) {
        Params p = base.params;
        p.eps = eps_list[i];
        RunOptions opt;
        opt.frames = base.frames;
        trajs[i] = run(grid, tensors[i], p, u0, w0, opt);
    });

    for (std::size_t i = 0; i < trajs.size(); ++i) {
        if (trajs[i].report.aborted) {
            out.aborted = true;
            out.note = "member eps = " + std::to_string(eps_list[i]) +
                       " aborted: " + trajs[i].report.abort_reason;
        }
    }
    if (out.aborted) {
        out.pass = false;
        return out;
    }

    for (std::size_t j = 0; j + 1 < trajs.size(); ++j)
        out.distances.push_back(spacetime_lp_distance(grid, trajs[j], trajs[j + 1], metric_p));

    for (std::size_t j = 0; j + 1 < out.distances.size(); ++j)
        if (out.distances[j + 1] > out.distances[j] * (1.0 + 1e-9)) ++out.violations;
    out.pass = out.violations <= 1;

    bool positive = true;
    for (double d : out.distances) positive = positive && d > 0.0;
    if (positive && out.distances.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const std::size_t m = out.distances.size();
        for (std::size_t j = 0; j < m; ++j) {
            const double lx = std::log(eps_list[j]);
            const double ly = std::log(out.distances[j]);
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        const double denom = m * sxx - sx * sx;
        if (std::abs(denom) > 1e-30) {
            out.slope = (m * sxy - sx * sy) / denom;
            out.slope_valid = true;
        }
    }
    return out;
}

struct RefinementStudy {
    std::vector<int> levels;
    std::vector<double> errors; // L1 restriction differences at final time
    double observed_order = 0.0;
    bool roundoff = false; // differences at rounding level; order undefined
    bool pass = false;
    std::string note;
};

namespace detail {

// L1 distance at final time between a coarse run and the next dyadic
// refinement, restricted by 4-cell block averages over the cells whose
// children are all active.
inline double restriction_error(const Grid& gc, const Trajectory& coarse, const Grid& gf,
                                const Trajectory& fine) {
    const std::vector<double>& uc = coarse.frames.back().u;
    const std::vector<double>& uf = fine.frames.back().u;
    double acc = 0.0;
    for (int c : gc.active_cells) {
        const int i = gc.cell_i(c), j = gc.cell_j(c);
        const int ci[4] = {2 * i, 2 * i + 1, 2 * i, 2 * i + 1};
        const int cj[4] = {2 * j, 2 * j, 2 * j + 1, 2 * j + 1};
        double sum = 0.0;
        bool all = true;
        for (int m = 0; m < 4; ++m) {
            if (!gf.is_active(ci[m], cj[m])) {
                all = false;
                break;
            }
            sum += uf[gf.idx(ci[m], cj[m])];
        }
        if (!all) continue;
        acc += std::abs(0.25 * sum - uc[c]);
    }
    return acc * gc.cell_area();
}

} // namespace detail

// Self-convergence over a dyadic level triple: observed order
// log2(e_H / e_{H/2}) from restriction differences at the final time.
inline RefinementStudy refinement_study(const Scenario& base, std::vector<int> levels,
                                        int threads = 1, double min_order = 0.8) {
    if (levels.size() < 3) throw ConfigError("refinement study needs at least three levels");
    std::sort(levels.begin(), levels.end());
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        if (levels[i + 1] != 2 * levels[i])
            throw ConfigError("refinement levels must be dyadic");

    RefinementStudy out;
    out.levels = levels;

    std::vector<std::unique_ptr<Grid>> grids(levels.size());
    std::vector<std::unique_ptr<TensorField>> tensors(levels.size());
    std::vector<Trajectory> trajs(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        Scenario sc = base;
        sc.nx = sc.ny = levels[i];
        grids[i] = std::make_unique<Grid>(build_grid(sc.nx, sc.ny, sc.domain));
        tensors[i] = std::make_unique<TensorField>(make_run_tensor(sc, *grids[i]));
    }
    detail::parallel_over(levels.size(), threads, [&](std::size_t i) {
        const auto u0 = make_field(*grids[i], [&](double x, double y) { return base.u0.eval(x, y); });
        const auto w0 = make_field(*grids[i], [&](double x, double y) { return base.w0.eval(x, y); });
        RunOptions opt;
        opt.frames = base.frames;
        trajs[i] = run(*grids[i], *tensors[i], base.params, u0, w0, opt);
    });

    for (std::size_t i = 0; i < trajs.size(); ++i) {
        if (trajs[i].report.aborted) {
            out.note = "level " + std::to_string(levels[i]) + " aborted: " +
                       trajs[i].report.abort_reason;
            return out;
        }
    }

    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        out.errors.push_back(
            detail::restriction_error(*grids[i], trajs[i], *grids[i + 1], trajs[i + 1]));

    const double e0 = out.errors[out.errors.size() - 2];
    const double e1 = out.errors.back();
    double mass_scale = 0.0;
    for (int c : grids[0]->active_cells) mass_scale += std::abs(trajs[0].frames.back().u[c]);
    mass_scale = std::max(1.0, mass_scale * grids[0]->cell_area());
    if (e1 < 1e-14 * mass_scale) {
        out.roundoff = true;
        out.pass = true;
        out.note = "converged to rounding level";
        return out;
    }
    out.observed_order = std::log2(e0 / e1);
    out.pass = out.observed_order >= min_order;
    return out;
}

struct OdePoint {
    double u = 0.0;
    double w = 0.0;
};

// Reference integrator for the spatially uniform reduction
//   u' = mu u (1 - u^(r_eff - 1)),  w' = -u w,
// classic RK4 with a fixed step count.
inline OdePoint ode_oracle(double u0, double w0, const Params& p, double T, long nsteps = 100000) {
    if (nsteps < 1) throw ConfigError("ode oracle needs a positive step count");
    const double q = p.r_eff() - 1.0;
    auto f = [&](const OdePoint& s) {
        return OdePoint{p.mu * s.u * (1.0 - std::pow(s.u, q)), -s.u * s.w};
    };
    OdePoint s{u0, w0};
    const double h = T / static_cast<double>(nsteps);
    for (long n = 0; n < nsteps; ++n) {
        const OdePoint k1 = f(s);
        const OdePoint k2 = f({s.u + 0.5 * h * k1.u, s.w + 0.5 * h * k1.w});
        const OdePoint k3 = f({s.u + 0.5 * h * k2.u, s.w + 0.5 * h * k2.w});
        const OdePoint k4 = f({s.u + h * k3.u, s.w + h * k3.w});
        s.u += h / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
        s.w += h / 6.0 * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
    }
    return s;
}

// Runs the primal and the transformed integrator from the same initial data
// and reports max_cells |u(T) - a(T) e^(chi w(T))|. Both integrators are
// first order, so the discrepancy shrinks under simultaneous space-time
// refinement.
inline double formulation_crosscheck(const Scenario& base, int level) {
    Scenario sc = base;
    sc.nx = sc.ny = level;
    validate_scenario(sc);
    const Grid grid = build_grid(sc.nx, sc.ny, sc.domain);
    const TensorField D = make_run_tensor(sc, grid);
    const auto u0 = make_field(grid, [&](double x, double y) { return sc.u0.eval(x, y); });
    const auto w0 = make_field(grid, [&](double x, double y) { return sc.w0.eval(x, y); });

    RunOptions opt;
    opt.frames = sc.frames;
    const Trajectory primal = run(grid, D, sc.params, u0, w0, opt);
    const auto a0 = transform(u0, w0, sc.params.chi);
    const Trajectory transformed = run_transformed(grid, D, sc.params, a0, w0, opt);
    if (primal.report.aborted || transformed.report.aborted)
        throw RunAbort("crosscheck member aborted");

    const State& sp = primal.frames.back();
    const State& st = transformed.frames.back();
    const auto u_back = inverse_transform(st.u, st.w, sc.params.chi);
    double disc = 0.0;
    for (int c : grid.active_cells) disc = std::max(disc, std::abs(sp.u[c] - u_back[c]));
    return disc;
}

} // namespace hapfv
