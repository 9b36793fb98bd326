#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hapfv/errors.hpp"
#include "hapfv/grid.hpp"
#include "hapfv/tensor_field.hpp"

namespace hapfv {

struct Params {
    double chi = 0.5;
    double mu = 1.0;
    double r = 2.0;     // logistic exponent of the target system
    double eps = 0.0;   // regularization level; 0 means the weak-mode system
    double T = 1.0;
    double cfl = 0.9;
    double dt_max = 1e-2;

    // The regularized system runs the logistic with exponent r + eps.
    double r_eff() const { return r + eps; }

    void validate() const {
        if (!(chi >= 0.0)) throw ConfigError("chi must be nonnegative");
        if (!(mu >= 0.0)) throw ConfigError("mu must be nonnegative");
        if (!(r >= 2.0)) throw ConfigError("logistic exponent must satisfy r in [2, inf)");
        if (!(eps >= 0.0 && eps < 1.0)) throw ConfigError("eps must lie in [0, 1)");
        if (!(T >= 0.0)) throw ConfigError("final time must be nonnegative");
        if (!(cfl > 0.0 && cfl <= 1.0)) throw ConfigError("cfl must lie in (0, 1]");
        if (!(dt_max > 0.0)) throw ConfigError("dt_max must be positive");
    }
};

struct State {
    double t = 0.0;
    std::vector<double> u;
    std::vector<double> w;
};

struct RunReport {
    bool aborted = false;
    std::string abort_reason;
    long steps = 0;
    long clip_count = 0; // positivity clips; must be 0 in a passing run
    double min_dt = std::numeric_limits<double>::infinity();
    double max_dt = 0.0;
    double max_mass_residual = 0.0; // per-step mass identity, relative
    double wall_time_s = 0.0;
};

struct Trajectory {
    const Grid* grid = nullptr;
    std::vector<State> frames;
    RunReport report;
};

namespace detail {

inline double pow_fast(double base, double e) {
    if (e == 1.0) return base;
    if (e == 2.0) return base * base;
    return std::pow(base, e);
}

} // namespace detail

struct RateResult {
    double logistic_integral = 0.0; // int mu u (1 - u^(r_eff - 1))
};

// Explicit finite-volume rate for
//   u_t = div(D grad u + u div D - chi u D grad w) + mu u (1 - u^(r_eff-1)).
// Diffusive face flux from the two-point-plus-tangential face gradient; the
// drift u (div D - chi D grad w) is donor-cell upwinded: the donor is the
// cell the mass leaves, which keeps u nonnegative under the CFL bound.
// Boundary faces carry zero total flux (the no-flux condition).
inline RateResult assemble_rates(const Grid& g, const TensorField& D, const Params& p,
                                 std::span<const double> u, std::span<const double> w,
                                 std::span<double> rate) {
    std::fill(rate.begin(), rate.end(), 0.0);
    const double q = p.r_eff() - 1.0;

    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const Face& f = g.faces[k];
        const double inv_hn = 1.0 / g.spacing(f.axis);
        const Vec2 gu = face_gradient(g, u, f);
        const Vec2 gw = face_gradient(g, w, f);
        const SymMat2& Df = D.face_mat[k];
        const Vec2 diff = Df.apply(gu);
        const Vec2 v = D.face_div[k] - p.chi * Df.apply(gw);
        const double vn = v[f.axis];
        // flux normal component moves mass from c1 to c0 when positive
        const double donor = vn > 0.0 ? u[f.c1] : u[f.c0];
        const double fn = diff[f.axis] + donor * vn;
        rate[f.c0] += fn * inv_hn;
        rate[f.c1] -= fn * inv_hn;
    }

    double logistic_sum = 0.0;
    for (int c : g.active_cells) {
        const double uc = u[c];
        const double src = p.mu * uc * (1.0 - detail::pow_fast(uc, q));
        rate[c] += src;
        logistic_sum += src;
    }

    for (int c : g.active_cells) {
        if (!std::isfinite(rate[c]))
            throw RunAbort("non-finite rate at cell (" + std::to_string(g.cell_i(c)) + ", " +
                           std::to_string(g.cell_j(c)) + ") with u = " + std::to_string(u[c]) +
                           ", w = " + std::to_string(w[c]));
    }
    return {logistic_sum * g.cell_area()};
}

// Exact solution of w_t = -u w over one step with u frozen.
inline void step_w_exact(const Grid& g, std::span<const double> u, std::span<double> w, double dt) {
    for (int c : g.active_cells) w[c] *= std::exp(-u[c] * dt);
}

struct CflBreakdown {
    double diffusion = std::numeric_limits<double>::infinity();
    double drift = std::numeric_limits<double>::infinity();
    double reaction = std::numeric_limits<double>::infinity();
    double dt = 0.0;
};

// Static part of the CFL bound: min over faces of h^2 / (4 lambda_max(D_f)).
inline double diffusion_time_bound(const Grid& g, const TensorField& D) {
    const double h = std::min(g.hx, g.hy);
    double bound = std::numeric_limits<double>::infinity();
    for (const SymMat2& m : D.face_mat) {
        const double lam = m.eig_max();
        if (lam > 0.0) bound = std::min(bound, h * h / (4.0 * lam));
    }
    return bound;
}

inline constexpr double kCflTiny = 1e-30;

// dt = min(cfl * min(diffusion, drift, reaction), dt_max).
inline CflBreakdown cfl_dt(const Grid& g, const TensorField& D, const Params& p,
                           std::span<const double> u, std::span<const double> w,
                           double cached_diffusion_bound = -1.0) {
    CflBreakdown out;
    out.diffusion = cached_diffusion_bound >= 0.0 ? cached_diffusion_bound
                                                  : diffusion_time_bound(g, D);
    const double h = std::min(g.hx, g.hy);
    double vmax = 0.0;
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const Face& f = g.faces[k];
        const Vec2 gw = face_gradient(g, w, f);
        const Vec2 v = D.face_div[k] - p.chi * D.face_mat[k].apply(gw);
        vmax = std::max(vmax, v.norm());
    }
    out.drift = h / (vmax + kCflTiny);

    double umax = 0.0;
    for (int c : g.active_cells) umax = std::max(umax, u[c]);
    out.reaction = 1.0 / (p.mu * p.r_eff() * detail::pow_fast(umax, p.r_eff() - 1.0) + kCflTiny);

    out.dt = std::min(p.cfl * std::min({out.diffusion, out.drift, out.reaction}), p.dt_max);
    return out;
}

struct StepStats {
    double dt = 0.0;
    int clips = 0;
    double mass_residual = 0.0;
};

// One Lie-split step: explicit Euler for u, then the exact exponential for w
// using the updated u. Records the positivity clip count and the defect of
// the discrete mass identity
//   int u_new - int u_old = dt * int mu u_old (1 - u_old^(r_eff-1)),
// which holds to rounding because interior fluxes cancel in pairs.
inline StepStats step(const Grid& g, const TensorField& D, const Params& p, State& s, double dt,
                      std::vector<double>* workspace = nullptr) {
    std::vector<double> local;
    std::vector<double>& rate = workspace ? *workspace : local;
    rate.assign(g.ncells(), 0.0);

    const RateResult rr = assemble_rates(g, D, p, s.u, s.w, rate);

    double mass_old = 0.0, mass_new = 0.0;
    StepStats st;
    st.dt = dt;
    for (int c : g.active_cells) {
        mass_old += s.u[c];
        double un = s.u[c] + dt * rate[c];
        if (un < 0.0) {
            un = 0.0;
            ++st.clips;
        }
        s.u[c] = un;
        mass_new += un;
    }
    mass_old *= g.cell_area();
    mass_new *= g.cell_area();
    st.mass_residual =
        std::abs(mass_new - mass_old - dt * rr.logistic_integral) / std::max(1.0, std::abs(mass_old));

    step_w_exact(g, s.u, s.w, dt);
    s.t += dt;
    return st;
}

struct RunOptions {
    int frames = 100; // number of equal output intervals over [0, T]
    std::vector<double> output_times; // overrides frames when nonempty
    std::function<void(const State&, const Grid&)> monitor; // called at every stored frame
};

namespace detail {

inline std::vector<double> resolve_output_times(const Params& p, const RunOptions& opt) {
    if (p.T == 0.0) return {0.0};
    std::vector<double> ts;
    if (!opt.output_times.empty()) {
        ts = opt.output_times;
        std::sort(ts.begin(), ts.end());
        if (ts.front() < 0.0 || ts.back() > p.T * (1.0 + 1e-12))
            throw ConfigError("output times must lie in [0, T]");
        if (ts.front() > 0.0) ts.insert(ts.begin(), 0.0);
        const double tol = 1e-12 * std::max(1.0, p.T);
        ts.erase(std::unique(ts.begin(), ts.end(),
                             [tol](double a, double b) { return std::abs(a - b) <= tol; }),
                 ts.end());
        return ts;
    }
    if (opt.frames < 1) throw ConfigError("output frame count must be positive");
    ts.resize(opt.frames + 1);
    for (int k = 0; k <= opt.frames; ++k) ts[k] = p.T * k / opt.frames;
    return ts;
}

inline void check_initial_data(const Grid& g, std::span<const double> u0,
                               std::span<const double> w0) {
    if (u0.size() != g.ncells() || w0.size() != g.ncells())
        throw ConfigError("initial data size does not match the grid");
    for (int c : g.active_cells) {
        if (!(u0[c] >= 0.0) || !std::isfinite(u0[c]))
            throw ConfigError("initial u must be finite and nonnegative");
        if (!(w0[c] >= 0.0) || !std::isfinite(w0[c]))
            throw ConfigError("initial w must be finite and nonnegative");
    }
}

} // namespace detail

// Advance from t = 0 to t = T, storing snapshots at the output times (hit
// exactly by clipping dt). On abort the partial trajectory is returned with
// the reason in the report.
inline Trajectory run(const Grid& g, const TensorField& D, const Params& p,
                      std::vector<double> u0, std::vector<double> w0, const RunOptions& opt = {}) {
    p.validate();
    detail::check_initial_data(g, u0, w0);
    const std::vector<double> times = detail::resolve_output_times(p, opt);

    Trajectory traj;
    traj.grid = &g;
    State s;
    s.t = 0.0;
    s.u = std::move(u0);
    s.w = std::move(w0);

    const auto t_start = std::chrono::steady_clock::now();
    auto snapshot = [&](const State& st) {
        traj.frames.push_back(st);
        if (opt.monitor) opt.monitor(st, g);
    };
    snapshot(s);

    const double diff_bound = diffusion_time_bound(g, D);
    const double t_tol = 1e-12 * std::max(1.0, p.T);
    std::vector<double> workspace;

    try {
        for (std::size_t next = 1; next < times.size(); ++next) {
            const double t_target = times[next];
            while (s.t < t_target - t_tol) {
                const CflBreakdown cb = cfl_dt(g, D, p, s.u, s.w, diff_bound);
                if (!(cb.dt > 1e-12))
                    throw RunAbort("dt underflow: cfl dt = " + std::to_string(cb.dt) + " at t = " +
                                   std::to_string(s.t));
                const double dt = std::min(cb.dt, t_target - s.t);
                const StepStats st = step(g, D, p, s, dt, &workspace);
                ++traj.report.steps;
                traj.report.clip_count += st.clips;
                traj.report.min_dt = std::min(traj.report.min_dt, st.dt);
                traj.report.max_dt = std::max(traj.report.max_dt, st.dt);
                traj.report.max_mass_residual =
                    std::max(traj.report.max_mass_residual, st.mass_residual);
            }
            s.t = t_target;
            snapshot(s);
        }
    } catch (const RunAbort& e) {
        traj.report.aborted = true;
        traj.report.abort_reason = e.what();
    }
    traj.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return traj;
}

// a = u exp(-chi w), the standard substitution that absorbs the taxis term.
inline std::vector<double> transform(std::span<const double> u, std::span<const double> w,
                                     double chi) {
    std::vector<double> a(u.size());
    for (std::size_t c = 0; c < u.size(); ++c) a[c] = u[c] * std::exp(-chi * w[c]);
    return a;
}

inline std::vector<double> inverse_transform(std::span<const double> a, std::span<const double> w,
                                             double chi) {
    std::vector<double> u(a.size());
    for (std::size_t c = 0; c < a.size(); ++c) u[c] = a[c] * std::exp(chi * w[c]);
    return u;
}

// Rate for the transformed variable:
//   a_t = e^(-chi w) div(e^(chi w) (D grad a + a div D))
//         + mu a (1 - (a e^(chi w))^(r_eff-1)) + chi a^2 w e^(chi w).
// The face factor e^(chi w) is the arithmetic average of the cell factors.
// With w identically 0 or chi = 0 this reproduces assemble_rates exactly.
inline RateResult assemble_rates_transformed(const Grid& g, const TensorField& D, const Params& p,
                                             std::span<const double> a, std::span<const double> w,
                                             std::span<double> rate,
                                             std::vector<double>& expw_scratch) {
    std::fill(rate.begin(), rate.end(), 0.0);
    expw_scratch.assign(g.ncells(), 1.0);
    for (int c : g.active_cells) expw_scratch[c] = std::exp(p.chi * w[c]);
    const double q = p.r_eff() - 1.0;

    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const Face& f = g.faces[k];
        const double inv_hn = 1.0 / g.spacing(f.axis);
        const Vec2 ga = face_gradient(g, a, f);
        const Vec2 diff = D.face_mat[k].apply(ga);
        const double vn = D.face_div[k][f.axis];
        const double donor = vn > 0.0 ? a[f.c1] : a[f.c0];
        const double ef = 0.5 * (expw_scratch[f.c0] + expw_scratch[f.c1]);
        const double fn = ef * (diff[f.axis] + donor * vn);
        rate[f.c0] += fn * inv_hn;
        rate[f.c1] -= fn * inv_hn;
    }

    double logistic_sum = 0.0;
    for (int c : g.active_cells) {
        const double ac = a[c];
        const double ec = expw_scratch[c];
        rate[c] /= ec;
        const double src = p.mu * ac * (1.0 - detail::pow_fast(ac * ec, q));
        rate[c] += src + p.chi * ac * ac * w[c] * ec;
        logistic_sum += src;
    }

    for (int c : g.active_cells) {
        if (!std::isfinite(rate[c]))
            throw RunAbort("non-finite transformed rate at cell (" + std::to_string(g.cell_i(c)) +
                           ", " + std::to_string(g.cell_j(c)) + ")");
    }
    return {logistic_sum * g.cell_area()};
}

// Conservative CFL for the transformed system: the face factor inflates the
// effective diffusion and drift by at most max(e^(chi w)) / min(e^(chi w)).
inline CflBreakdown cfl_dt_transformed(const Grid& g, const TensorField& D, const Params& p,
                                       std::span<const double> a, std::span<const double> w,
                                       double cached_diffusion_bound = -1.0) {
    CflBreakdown out;
    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    double amax = 0.0;
    for (int c : g.active_cells) {
        wmin = std::min(wmin, w[c]);
        wmax = std::max(wmax, w[c]);
        amax = std::max(amax, a[c]);
    }
    const double factor = std::exp(p.chi * (wmax - wmin));
    const double base = cached_diffusion_bound >= 0.0 ? cached_diffusion_bound
                                                      : diffusion_time_bound(g, D);
    out.diffusion = base / factor;

    const double h = std::min(g.hx, g.hy);
    double vmax = 0.0;
    for (const Vec2& dv : D.face_div) vmax = std::max(vmax, dv.norm());
    out.drift = h / (vmax * factor + kCflTiny);

    const double emax = std::exp(p.chi * wmax);
    const double umax_eff = amax * emax;
    const double lip = p.mu * p.r_eff() * detail::pow_fast(umax_eff, p.r_eff() - 1.0) +
                       2.0 * p.chi * amax * wmax * emax;
    out.reaction = 1.0 / (lip + kCflTiny);

    out.dt = std::min(p.cfl * std::min({out.diffusion, out.drift, out.reaction}), p.dt_max);
    return out;
}

// Companion integrator in the transformed variable; frames hold (a, w).
// The w substep freezes u = a e^(chi w) with the updated a.
inline Trajectory run_transformed(const Grid& g, const TensorField& D, const Params& p,
                                  std::vector<double> a0, std::vector<double> w0,
                                  const RunOptions& opt = {}) {
    p.validate();
    detail::check_initial_data(g, a0, w0);
    const std::vector<double> times = detail::resolve_output_times(p, opt);

    Trajectory traj;
    traj.grid = &g;
    State s;
    s.u = std::move(a0);
    s.w = std::move(w0);

    const auto t_start = std::chrono::steady_clock::now();
    auto snapshot = [&](const State& st) {
        traj.frames.push_back(st);
        if (opt.monitor) opt.monitor(st, g);
    };
    snapshot(s);

    const double diff_bound = diffusion_time_bound(g, D);
    const double t_tol = 1e-12 * std::max(1.0, p.T);
    std::vector<double> rate, expw, ueff;

    try {
        for (std::size_t next = 1; next < times.size(); ++next) {
            const double t_target = times[next];
            while (s.t < t_target - t_tol) {
                const CflBreakdown cb = cfl_dt_transformed(g, D, p, s.u, s.w, diff_bound);
                if (!(cb.dt > 1e-12))
                    throw RunAbort("dt underflow in transformed run at t = " + std::to_string(s.t));
                const double dt = std::min(cb.dt, t_target - s.t);

                rate.assign(g.ncells(), 0.0);
                assemble_rates_transformed(g, D, p, s.u, s.w, rate, expw);
                for (int c : g.active_cells) {
                    double an = s.u[c] + dt * rate[c];
                    if (an < 0.0) {
                        an = 0.0;
                        ++traj.report.clip_count;
                    }
                    s.u[c] = an;
                }
                ueff.assign(g.ncells(), 0.0);
                for (int c : g.active_cells) ueff[c] = s.u[c] * expw[c];
                step_w_exact(g, ueff, s.w, dt);
                s.t += dt;
                ++traj.report.steps;
                traj.report.min_dt = std::min(traj.report.min_dt, dt);
                traj.report.max_dt = std::max(traj.report.max_dt, dt);
            }
            s.t = t_target;
            snapshot(s);
        }
    } catch (const RunAbort& e) {
        traj.report.aborted = true;
        traj.report.abort_reason = e.what();
    }
    traj.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return traj;
}

} // namespace hapfv
