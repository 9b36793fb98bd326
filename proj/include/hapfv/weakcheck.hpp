#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hapfv/dynamics.hpp"
#include "hapfv/grid.hpp"
#include "hapfv/rng.hpp"
#include "hapfv/tensor_field.hpp"

namespace hapfv {

// Space-time test function with closed-form derivatives. Every library
// element vanishes identically (value and derivatives) for t >= t_support_end,
// giving compact support in time; spatial profiles need not vanish on the
// boundary, matching the no-flux weak formulation.
struct TestFunction {
    std::string name;
    std::string smoothness; // "smooth_compact" or "polynomial_window"
    std::function<double(double, double, double)> phi;    // (x, y, t)
    std::function<Vec2(double, double, double)> grad;
    std::function<double(double, double, double)> dphi_dt;
    double t_support_end = 0.0;
};

namespace detail {

struct Window {
    // q(t) and q'(t), both exactly 0 for t >= t_end
    std::function<double(double)> q;
    std::function<double(double)> dq;
    bool smooth = false;
};

inline Window poly_window(double t_end) {
    Window w;
    w.q = [t_end](double t) {
        if (t >= t_end) return 0.0;
        const double z = 1.0 - t / t_end;
        return z * z * z * z;
    };
    w.dq = [t_end](double t) {
        if (t >= t_end) return 0.0;
        const double z = 1.0 - t / t_end;
        return -4.0 * z * z * z / t_end;
    };
    return w;
}

inline Window bump_window(double t_end) {
    Window w;
    w.smooth = true;
    w.q = [t_end](double t) {
        const double tau = t / t_end;
        if (tau >= 1.0 - 1e-8) return 0.0;
        const double z = 1.0 - tau * tau;
        return std::exp(1.0 - 1.0 / z);
    };
    w.dq = [t_end](double t) {
        const double tau = t / t_end;
        if (tau >= 1.0 - 1e-8) return 0.0;
        const double z = 1.0 - tau * tau;
        return std::exp(1.0 - 1.0 / z) * (-2.0 * tau) / (z * z) / t_end;
    };
    return w;
}

struct Profile {
    // p(x) and p'(x) on [lo, hi]
    std::function<double(double)> p;
    std::function<double(double)> dp;
};

inline Profile poly_profile(std::array<double, 4> c, double lo, double hi, bool with_bump) {
    const double scale = 2.0 / (hi - lo);
    Profile pr;
    pr.p = [=](double x) {
        const double xi = scale * (x - lo) - 1.0;
        const double poly = c[0] + xi * (c[1] + xi * (c[2] + xi * c[3]));
        if (!with_bump) return poly;
        if (std::abs(xi) >= 1.0 - 1e-8) return 0.0;
        return poly * std::exp(1.0 - 1.0 / (1.0 - xi * xi));
    };
    pr.dp = [=](double x) {
        const double xi = scale * (x - lo) - 1.0;
        const double poly = c[0] + xi * (c[1] + xi * (c[2] + xi * c[3]));
        const double dpoly = (c[1] + xi * (2.0 * c[2] + xi * 3.0 * c[3])) * scale;
        if (!with_bump) return dpoly;
        if (std::abs(xi) >= 1.0 - 1e-8) return 0.0;
        const double z = 1.0 - xi * xi;
        const double b = std::exp(1.0 - 1.0 / z);
        const double db = b * (-2.0 * xi) / (z * z) * scale;
        return dpoly * b + poly * db;
    };
    return pr;
}

} // namespace detail

// k tensor-product test functions phi = p1(x) p2(y) q(t), deterministic in
// the seed. Element 0 is the space-constant polynomial window, nonzero at
// t = 0. Odd elements vanish with all derivatives at the bounding box;
// even elements are plain polynomials, nonzero on the boundary. Windows
// close at 0.8 T.
inline std::vector<TestFunction> default_library(const Domain& box, double T, int k,
                                                 std::uint64_t seed) {
    if (k < 1) throw ConfigError("test function library needs k >= 1");
    if (!(T > 0.0)) throw ConfigError("test function library needs T > 0");
    const double t_end = 0.8 * T;
    std::vector<TestFunction> lib;

    {
        TestFunction f;
        f.name = "const_poly_window";
        f.smoothness = "polynomial_window";
        f.t_support_end = t_end;
        const detail::Window w = detail::poly_window(t_end);
        f.phi = [w](double, double, double t) { return w.q(t); };
        f.grad = [](double, double, double) { return Vec2{0.0, 0.0}; };
        f.dphi_dt = [w](double, double, double t) { return w.dq(t); };
        lib.push_back(std::move(f));
    }

    SplitMix64 rng(seed);
    for (int i = 1; i < k; ++i) {
        std::array<double, 4> cx{}, cy{};
        for (auto* c : {&cx, &cy}) {
            (*c)[0] = (rng.next() & 1u ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
            for (int d = 1; d < 4; ++d) (*c)[d] = rng.uniform(-1.0, 1.0);
        }
        const bool spatial_bump = (i % 2) == 1;
        const bool time_bump = (i % 3) == 0;
        const detail::Profile px = detail::poly_profile(cx, box.x0, box.x1, spatial_bump);
        const detail::Profile py = detail::poly_profile(cy, box.y0, box.y1, spatial_bump);
        const detail::Window w = time_bump ? detail::bump_window(t_end) : detail::poly_window(t_end);

        TestFunction f;
        f.name = (spatial_bump ? "bump_" : "poly_") + std::string(time_bump ? "tsmooth_" : "tpoly_") +
                 std::to_string(i);
        f.smoothness = spatial_bump && time_bump ? "smooth_compact" : "polynomial_window";
        f.t_support_end = t_end;
        f.phi = [px, py, w](double x, double y, double t) { return px.p(x) * py.p(y) * w.q(t); };
        f.grad = [px, py, w](double x, double y, double t) {
            const double q = w.q(t);
            return Vec2{px.dp(x) * py.p(y) * q, px.p(x) * py.dp(y) * q};
        };
        f.dphi_dt = [px, py, w](double x, double y, double t) {
            return px.p(x) * py.p(y) * w.dq(t);
        };
        lib.push_back(std::move(f));
    }
    return lib;
}

// Which logistic exponent the audit uses: the generating system's r + eps,
// or the target system's r.
enum class AuditSystem { Generating, Target };

struct ResidualReport {
    std::string phi;
    // u-identity terms in order: int int u phi_t, int u0 phi(.,0),
    // -int int grad u . D grad phi, -int int u (div D) . grad phi,
    // +chi int int u grad w . D grad phi, +mu int int u (1 - u^(ar-1)) phi.
    // w-identity terms: int int w phi_t, int w0 phi(.,0), -int int u w phi.
    std::vector<double> terms;
    double signed_residual = 0.0; // sum of terms; 0 for an exact weak solution
    double scale = 0.0;           // max |term|
    double normalized = 0.0;      // |signed| / scale
};

struct WeakCheckResult {
    std::vector<ResidualReport> u_reports;
    std::vector<ResidualReport> w_reports;
    double max_normalized_u = 0.0;
    double max_normalized_w = 0.0;
};

// Residuals of both weak-solution identities over a stored trajectory:
// trapezoid rule in time over the frames, midpoint rule in space with
// cell-centered gradients and analytic test-function derivatives.
inline WeakCheckResult weak_residuals(const Trajectory& traj, const TensorField& D,
                                      const Params& p, const std::vector<TestFunction>& library,
                                      AuditSystem audit = AuditSystem::Generating) {
    if (traj.frames.size() < 2) throw ConfigError("weak residuals need at least two frames");
    const Grid& g = *traj.grid;
    const double area = g.cell_area();
    const double ar = (audit == AuditSystem::Generating ? p.r_eff() : p.r) - 1.0;
    const std::size_t nphi = library.size();
    const std::size_t nk = traj.frames.size();

    // per-phi accumulators
    std::vector<std::array<double, 6>> acc_u(nphi, std::array<double, 6>{});
    std::vector<std::array<double, 3>> acc_w(nphi, std::array<double, 3>{});

    std::vector<Vec2> gu(g.ncells()), gw(g.ncells());
    for (std::size_t k = 0; k < nk; ++k) {
        const State& s = traj.frames[k];
        const double t = s.t;
        const double t_prev = k > 0 ? traj.frames[k - 1].t : t;
        const double t_next = k + 1 < nk ? traj.frames[k + 1].t : t;
        const double tw = 0.5 * (t_next - t_prev);

        for (int c : g.active_cells) {
            gu[c] = cell_gradient(g, s.u, c);
            gw[c] = cell_gradient(g, s.w, c);
        }

        for (std::size_t f = 0; f < nphi; ++f) {
            const TestFunction& tf = library[f];
            const bool in_support = t < tf.t_support_end;
            if (!in_support && k > 0) continue;
            double s_phit = 0.0, s_diff = 0.0, s_div = 0.0, s_taxis = 0.0, s_logi = 0.0;
            double s_wphit = 0.0, s_uwphi = 0.0;
            double s_u0 = 0.0, s_w0 = 0.0;
            for (int c : g.active_cells) {
                const Vec2 pos = g.cell_center(c);
                const double uc = s.u[c], wc = s.w[c];
                if (in_support) {
                    const double phit = tf.dphi_dt(pos.x, pos.y, t);
                    const Vec2 gphi = tf.grad(pos.x, pos.y, t);
                    const double phi = tf.phi(pos.x, pos.y, t);
                    const Vec2 dgphi = D.cell_mat[c].apply(gphi);
                    s_phit += uc * phit;
                    s_diff += gu[c].dot(dgphi);
                    s_div += uc * D.cell_div[c].dot(gphi);
                    s_taxis += uc * gw[c].dot(dgphi);
                    s_logi += uc * (1.0 - detail::pow_fast(uc, ar)) * phi;
                    s_wphit += wc * phit;
                    s_uwphi += uc * wc * phi;
                }
                if (k == 0) {
                    const double phi0 = tf.phi(pos.x, pos.y, 0.0);
                    s_u0 += uc * phi0;
                    s_w0 += wc * phi0;
                }
            }
            auto& au = acc_u[f];
            au[0] += tw * s_phit * area;
            au[2] -= tw * s_diff * area;
            au[3] -= tw * s_div * area;
            au[4] += tw * p.chi * s_taxis * area;
            au[5] += tw * p.mu * s_logi * area;
            auto& aw = acc_w[f];
            aw[0] += tw * s_wphit * area;
            aw[2] -= tw * s_uwphi * area;
            if (k == 0) {
                au[1] = s_u0 * area;
                aw[1] = s_w0 * area;
            }
        }
    }

    WeakCheckResult out;
    for (std::size_t f = 0; f < nphi; ++f) {
        ResidualReport ru;
        ru.phi = library[f].name;
        ru.terms.assign(acc_u[f].begin(), acc_u[f].end());
        for (double v : ru.terms) {
            ru.signed_residual += v;
            ru.scale = std::max(ru.scale, std::abs(v));
        }
        ru.normalized = std::abs(ru.signed_residual) / std::max(ru.scale, 1e-300);
        out.max_normalized_u = std::max(out.max_normalized_u, ru.normalized);
        out.u_reports.push_back(std::move(ru));

        ResidualReport rw;
        rw.phi = library[f].name;
        rw.terms.assign(acc_w[f].begin(), acc_w[f].end());
        for (double v : rw.terms) {
            rw.signed_residual += v;
            rw.scale = std::max(rw.scale, std::abs(v));
        }
        rw.normalized = std::abs(rw.signed_residual) / std::max(rw.scale, 1e-300);
        out.max_normalized_w = std::max(out.max_normalized_w, rw.normalized);
        out.w_reports.push_back(std::move(rw));
    }
    return out;
}

inline ResidualReport residual_u(const Trajectory& traj, const TensorField& D, const Params& p,
                                 const TestFunction& phi, AuditSystem audit = AuditSystem::Generating) {
    return weak_residuals(traj, D, p, {phi}, audit).u_reports.front();
}

inline ResidualReport residual_w(const Trajectory& traj, const TensorField& D, const Params& p,
                                 const TestFunction& phi) {
    return weak_residuals(traj, D, p, {phi}).w_reports.front();
}

} // namespace hapfv
