#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hapfv/dynamics.hpp"
#include "hapfv/grid.hpp"
#include "hapfv/tensor_field.hpp"

namespace hapfv {

// Cells with a smaller density are excluded from quotients and counted.
inline constexpr double kDensityFloor = 1e-12;

struct EnergySample {
    double t = 0.0;
    double mass = 0.0;
    double w_max = 0.0;
    double u_min = 0.0;
    double u_max = 0.0;
    double e1 = 0.0;        // int u ln u, with 0 ln 0 := 0
    double e2 = 0.0;        // int (grad w . D grad w) / w
    double dsp1_rate = 0.0; // int (grad u . D grad u) / u
    double dsp2_rate = 0.0; // int u^(r_eff) ln u
    double dsp1 = 0.0;      // running time integral of dsp1_rate
    double dsp2 = 0.0;      // running time integral of dsp2_rate
    double q1 = 0.0;        // int u^(-1/2) |div D . grad u|
    double q2 = 0.0;        // int u^(-3/2) (grad u . D grad u)
    double gradw4_integral = 0.0; // int |grad w|^4
    double gradw4_norm = 0.0;     // its fourth root
    int excluded_w = 0;
    int excluded_u = 0;
};

namespace detail {

// Per-cell average of the face quadratic forms grad f . D_f grad f over the
// faces touching each cell. This is the gradient quadrature used for every
// energy-type quotient.
inline std::vector<double> face_quad_cell_average(const Grid& g, const TensorField& D,
                                                  std::span<const double> field) {
    std::vector<double> sum(g.ncells(), 0.0);
    std::vector<int> cnt(g.ncells(), 0);
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const Face& f = g.faces[k];
        const Vec2 grad = face_gradient(g, field, f);
        const double q = D.face_mat[k].quad(grad);
        sum[f.c0] += q;
        ++cnt[f.c0];
        sum[f.c1] += q;
        ++cnt[f.c1];
    }
    for (int c : g.active_cells)
        if (cnt[c] > 0) sum[c] /= cnt[c];
    return sum;
}

inline double xlogx(double z) { return z > 0.0 ? z * std::log(z) : 0.0; }

} // namespace detail

struct GradW4 {
    double integral = 0.0;
    double norm = 0.0;
};

// Spatial L^4 norm of the reconstructed cell-centered gradient of w.
inline GradW4 gradw_l4(const Grid& g, std::span<const double> w) {
    double acc = 0.0;
    for (int c : g.active_cells) {
        const Vec2 grad = cell_gradient(g, w, c);
        const double n2 = grad.dot(grad);
        acc += n2 * n2;
    }
    GradW4 out;
    out.integral = acc * g.cell_area();
    out.norm = std::pow(out.integral, 0.25);
    return out;
}

struct AuxiliaryQ {
    double q1 = 0.0;
    double q2 = 0.0;
    int excluded = 0;
};

// Q1 = int u^(-1/2) |div D . grad u| (cell-centered gradient against the
// cell divergence) and Q2 = int u^(-3/2) (grad u . D grad u) (face-term
// average). Cells below the density floor are excluded and counted.
inline AuxiliaryQ auxiliary_q(const Grid& g, const TensorField& D, std::span<const double> u) {
    AuxiliaryQ out;
    const std::vector<double> quad_u = detail::face_quad_cell_average(g, D, u);
    double s1 = 0.0, s2 = 0.0;
    for (int c : g.active_cells) {
        if (u[c] <= kDensityFloor) {
            ++out.excluded;
            continue;
        }
        const Vec2 grad = cell_gradient(g, u, c);
        s1 += std::abs(D.cell_div[c].dot(grad)) / std::sqrt(u[c]);
        s2 += quad_u[c] / (u[c] * std::sqrt(u[c]));
    }
    out.q1 = s1 * g.cell_area();
    out.q2 = s2 * g.cell_area();
    return out;
}

// Instantaneous energy-type monitors; the running integrals dsp1/dsp2 are
// accumulated by the monitor across frames.
inline EnergySample energy(const Grid& g, const TensorField& D, const Params& p, const State& s) {
    EnergySample e;
    e.t = s.t;
    e.u_min = std::numeric_limits<double>::infinity();

    const std::vector<double> quad_w = detail::face_quad_cell_average(g, D, s.w);
    const std::vector<double> quad_u = detail::face_quad_cell_average(g, D, s.u);
    const double r_eff = p.r_eff();

    double mass = 0.0, e1 = 0.0, e2 = 0.0, d1 = 0.0, d2 = 0.0;
    for (int c : g.active_cells) {
        const double uc = s.u[c], wc = s.w[c];
        mass += uc;
        e.w_max = std::max(e.w_max, wc);
        e.u_min = std::min(e.u_min, uc);
        e.u_max = std::max(e.u_max, uc);
        e1 += detail::xlogx(uc);
        if (uc > 0.0) d2 += std::pow(uc, r_eff) * std::log(uc);
        if (wc > kDensityFloor) e2 += quad_w[c] / wc; else ++e.excluded_w;
        if (uc > kDensityFloor) d1 += quad_u[c] / uc; else ++e.excluded_u;
    }
    const double area = g.cell_area();
    e.mass = mass * area;
    e.e1 = e1 * area;
    e.e2 = e2 * area;
    e.dsp1_rate = d1 * area;
    e.dsp2_rate = d2 * area;

    const AuxiliaryQ q = auxiliary_q(g, D, s.u);
    e.q1 = q.q1;
    e.q2 = q.q2;
    const GradW4 gw = gradw_l4(g, s.w);
    e.gradw4_integral = gw.integral;
    e.gradw4_norm = gw.norm;
    return e;
}

struct MoserLadder {
    std::vector<double> p;      // exponents 2^i
    std::vector<double> J;      // (int a^(2^i))^(2^-i)
    bool finite = true;
};

// Transformed-variable norms J_i = ||a||_{L^{2^i}}^... evaluated with the
// max-normalized sum, so large amplitudes saturate to max(a) * area^(1/p)
// instead of overflowing. Capped at p = 64.
inline MoserLadder moser_ladder(const Grid& g, const Params& p, const State& s, int i_max = 6) {
    if (i_max < 0 || i_max > 6) throw ConfigError("moser ladder index must lie in [0, 6]");
    MoserLadder out;
    const std::vector<double> a = transform(s.u, s.w, p.chi);
    double amax = 0.0;
    for (int c : g.active_cells) {
        if (!std::isfinite(a[c])) out.finite = false;
        amax = std::max(amax, a[c]);
    }
    for (int i = 0; i <= i_max; ++i) {
        const double pw = std::pow(2.0, i);
        out.p.push_back(pw);
        if (amax == 0.0) {
            out.J.push_back(0.0);
            continue;
        }
        double sum = 0.0;
        for (int c : g.active_cells) sum += std::pow(a[c] / amax, pw);
        out.J.push_back(amax * std::pow(sum * g.cell_area(), 1.0 / pw));
    }
    return out;
}

// Output-time monitor: evaluates the energy sample at every stored frame and
// accumulates the dissipation integrals by the trapezoid rule.
class DiagnosticsMonitor {
  public:
    DiagnosticsMonitor(const TensorField& D, const Params& p) : D_(&D), p_(p) {}

    void operator()(const State& s, const Grid& g) {
        EnergySample e = energy(g, *D_, p_, s);
        if (!series_.empty()) {
            const EnergySample& prev = series_.back();
            const double half = 0.5 * (e.t - prev.t);
            e.dsp1 = prev.dsp1 + half * (prev.dsp1_rate + e.dsp1_rate);
            e.dsp2 = prev.dsp2 + half * (prev.dsp2_rate + e.dsp2_rate);
        }
        series_.push_back(e);
    }

    const std::vector<EnergySample>& series() const { return series_; }

  private:
    const TensorField* D_;
    Params p_;
    std::vector<EnergySample> series_;
};

struct DiagnosticsVerdict {
    bool pass = true;
    double mass_margin_min = std::numeric_limits<double>::infinity();
    std::vector<std::string> failures;
};

// Checks every frame of a finished run against the bounds the solution must
// satisfy: the mass growth bound, the w maximum principle (exact, cellwise),
// nonnegativity, finiteness of all monitors, and a zero positivity-clip
// count. Returns the failure list; empty means pass.
inline DiagnosticsVerdict verdicts(const Trajectory& traj, const std::vector<EnergySample>& series,
                                   const Params& p) {
    DiagnosticsVerdict v;
    const Grid& g = *traj.grid;
    const double area = static_cast<double>(g.active_cells.size()) * g.cell_area();
    auto fail = [&v](const std::string& msg) {
        v.pass = false;
        v.failures.push_back(msg);
    };

    if (traj.report.aborted) fail("run aborted: " + traj.report.abort_reason);
    if (traj.report.clip_count != 0)
        fail("positivity clips occurred: " + std::to_string(traj.report.clip_count));

    if (series.size() != traj.frames.size())
        fail("diagnostics series does not cover every frame");

    const double mass0 = series.empty() ? 0.0 : series.front().mass;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const EnergySample& e = series[k];
        const double bound = mass0 + p.mu * area * e.t;
        const double margin = bound + 1e-10 - e.mass;
        v.mass_margin_min = std::min(v.mass_margin_min, margin);
        if (margin < 0.0)
            fail("mass bound violated at t = " + std::to_string(e.t) + " by " +
                 std::to_string(-margin));
        if (!(std::isfinite(e.e1) && std::isfinite(e.e2) && std::isfinite(e.dsp1) &&
              std::isfinite(e.dsp2) && std::isfinite(e.mass) && std::isfinite(e.q1) &&
              std::isfinite(e.q2) && std::isfinite(e.gradw4_norm)))
            fail("non-finite diagnostic at t = " + std::to_string(e.t));
        if (k > 0 && e.w_max > series[k - 1].w_max)
            fail("max of w increased at t = " + std::to_string(e.t));
    }

    for (std::size_t k = 0; k < traj.frames.size(); ++k) {
        const State& s = traj.frames[k];
        for (int c : g.active_cells) {
            if (s.u[c] < 0.0) {
                fail("negative u at frame " + std::to_string(k));
                break;
            }
            if (s.w[c] < 0.0) {
                fail("negative w at frame " + std::to_string(k));
                break;
            }
            if (k > 0 && s.w[c] > traj.frames[k - 1].w[c]) {
                fail("w increased cellwise at frame " + std::to_string(k));
                break;
            }
        }
    }
    return v;
}

} // namespace hapfv
