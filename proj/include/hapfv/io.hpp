#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hapfv/diagnostics.hpp"
#include "hapfv/dynamics.hpp"
#include "hapfv/studies.hpp"
#include "hapfv/tensor_field.hpp"
#include "hapfv/weakcheck.hpp"

namespace hapfv {

// All numeric output goes through one shortest-round-trip format so that
// identical runs produce byte-identical files.
inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open for writing: " + path.string());
    return f;
}

inline std::string frame_name(std::size_t k, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04zu.%s", k, ext);
    return buf;
}

} // namespace detail

inline void write_state_csv(const std::filesystem::path& path, const Grid& g, const State& s) {
    std::ofstream f = detail::open_out(path);
    f << "x,y,u,w\n";
    for (int c : g.active_cells) {
        const Vec2 p = g.cell_center(c);
        f << fmt_g(p.x) << ',' << fmt_g(p.y) << ',' << fmt_g(s.u[c]) << ',' << fmt_g(s.w[c])
          << '\n';
    }
}

// Legacy-VTK structured points; cell data over the full bounding grid with
// inactive cells written as 0.
inline void write_state_vtk(const std::filesystem::path& path, const Grid& g, const State& s) {
    std::ofstream f = detail::open_out(path);
    f << "# vtk DataFile Version 3.0\n";
    f << "finite volume state at t = " << fmt_g(s.t) << '\n';
    f << "ASCII\nDATASET STRUCTURED_POINTS\n";
    f << "DIMENSIONS " << g.nx + 1 << ' ' << g.ny + 1 << " 1\n";
    f << "ORIGIN " << fmt_g(g.x0) << ' ' << fmt_g(g.y0) << " 0\n";
    f << "SPACING " << fmt_g(g.hx) << ' ' << fmt_g(g.hy) << " 1\n";
    f << "CELL_DATA " << g.nx * g.ny << '\n';
    for (const char* name : {"u", "w"}) {
        const std::vector<double>& v = name[0] == 'u' ? s.u : s.w;
        f << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (std::size_t c = 0; c < g.ncells(); ++c)
            f << fmt_g(g.active[c] ? v[c] : 0.0) << '\n';
    }
}

// Frame CSVs + VTK files + a times.csv index mapping frame number to time.
inline void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
    std::filesystem::create_directories(dir);
    std::ofstream times = detail::open_out(dir / "times.csv");
    times << "frame,t\n";
    for (std::size_t k = 0; k < traj.frames.size(); ++k) {
        times << k << ',' << fmt_g(traj.frames[k].t) << '\n';
        write_state_csv(dir / detail::frame_name(k, "csv"), *traj.grid, traj.frames[k]);
        write_state_vtk(dir / detail::frame_name(k, "vtk"), *traj.grid, traj.frames[k]);
    }
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(',', pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

inline double parse_num(const std::string& tok, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (...) {
        throw ConfigError("malformed number '" + tok + "' in " + context);
    }
}

} // namespace detail

// Reads one frame CSV back against a known grid; row order and coordinates
// must match the grid's active cells.
inline State read_state_csv(const std::filesystem::path& path, const Grid& g) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open trajectory frame: " + path.string());
    std::string line;
    if (!std::getline(f, line) || line.rfind("x,y,u,w", 0) != 0)
        throw ConfigError("missing x,y,u,w header in " + path.string());
    State s;
    s.u.assign(g.ncells(), 0.0);
    s.w.assign(g.ncells(), 0.0);
    const double tol = 0.25 * std::min(g.hx, g.hy);
    std::size_t row = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (row >= g.active_cells.size())
            throw ConfigError("too many rows in " + path.string());
        const auto toks = detail::split_csv_line(line);
        if (toks.size() != 4) throw ConfigError("expected 4 columns in " + path.string());
        const int c = g.active_cells[row];
        const Vec2 p = g.cell_center(c);
        const double x = detail::parse_num(toks[0], path.string());
        const double y = detail::parse_num(toks[1], path.string());
        if (std::abs(x - p.x) > tol || std::abs(y - p.y) > tol)
            throw ConfigError("row " + std::to_string(row) + " does not match the grid in " +
                              path.string());
        s.u[c] = detail::parse_num(toks[2], path.string());
        s.w[c] = detail::parse_num(toks[3], path.string());
        ++row;
    }
    if (row != g.active_cells.size())
        throw ConfigError("missing rows in " + path.string());
    return s;
}

inline Trajectory load_trajectory(const std::filesystem::path& dir, const Grid& g) {
    std::ifstream times(dir / "times.csv");
    if (!times) throw ConfigError("cannot open " + (dir / "times.csv").string());
    std::string line;
    if (!std::getline(times, line) || line.rfind("frame,t", 0) != 0)
        throw ConfigError("missing frame,t header in " + (dir / "times.csv").string());
    Trajectory traj;
    traj.grid = &g;
    std::size_t expect = 0;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(times, line)) {
        if (line.empty()) continue;
        const auto toks = detail::split_csv_line(line);
        if (toks.size() != 2) throw ConfigError("expected 2 columns in times.csv");
        const std::size_t k =
            static_cast<std::size_t>(detail::parse_num(toks[0], "times.csv"));
        if (k != expect) throw ConfigError("nonconsecutive frame numbers in times.csv");
        const double t = detail::parse_num(toks[1], "times.csv");
        if (!(t >= prev_t)) throw ConfigError("times.csv is not nondecreasing");
        prev_t = t;
        State s = read_state_csv(dir / detail::frame_name(k, "csv"), g);
        s.t = t;
        traj.frames.push_back(std::move(s));
        ++expect;
    }
    if (traj.frames.empty()) throw ConfigError("times.csv lists no frames");
    return traj;
}

inline void write_diagnostics_csv(const std::filesystem::path& path,
                                  const std::vector<EnergySample>& series) {
    std::ofstream f = detail::open_out(path);
    f << "t,mass,w_max,u_min,u_max,e1,e2,dsp1_rate,dsp2_rate,dsp1,dsp2,"
         "q1,q2,gradw4_integral,gradw4_norm,excluded_w,excluded_u\n";
    for (const EnergySample& s : series)
        f << fmt_g(s.t) << ',' << fmt_g(s.mass) << ',' << fmt_g(s.w_max) << ','
          << fmt_g(s.u_min) << ',' << fmt_g(s.u_max) << ',' << fmt_g(s.e1) << ','
          << fmt_g(s.e2) << ',' << fmt_g(s.dsp1_rate) << ',' << fmt_g(s.dsp2_rate) << ','
          << fmt_g(s.dsp1) << ',' << fmt_g(s.dsp2) << ',' << fmt_g(s.q1) << ','
          << fmt_g(s.q2) << ',' << fmt_g(s.gradw4_integral) << ',' << fmt_g(s.gradw4_norm)
          << ',' << s.excluded_w << ',' << s.excluded_u << '\n';
}

// One row per test function: normalized residuals of both identities
// followed by the raw signed terms (six u-terms, three w-terms).
inline void write_residuals_csv(const std::filesystem::path& path, const WeakCheckResult& res,
                                int refinement) {
    std::ofstream f = detail::open_out(path);
    f << "phi_id,refinement,residual_u,residual_w,signed_u,signed_w";
    for (int i = 1; i <= 6; ++i) f << ",u_term" << i;
    for (int i = 1; i <= 3; ++i) f << ",w_term" << i;
    f << '\n';
    for (std::size_t k = 0; k < res.u_reports.size(); ++k) {
        const ResidualReport& ru = res.u_reports[k];
        const ResidualReport& rw = res.w_reports[k];
        f << ru.phi << ',' << refinement << ',' << fmt_g(ru.normalized) << ','
          << fmt_g(rw.normalized) << ',' << fmt_g(ru.signed_residual) << ','
          << fmt_g(rw.signed_residual);
        for (double t : ru.terms) f << ',' << fmt_g(t);
        for (double t : rw.terms) f << ',' << fmt_g(t);
        f << '\n';
    }
}

inline void write_epsilon_csv(const std::filesystem::path& path, const EpsilonStudy& st) {
    std::ofstream f = detail::open_out(path);
    f << "# metric_p=" << fmt_g(st.metric_p) << " violations=" << st.violations
      << " pass=" << (st.pass ? 1 : 0);
    if (st.slope_valid) f << " slope=" << fmt_g(st.slope);
    if (st.aborted) f << " aborted=1";
    f << '\n';
    f << "j,eps,eps_next,distance\n";
    for (std::size_t j = 0; j < st.distances.size(); ++j)
        f << j << ',' << fmt_g(st.eps[j]) << ',' << fmt_g(st.eps[j + 1]) << ','
          << fmt_g(st.distances[j]) << '\n';
}

inline void write_refinement_csv(const std::filesystem::path& path, const RefinementStudy& st) {
    std::ofstream f = detail::open_out(path);
    f << "# observed_order=" << fmt_g(st.observed_order) << " roundoff=" << (st.roundoff ? 1 : 0)
      << " pass=" << (st.pass ? 1 : 0) << '\n';
    f << "level_coarse,level_fine,l1_difference\n";
    for (std::size_t i = 0; i < st.errors.size(); ++i)
        f << st.levels[i] << ',' << st.levels[i + 1] << ',' << fmt_g(st.errors[i]) << '\n';
}

inline void write_fit_csv(const std::filesystem::path& path, const DivergenceEstimateFit& fit) {
    std::ofstream f = detail::open_out(path);
    f << "# beta=" << fmt_g(fit.beta) << " constant=" << fmt_g(fit.constant)
      << " argmax=" << fit.argmax << '\n';
    f << "field,numerator,denominator,ratio\n";
    for (const FieldRatio& fr : fit.table)
        f << fr.name << ',' << fmt_g(fr.numerator) << ',' << fmt_g(fr.denominator) << ','
          << fmt_g(fr.ratio) << '\n';
}

// Flat key=value run summary, the text-file counterpart of RunReport.
inline void write_run_report(const std::filesystem::path& path, const RunReport& rep,
                             const std::vector<std::pair<std::string, std::string>>& extra = {}) {
    std::ofstream f = detail::open_out(path);
    f << "aborted=" << (rep.aborted ? 1 : 0) << '\n';
    if (rep.aborted) f << "abort_reason=" << rep.abort_reason << '\n';
    f << "steps=" << rep.steps << '\n';
    f << "clip_count=" << rep.clip_count << '\n';
    f << "min_dt=" << fmt_g(rep.min_dt) << '\n';
    f << "max_dt=" << fmt_g(rep.max_dt) << '\n';
    f << "max_mass_residual=" << fmt_g(rep.max_mass_residual) << '\n';
    f << "wall_time_s=" << fmt_g(rep.wall_time_s) << '\n';
    for (const auto& [k, v] : extra) f << k << '=' << v << '\n';
}

} // namespace hapfv
