#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <string>
#include <vector>

#include "hapfv/errors.hpp"
#include "hapfv/geometry.hpp"
#include "hapfv/grid.hpp"
#include "hapfv/rng.hpp"

namespace hapfv {

enum class TensorKind {
    Constant,    // spatially uniform SPD matrix, zero divergence
    RadialPower, // |x|^s I on a disk around the origin, degenerate at x = 0
    AxisPower,   // |x1|^s I, degenerate on the line x1 = 0
    Imported,    // per-cell samples from file, divergence by finite differences
};

struct TensorSample {
    SymMat2 mat;
    Vec2 div;
    bool singular = false; // divergence not defined at this point
};

// |x|^s I with columnwise divergence s |x|^(s-2) x. The divergence extends
// by zero to the origin only for s > 1; at exactly x = 0 with s <= 1 the
// sample is flagged singular.
inline TensorSample eval_radial_power(const Vec2& x, double s) {
    TensorSample out;
    const double r = x.norm();
    if (r == 0.0) {
        out.mat = SymMat2{};
        out.div = {0.0, 0.0};
        out.singular = s <= 1.0;
        return out;
    }
    const double rs = std::pow(r, s);
    out.mat = SymMat2::identity(rs);
    const double f = s * std::pow(r, s - 2.0);
    out.div = {f * x.x, f * x.y};
    return out;
}

// |x1|^s I (s > 1) with divergence (s |x1|^(s-2) x1, 0); both extend by zero
// to the degeneracy line x1 = 0.
inline TensorSample eval_axis_power(const Vec2& x, double s) {
    TensorSample out;
    const double a = std::abs(x.x);
    if (a == 0.0) return out; // zero matrix, zero divergence
    out.mat = SymMat2::identity(std::pow(a, s));
    out.div = {s * std::pow(a, s - 2.0) * x.x, 0.0};
    return out;
}

// Diffusion tensor sampled at cell centers and face midpoints of one grid.
// Prototype kinds are evaluated analytically at faces, so a face lying on
// the degeneracy set carries an exactly zero matrix and divergence.
struct TensorField {
    const Grid* grid = nullptr;
    TensorKind kind = TensorKind::Constant;
    double s = 0.0;          // prototype exponent
    double shift = 0.0;      // accumulated isotropic regularization shift
    std::vector<SymMat2> cell_mat;
    std::vector<Vec2> cell_div;
    std::vector<SymMat2> face_mat;
    std::vector<Vec2> face_div;
    int singular_samples = 0;
};

namespace detail {

template <typename EvalFn>
TensorField sample_prototype(const Grid& g, TensorKind kind, double s, EvalFn eval) {
    TensorField tf;
    tf.grid = &g;
    tf.kind = kind;
    tf.s = s;
    tf.cell_mat.assign(g.ncells(), SymMat2{});
    tf.cell_div.assign(g.ncells(), Vec2{});
    tf.face_mat.resize(g.faces.size());
    tf.face_div.resize(g.faces.size());
    for (int c : g.active_cells) {
        const TensorSample smp = eval(g.cell_center(c));
        tf.cell_mat[c] = smp.mat;
        tf.cell_div[c] = smp.div;
        if (smp.singular) ++tf.singular_samples;
    }
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const TensorSample smp = eval(Vec2{g.faces[k].mx, g.faces[k].my});
        tf.face_mat[k] = smp.mat;
        tf.face_div[k] = smp.div;
        if (smp.singular) ++tf.singular_samples;
    }
    return tf;
}

} // namespace detail

inline TensorField make_radial_power_field(const Grid& g, double s) {
    if (!(s > 0.0)) throw ConfigError("radial power tensor needs s > 0");
    return detail::sample_prototype(g, TensorKind::RadialPower, s,
                                    [s](const Vec2& x) { return eval_radial_power(x, s); });
}

inline TensorField make_axis_power_field(const Grid& g, double s) {
    if (!(s > 1.0)) throw ConfigError("axis power tensor needs s > 1");
    return detail::sample_prototype(g, TensorKind::AxisPower, s,
                                    [s](const Vec2& x) { return eval_axis_power(x, s); });
}

inline TensorField make_constant_field(const Grid& g, const SymMat2& m) {
    TensorField tf;
    tf.grid = &g;
    tf.kind = TensorKind::Constant;
    tf.cell_mat.assign(g.ncells(), m);
    tf.cell_div.assign(g.ncells(), Vec2{});
    tf.face_mat.assign(g.faces.size(), m);
    tf.face_div.assign(g.faces.size(), Vec2{});
    return tf;
}

struct TensorCsvRow {
    double x = 0.0, y = 0.0;
    SymMat2 mat;
};

// Parses "x,y,d11,d12,d22" lines; a leading header line is allowed.
inline std::vector<TensorCsvRow> parse_tensor_csv(std::istream& in) {
    std::vector<TensorCsvRow> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::array<double, 5> vals{};
        std::size_t pos = 0;
        bool ok = true;
        for (int k = 0; k < 5; ++k) {
            const std::size_t comma = line.find(',', pos);
            const std::string cell = line.substr(pos, comma == std::string::npos ? comma : comma - pos);
            try {
                vals[k] = std::stod(cell);
            } catch (...) {
                ok = false;
                break;
            }
            if (comma == std::string::npos && k < 4) {
                ok = false;
                break;
            }
            pos = comma + 1;
        }
        if (!ok) {
            if (first) {
                first = false;
                continue; // header
            }
            throw ConfigError("malformed tensor CSV line: " + line);
        }
        first = false;
        rows.push_back({vals[0], vals[1], SymMat2{vals[2], vals[3], vals[4]}});
    }
    if (rows.empty()) throw ConfigError("tensor CSV holds no samples");
    return rows;
}

inline std::vector<TensorCsvRow> read_tensor_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tensor CSV: " + path);
    return parse_tensor_csv(in);
}

// Imported samples must cover every active cell center (match radius a
// quarter of the cell spacing). Divergence falls back to finite differences
// of the cell samples; faces average the two adjacent cells.
inline TensorField make_imported_field(const Grid& g, const std::vector<TensorCsvRow>& rows) {
    TensorField tf;
    tf.grid = &g;
    tf.kind = TensorKind::Imported;
    tf.cell_mat.assign(g.ncells(), SymMat2{});
    tf.cell_div.assign(g.ncells(), Vec2{});
    std::vector<std::uint8_t> seen(g.ncells(), 0);

    const double tol = 0.25 * std::min(g.hx, g.hy);
    for (const auto& row : rows) {
        const int i = static_cast<int>(std::floor((row.x - g.x0) / g.hx));
        const int j = static_cast<int>(std::floor((row.y - g.y0) / g.hy));
        if (!g.in_range(i, j)) continue;
        const int c = g.idx(i, j);
        if (!g.active[c]) continue;
        if (std::abs(row.x - g.cx(i)) > tol || std::abs(row.y - g.cy(j)) > tol)
            throw ConfigError("tensor sample at (" + std::to_string(row.x) + ", " +
                              std::to_string(row.y) + ") does not sit on a cell center");
        if (seen[c]) throw ConfigError("duplicate tensor sample for one cell");
        seen[c] = 1;
        tf.cell_mat[c] = row.mat;
    }
    for (int c : g.active_cells)
        if (!seen[c])
            throw ConfigError("tensor file misses the cell center at (" +
                              std::to_string(g.cell_center(c).x) + ", " +
                              std::to_string(g.cell_center(c).y) + ")");

    // div(M)_k = sum_j d_j M_jk, centered where possible, one-sided at edges
    auto fd = [&](auto entry, int c, int axis) -> double {
        const int i = g.cell_i(c), j = g.cell_j(c);
        const int ip = axis == 0 ? i + 1 : i, jp = axis == 0 ? j : j + 1;
        const int im = axis == 0 ? i - 1 : i, jm = axis == 0 ? j : j - 1;
        const double h = g.spacing(axis);
        const bool hasp = g.is_active(ip, jp), hasm = g.is_active(im, jm);
        if (hasp && hasm) return (entry(g.idx(ip, jp)) - entry(g.idx(im, jm))) / (2.0 * h);
        if (hasp) return (entry(g.idx(ip, jp)) - entry(c)) / h;
        if (hasm) return (entry(c) - entry(g.idx(im, jm))) / h;
        return 0.0;
    };
    auto e11 = [&](int c) { return tf.cell_mat[c].a11; };
    auto e12 = [&](int c) { return tf.cell_mat[c].a12; };
    auto e22 = [&](int c) { return tf.cell_mat[c].a22; };
    for (int c : g.active_cells) {
        tf.cell_div[c].x = fd(e11, c, 0) + fd(e12, c, 1);
        tf.cell_div[c].y = fd(e12, c, 0) + fd(e22, c, 1);
    }

    tf.face_mat.resize(g.faces.size());
    tf.face_div.resize(g.faces.size());
    for (std::size_t k = 0; k < g.faces.size(); ++k) {
        const Face& f = g.faces[k];
        tf.face_mat[k] = (tf.cell_mat[f.c0] + tf.cell_mat[f.c1]) * 0.5;
        tf.face_div[k] = (tf.cell_div[f.c0] + tf.cell_div[f.c1]) * 0.5;
    }
    return tf;
}

// D + 2*eps*I on every sample. The divergence of the shift is zero, so the
// divergence data is reused unchanged, and any divergence estimate constant
// A for D transfers to the shifted field as B = A + 1.
inline TensorField regularize(const TensorField& D, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("regularization eps must be in (0, 1)");
    TensorField tf = D;
    const SymMat2 shift = SymMat2::identity(2.0 * eps);
    for (SymMat2& m : tf.cell_mat) m = m + shift;
    for (SymMat2& m : tf.face_mat) m = m + shift;
    tf.shift += 2.0 * eps;
    return tf;
}

struct PsdReport {
    bool pass = true;
    double min_eig = std::numeric_limits<double>::infinity();
    double worst_margin = std::numeric_limits<double>::infinity();
    Vec2 where{};
};

// Every stored matrix must satisfy eig_min >= -1e-12 * frobenius(M).
inline PsdReport validate_psd(const TensorField& D) {
    PsdReport rep;
    auto check = [&rep](const SymMat2& m, const Vec2& pos) {
        const double e = m.eig_min();
        const double margin = e + 1e-12 * m.frobenius();
        if (e < rep.min_eig) rep.min_eig = e;
        if (margin < rep.worst_margin) {
            rep.worst_margin = margin;
            rep.where = pos;
        }
        if (margin < 0.0) rep.pass = false;
    };
    const Grid& g = *D.grid;
    for (int c : g.active_cells) check(D.cell_mat[c], g.cell_center(c));
    for (std::size_t k = 0; k < g.faces.size(); ++k)
        check(D.face_mat[k], Vec2{g.faces[k].mx, g.faces[k].my});
    return rep;
}

// A continuous test field sampled at cell centers (inactive cells hold 0).
struct VectorFieldSample {
    std::string name;
    std::vector<Vec2> values;
};

inline VectorFieldSample sample_vector_field(const Grid& g, const std::string& name,
                                             const std::function<Vec2(double, double)>& f) {
    VectorFieldSample out;
    out.name = name;
    out.values.assign(g.ncells(), Vec2{});
    for (int c : g.active_cells) {
        const Vec2 p = g.cell_center(c);
        out.values[c] = f(p.x, p.y);
    }
    return out;
}

// Fixed constant and coordinate fields followed by seeded trigonometric
// polynomials up to degree 4. The battery is an estimation device for the
// divergence-estimate constant, not a proof: the fitted constant is a lower
// envelope over the sampled fields.
inline std::vector<VectorFieldSample> make_default_battery(const Grid& g, int count,
                                                           std::uint64_t seed) {
    std::vector<VectorFieldSample> fields;
    auto add = [&](const std::string& name, std::function<Vec2(double, double)> f) {
        if (static_cast<int>(fields.size()) < count)
            fields.push_back(sample_vector_field(g, name, f));
    };
    add("const_x", [](double, double) { return Vec2{1.0, 0.0}; });
    add("const_y", [](double, double) { return Vec2{0.0, 1.0}; });
    add("const_diag", [](double, double) { return Vec2{1.0, 1.0}; });
    add("coord_radial", [](double x, double y) { return Vec2{x, y}; });
    add("coord_rot", [](double x, double y) { return Vec2{-y, x}; });
    add("coord_swap", [](double x, double y) { return Vec2{y, x}; });

    SplitMix64 rng(seed);
    const double px = g.domain.x0, qx = g.domain.x1;
    const double py = g.domain.y0, qy = g.domain.y1;
    int t = 0;
    while (static_cast<int>(fields.size()) < count) {
        // one trig polynomial per component: sum over k+l <= 4 of
        // c_{kl} * b_k(xi) * b_l(eta) in box-normalized coordinates
        struct Term { int k, l; double c; bool sx, sy; };
        std::array<std::vector<Term>, 2> comp;
        for (int d = 0; d < 2; ++d)
            for (int k = 0; k <= 4; ++k)
                for (int l = 0; k + l <= 4; ++l)
                    comp[d].push_back({k, l, rng.uniform(-1.0, 1.0), rng.next() & 1u ? true : false,
                                       rng.next() & 1u ? true : false});
        auto eval_basis = [](int k, double xi, bool use_sin) {
            if (k == 0) return 1.0;
            const double a = k * 3.14159265358979323846 * xi;
            return use_sin ? std::sin(a) : std::cos(a);
        };
        add("trig_" + std::to_string(t++), [=](double x, double y) {
            const double xi = (x - px) / (qx - px);
            const double eta = (y - py) / (qy - py);
            Vec2 v;
            for (int d = 0; d < 2; ++d) {
                double acc = 0.0;
                for (const Term& tm : comp[d])
                    acc += tm.c * eval_basis(tm.k, xi, tm.sx) * eval_basis(tm.l, eta, tm.sy);
                if (d == 0) v.x = acc; else v.y = acc;
            }
            return v;
        });
    }
    return fields;
}

struct FieldRatio {
    std::string name;
    double numerator = 0.0;   // integral of |div D . phi|
    double denominator = 0.0; // integral of |phi . D phi|^beta, plus one
    double ratio = 0.0;
};

struct DivergenceEstimateFit {
    double beta = 0.0;
    double constant = 0.0; // max ratio over the battery
    std::string argmax;
    std::vector<FieldRatio> table;
    bool finite = true;
};

// Empirical constant for:  int |div D . phi| <= C (int |phi . D phi|^beta + 1).
inline DivergenceEstimateFit fit_divergence_estimate(const TensorField& D, double beta,
                                                     const std::vector<VectorFieldSample>& battery,
                                                     const Grid& g) {
    if (!(beta >= 0.5 && beta < 1.0)) throw ConfigError("beta must lie in [1/2, 1)");
    if (battery.empty()) throw ConfigError("empty test field battery");
    DivergenceEstimateFit fit;
    fit.beta = beta;
    const double area = g.cell_area();
    for (const auto& field : battery) {
        FieldRatio fr;
        fr.name = field.name;
        double num = 0.0, den = 0.0;
        for (int c : g.active_cells) {
            const Vec2& phi = field.values[c];
            num += std::abs(D.cell_div[c].dot(phi));
            den += std::pow(std::abs(D.cell_mat[c].quad(phi)), beta);
        }
        fr.numerator = num * area;
        fr.denominator = den * area + 1.0;
        fr.ratio = fr.numerator / fr.denominator;
        if (!std::isfinite(fr.ratio)) fit.finite = false;
        if (fr.ratio > fit.constant) {
            fit.constant = fr.ratio;
            fit.argmax = fr.name;
        }
        fit.table.push_back(fr);
    }
    return fit;
}

struct BetaRange {
    double lo = 0.5; // open endpoint
    double hi = 1.0; // open endpoint
};

// Admissible exponents for the divergence estimate, intersected with the
// theorem range [1/2, 1). Constant and imported smooth fields admit the
// optimal beta = 1/2.
inline BetaRange beta_admissible_range(TensorKind kind, double s, int n = 2) {
    BetaRange r;
    switch (kind) {
    case TensorKind::RadialPower: {
        if (!(s > 0.0)) throw ConfigError("radial power tensor needs s > 0");
        if (n < 1) throw ConfigError("dimension must be positive");
        const double denom = s - 2.0 + 2.0 * n;
        if (!(denom > 0.0)) throw ConfigError("no admissible beta for this exponent");
        r.lo = std::max(0.5, n / denom);
        break;
    }
    case TensorKind::AxisPower: {
        if (!(s > 1.0)) throw ConfigError("axis power tensor needs s > 1");
        r.lo = std::max(0.5, 1.0 / s);
        break;
    }
    default:
        r.lo = 0.5;
        break;
    }
    if (!(r.lo < r.hi)) throw ConfigError("empty admissible beta range");
    return r;
}

struct HypothesesReport {
    bool ok = true;
    std::string message = "hypotheses hold";
};

// Well-posedness hypotheses for the weak (eps = 0) mode:
// r >= 2, beta in [1/2, 1), and beta/(1-beta) <= r.
inline HypothesesReport validate_theorem_hypotheses(double beta, double r) {
    HypothesesReport rep;
    if (!(r >= 2.0)) {
        rep.ok = false;
        rep.message = "logistic exponent must satisfy r in [2, inf), got r = " + std::to_string(r);
        return rep;
    }
    if (!(beta >= 0.5 && beta < 1.0)) {
        rep.ok = false;
        rep.message = "beta must lie in [1/2, 1), got beta = " + std::to_string(beta);
        return rep;
    }
    if (!(beta / (1.0 - beta) <= r)) {
        rep.ok = false;
        rep.message = "need beta/(1-beta) <= r, got " + std::to_string(beta / (1.0 - beta)) +
                      " > " + std::to_string(r);
        return rep;
    }
    return rep;
}

} // namespace hapfv
