#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hapfv/errors.hpp"
#include "hapfv/geometry.hpp"

namespace hapfv {

enum class DomainKind { Rectangle, Disk };

struct Domain {
    DomainKind kind = DomainKind::Rectangle;
    // Bounding rectangle (the index space always covers this box).
    double x0 = -1.0, y0 = -1.0, x1 = 1.0, y1 = 1.0;
    // Disk parameters, used when kind == Disk.
    double cx = 0.0, cy = 0.0, radius = 1.0;

    static Domain rectangle(double x0, double y0, double x1, double y1) {
        Domain d;
        d.kind = DomainKind::Rectangle;
        d.x0 = x0; d.y0 = y0; d.x1 = x1; d.y1 = y1;
        return d;
    }
    // Bounding box is the tight square around the disk.
    static Domain disk(double cx = 0.0, double cy = 0.0, double radius = 1.0) {
        Domain d;
        d.kind = DomainKind::Disk;
        d.cx = cx; d.cy = cy; d.radius = radius;
        d.x0 = cx - radius; d.y0 = cy - radius;
        d.x1 = cx + radius; d.y1 = cy + radius;
        return d;
    }
};

// Interior face between two active cells. The unit normal points from c0 to
// c1, i.e. along +x (axis 0) or +y (axis 1). tpair entries are (a, b) cell
// index pairs whose difference (f[b]-f[a])/h_t reconstructs the tangential
// derivative; only the first n_tpairs entries are valid.
struct Face {
    std::int32_t c0 = -1;
    std::int32_t c1 = -1;
    std::int8_t axis = 0;
    std::int8_t n_tpairs = 0;
    std::array<std::array<std::int32_t, 2>, 4> tpair{};
    double mx = 0.0, my = 0.0; // midpoint
};

// Face with exactly one active cell (mask edge or bounding box edge).
// side is -1/+1 along axis. Carries no flux: the scheme is no-flux.
struct BoundaryFace {
    std::int32_t cell = -1;
    std::int8_t axis = 0;
    std::int8_t side = 0;
    double mx = 0.0, my = 0.0;
};

// Structured cell-centered grid over the bounding rectangle with an activity
// mask (all cells for rectangles, center-inside-disk staircase for disks).
struct Grid {
    int nx = 0, ny = 0;
    double x0 = 0.0, y0 = 0.0;
    double hx = 0.0, hy = 0.0;
    Domain domain;

    std::vector<std::uint8_t> active;   // size nx*ny
    std::vector<std::int32_t> active_cells;
    std::vector<Face> faces;
    std::vector<BoundaryFace> boundary_faces;

    int idx(int i, int j) const { return j * nx + i; }
    int cell_i(int c) const { return c % nx; }
    int cell_j(int c) const { return c / nx; }
    double cx(int i) const { return x0 + (i + 0.5) * hx; }
    double cy(int j) const { return y0 + (j + 0.5) * hy; }
    Vec2 cell_center(int c) const { return {cx(cell_i(c)), cy(cell_j(c))}; }
    double cell_area() const { return hx * hy; }
    std::size_t ncells() const { return static_cast<std::size_t>(nx) * ny; }

    bool in_range(int i, int j) const { return i >= 0 && i < nx && j >= 0 && j < ny; }
    bool is_active(int i, int j) const { return in_range(i, j) && active[idx(i, j)] != 0; }
    double spacing(int axis) const { return axis == 0 ? hx : hy; }
};

namespace detail {

inline void add_tpair(Face& f, const Grid& g, int ia, int ja, int ib, int jb) {
    if (g.is_active(ia, ja) && g.is_active(ib, jb)) {
        f.tpair[f.n_tpairs] = {g.idx(ia, ja), g.idx(ib, jb)};
        ++f.n_tpairs;
    }
}

} // namespace detail

inline Grid build_grid(int nx, int ny, const Domain& domain) {
    if (nx <= 0 || ny <= 0)
        throw ConfigError("grid dimensions must be positive, got " + std::to_string(nx) + "x" +
                          std::to_string(ny));
    if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
        throw ConfigError("domain bounding rectangle is empty");
    if (domain.kind == DomainKind::Disk) {
        if (!(domain.radius > 0.0)) throw ConfigError("disk radius must be positive");
        if (nx < 4 || ny < 4)
            throw ConfigError("disk grids need nx, ny >= 4, got " + std::to_string(nx) + "x" +
                              std::to_string(ny));
        const double eps = 1e-12 * domain.radius;
        if (domain.cx - domain.radius < domain.x0 - eps || domain.cx + domain.radius > domain.x1 + eps ||
            domain.cy - domain.radius < domain.y0 - eps || domain.cy + domain.radius > domain.y1 + eps)
            throw ConfigError("disk does not fit inside the bounding rectangle");
    }

    Grid g;
    g.nx = nx;
    g.ny = ny;
    g.x0 = domain.x0;
    g.y0 = domain.y0;
    g.hx = (domain.x1 - domain.x0) / nx;
    g.hy = (domain.y1 - domain.y0) / ny;
    g.domain = domain;
    g.active.assign(g.ncells(), 0);

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            bool act = true;
            if (domain.kind == DomainKind::Disk) {
                const double dx = g.cx(i) - domain.cx;
                const double dy = g.cy(j) - domain.cy;
                act = dx * dx + dy * dy < domain.radius * domain.radius;
            }
            if (act) {
                g.active[g.idx(i, j)] = 1;
                g.active_cells.push_back(g.idx(i, j));
            }
        }
    }
    if (g.active_cells.empty()) throw ConfigError("no active cells in domain");

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (!g.is_active(i, j)) continue;
            // x-face to the right neighbor
            if (g.is_active(i + 1, j)) {
                Face f;
                f.c0 = g.idx(i, j);
                f.c1 = g.idx(i + 1, j);
                f.axis = 0;
                f.mx = g.x0 + (i + 1) * g.hx;
                f.my = g.cy(j);
                detail::add_tpair(f, g, i, j, i, j + 1);
                detail::add_tpair(f, g, i, j - 1, i, j);
                detail::add_tpair(f, g, i + 1, j, i + 1, j + 1);
                detail::add_tpair(f, g, i + 1, j - 1, i + 1, j);
                g.faces.push_back(f);
            }
            // y-face to the top neighbor
            if (g.is_active(i, j + 1)) {
                Face f;
                f.c0 = g.idx(i, j);
                f.c1 = g.idx(i, j + 1);
                f.axis = 1;
                f.mx = g.cx(i);
                f.my = g.y0 + (j + 1) * g.hy;
                detail::add_tpair(f, g, i, j, i + 1, j);
                detail::add_tpair(f, g, i - 1, j, i, j);
                detail::add_tpair(f, g, i, j + 1, i + 1, j + 1);
                detail::add_tpair(f, g, i - 1, j + 1, i, j + 1);
                g.faces.push_back(f);
            }
            // boundary faces: sides whose neighbor is inactive or out of range
            const int di[4] = {-1, 1, 0, 0};
            const int dj[4] = {0, 0, -1, 1};
            for (int s = 0; s < 4; ++s) {
                if (g.is_active(i + di[s], j + dj[s])) continue;
                BoundaryFace b;
                b.cell = g.idx(i, j);
                b.axis = s < 2 ? 0 : 1;
                b.side = (s == 0 || s == 2) ? -1 : 1;
                if (b.axis == 0) {
                    b.mx = g.x0 + (b.side < 0 ? i : i + 1) * g.hx;
                    b.my = g.cy(j);
                } else {
                    b.mx = g.cx(i);
                    b.my = g.y0 + (b.side < 0 ? j : j + 1) * g.hy;
                }
                g.boundary_faces.push_back(b);
            }
        }
    }
    return g;
}

// Midpoint-rule integral over active cells. Non-finite values propagate into
// the result; callers that must fail on them check std::isfinite.
inline double cell_integral(const Grid& g, std::span<const double> field) {
    double sum = 0.0;
    for (int c : g.active_cells) sum += field[c];
    return sum * g.cell_area();
}

// Two-point normal difference plus averaged tangential reconstruction.
// Exact for affine fields; degrades to one-sided near the mask edge.
inline Vec2 face_gradient(const Grid& g, std::span<const double> field, const Face& f) {
    const double hn = g.spacing(f.axis);
    const double ht = g.spacing(1 - f.axis);
    const double normal = (field[f.c1] - field[f.c0]) / hn;
    double tang = 0.0;
    for (int k = 0; k < f.n_tpairs; ++k)
        tang += (field[f.tpair[k][1]] - field[f.tpair[k][0]]) / ht;
    if (f.n_tpairs > 0) tang /= f.n_tpairs;
    return f.axis == 0 ? Vec2{normal, tang} : Vec2{tang, normal};
}

// Cell-centered gradient: per axis, the average of the two-point differences
// against the active neighbors (centered inside, one-sided at the mask edge,
// zero when the cell is isolated along that axis).
inline Vec2 cell_gradient(const Grid& g, std::span<const double> field, int c) {
    const int i = g.cell_i(c), j = g.cell_j(c);
    Vec2 grad;
    {
        double s = 0.0;
        int n = 0;
        if (g.is_active(i + 1, j)) { s += (field[g.idx(i + 1, j)] - field[c]) / g.hx; ++n; }
        if (g.is_active(i - 1, j)) { s += (field[c] - field[g.idx(i - 1, j)]) / g.hx; ++n; }
        grad.x = n > 0 ? s / n : 0.0;
    }
    {
        double s = 0.0;
        int n = 0;
        if (g.is_active(i, j + 1)) { s += (field[g.idx(i, j + 1)] - field[c]) / g.hy; ++n; }
        if (g.is_active(i, j - 1)) { s += (field[c] - field[g.idx(i, j - 1)]) / g.hy; ++n; }
        grad.y = n > 0 ? s / n : 0.0;
    }
    return grad;
}

// Sample a closed-form function at active cell centers; inactive cells get 0.
inline std::vector<double> make_field(const Grid& g, const std::function<double(double, double)>& f) {
    std::vector<double> v(g.ncells(), 0.0);
    for (int c : g.active_cells) {
        const Vec2 p = g.cell_center(c);
        v[c] = f(p.x, p.y);
    }
    return v;
}

} // namespace hapfv
