#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <queue>
#include <vector>

#include "hapfv/grid.hpp"

using namespace hapfv;

TEST_CASE("2x2 rectangle enumerates cells and faces") {
    const Grid g = build_grid(2, 2, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    CHECK(g.active_cells.size() == 4);
    CHECK(g.faces.size() == 4);          // 2 vertical + 2 horizontal interior faces
    CHECK(g.boundary_faces.size() == 8); // perimeter
    CHECK(g.hx == Catch::Approx(0.5));
    CHECK(g.cell_area() == Catch::Approx(0.25));
}

TEST_CASE("face orientation and midpoints") {
    const Grid g = build_grid(2, 1, Domain::rectangle(0.0, 0.0, 2.0, 1.0));
    REQUIRE(g.faces.size() == 1);
    const Face& f = g.faces[0];
    CHECK(f.axis == 0);
    CHECK(f.c0 == g.idx(0, 0)); // normal points from c0 to c1 along +x
    CHECK(f.c1 == g.idx(1, 0));
    CHECK(f.mx == Catch::Approx(1.0));
    CHECK(f.my == Catch::Approx(0.5));
}

TEST_CASE("staircase disk mask at 64^2") {
    const Grid g = build_grid(64, 64, Domain::disk(0.0, 0.0, 1.0));
    CHECK(g.active_cells.size() == 3228);
    // Exact staircase area for this mask; relative error vs pi ~ 3.4e-3.
    CHECK(cell_integral(g, std::vector<double>(g.ncells(), 1.0)) == Catch::Approx(3.15234375));
}

TEST_CASE("disk area converges to pi first order") {
    const double pi = 3.14159265358979323846;
    double prev_err = 0.0;
    int level = 0;
    for (int n : {64, 128, 256}) {
        const Grid g = build_grid(n, n, Domain::disk(0.0, 0.0, 1.0));
        const double area = g.active_cells.size() * g.cell_area();
        const double err = std::abs(area - pi) / pi;
        if (level > 0) CHECK(err < prev_err);
        prev_err = err;
        ++level;
    }
    CHECK(prev_err == Catch::Approx(7.488e-5).margin(1e-6));
}

TEST_CASE("midpoint quadrature integrates x^2") {
    const Grid g = build_grid(128, 128, Domain::rectangle(-1.0, -1.0, 1.0, 1.0));
    const auto f = make_field(g, [](double x, double) { return x * x; });
    CHECK(cell_integral(g, f) == Catch::Approx(4.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("cell_integral is linear") {
    const Grid g = build_grid(33, 17, Domain::rectangle(-1.0, 0.0, 2.0, 1.0));
    const auto f = make_field(g, [](double x, double y) { return std::sin(3 * x) + y; });
    const auto h = make_field(g, [](double x, double y) { return std::cos(x) * y; });
    std::vector<double> combo(g.ncells(), 0.0);
    for (int c : g.active_cells) combo[c] = 2.0 * f[c] - 3.0 * h[c];
    const double lhs = cell_integral(g, combo);
    const double rhs = 2.0 * cell_integral(g, f) - 3.0 * cell_integral(g, h);
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
}

TEST_CASE("face gradients are exact on affine fields") {
    auto affine = [](double x, double y) { return 0.7 - 1.3 * x + 2.1 * y; };
    SECTION("rectangle") {
        const Grid g = build_grid(16, 12, Domain::rectangle(-1.0, -1.0, 1.0, 0.5));
        const auto f = make_field(g, affine);
        for (const Face& face : g.faces) {
            const Vec2 grad = face_gradient(g, f, face);
            CHECK(grad.x == Catch::Approx(-1.3).margin(1e-12));
            CHECK(grad.y == Catch::Approx(2.1).margin(1e-12));
        }
    }
    SECTION("disk staircase, including one-sided tangential stencils") {
        const Grid g = build_grid(16, 16, Domain::disk(0.0, 0.0, 1.0));
        const auto f = make_field(g, affine);
        for (const Face& face : g.faces) {
            const Vec2 grad = face_gradient(g, f, face);
            if (face.n_tpairs == 0) continue; // tangential part unavailable
            CHECK(grad.x == Catch::Approx(-1.3).margin(1e-12));
            CHECK(grad.y == Catch::Approx(2.1).margin(1e-12));
        }
    }
}

TEST_CASE("cell gradients are exact on affine fields away from the mask edge") {
    const Grid g = build_grid(16, 16, Domain::rectangle(0.0, 0.0, 1.0, 1.0));
    const auto f = make_field(g, [](double x, double y) { return 4.0 * x - 0.25 * y; });
    for (int c : g.active_cells) {
        const Vec2 grad = cell_gradient(g, f, c);
        CHECK(grad.x == Catch::Approx(4.0).margin(1e-12));
        CHECK(grad.y == Catch::Approx(-0.25).margin(1e-12));
    }
}

TEST_CASE("disk active set is face-connected") {
    const Grid g = build_grid(64, 64, Domain::disk(0.0, 0.0, 1.0));
    std::vector<std::vector<int>> adj(g.ncells());
    for (const Face& f : g.faces) {
        adj[f.c0].push_back(f.c1);
        adj[f.c1].push_back(f.c0);
    }
    std::vector<char> seen(g.ncells(), 0);
    std::queue<int> q;
    q.push(g.active_cells.front());
    seen[g.active_cells.front()] = 1;
    std::size_t reached = 0;
    while (!q.empty()) {
        const int c = q.front();
        q.pop();
        ++reached;
        for (int nb : adj[c])
            if (!seen[nb]) {
                seen[nb] = 1;
                q.push(nb);
            }
    }
    CHECK(reached == g.active_cells.size());
}

TEST_CASE("every boundary face borders exactly one active cell") {
    const Grid g = build_grid(32, 32, Domain::disk(0.0, 0.0, 1.0));
    for (const BoundaryFace& b : g.boundary_faces) {
        const int i = g.cell_i(b.cell), j = g.cell_j(b.cell);
        REQUIRE(g.is_active(i, j));
        const int ni = i + (b.axis == 0 ? b.side : 0);
        const int nj = j + (b.axis == 1 ? b.side : 0);
        CHECK_FALSE(g.is_active(ni, nj));
    }
    // Interior + boundary faces account for all 4 sides of every active cell.
    CHECK(2 * g.faces.size() + g.boundary_faces.size() == 4 * g.active_cells.size());
}

TEST_CASE("builder rejects bad input") {
    CHECK_THROWS_AS(build_grid(0, 4, Domain::rectangle(0, 0, 1, 1)), ConfigError);
    CHECK_THROWS_AS(build_grid(4, -1, Domain::rectangle(0, 0, 1, 1)), ConfigError);
    CHECK_THROWS_AS(build_grid(4, 4, Domain::rectangle(1, 0, 0, 1)), ConfigError);
    CHECK_THROWS_AS(build_grid(2, 2, Domain::disk(0, 0, 1)), ConfigError);
    CHECK_THROWS_AS(build_grid(8, 8, Domain::disk(0, 0, -1)), ConfigError);
    CHECK_THROWS_AS(build_grid(8, 8, Domain::disk(0, 0, 0)), ConfigError);
}

TEST_CASE("non-finite fields poison the integral") {
    const Grid g = build_grid(4, 4, Domain::rectangle(0, 0, 1, 1));
    std::vector<double> f(g.ncells(), 1.0);
    f[g.idx(1, 1)] = std::numeric_limits<double>::quiet_NaN();
    CHECK(std::isnan(cell_integral(g, f)));
}
