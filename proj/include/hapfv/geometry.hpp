#pragma once

#include <algorithm>
#include <cmath>

namespace hapfv {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
    double operator[](int axis) const { return axis == 0 ? x : y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Symmetric 2x2 matrix stored as upper triangle.
struct SymMat2 {
    double a11 = 0.0;
    double a12 = 0.0;
    double a22 = 0.0;

    Vec2 apply(const Vec2& v) const {
        return {a11 * v.x + a12 * v.y, a12 * v.x + a22 * v.y};
    }
    // Quadratic form v . (M v).
    double quad(const Vec2& v) const {
        return a11 * v.x * v.x + 2.0 * a12 * v.x * v.y + a22 * v.y * v.y;
    }
    double eig_min() const {
        const double mean = 0.5 * (a11 + a22);
        const double dev = std::hypot(0.5 * (a11 - a22), a12);
        return mean - dev;
    }
    double eig_max() const {
        const double mean = 0.5 * (a11 + a22);
        const double dev = std::hypot(0.5 * (a11 - a22), a12);
        return mean + dev;
    }
    double frobenius() const {
        return std::sqrt(a11 * a11 + 2.0 * a12 * a12 + a22 * a22);
    }

    SymMat2 operator+(const SymMat2& o) const { return {a11 + o.a11, a12 + o.a12, a22 + o.a22}; }
    SymMat2 operator*(double s) const { return {a11 * s, a12 * s, a22 * s}; }

    static SymMat2 identity(double s = 1.0) { return {s, 0.0, s}; }
    // R(theta) diag(l1, l2) R(theta)^T
    static SymMat2 rotated_diag(double l1, double l2, double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        return {l1 * c * c + l2 * s * s, (l1 - l2) * s * c, l1 * s * s + l2 * c * c};
    }
};

} // namespace hapfv
