#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "fishpose/errors.hpp"

namespace fishpose {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double k) const { return {x * k, y * k}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double squared_norm() const { return x * x + y * y; }
    double norm() const { return std::sqrt(squared_norm()); }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double k) const { return {x * k, y * k, z * k}; }
    Vec3 operator/(double k) const { return {x / k, y / k, z / k}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double squared_norm() const { return x * x + y * y + z * z; }
    double norm() const { return std::sqrt(squared_norm()); }
    Vec2 xy() const { return {x, y}; }

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline Vec3 operator*(double k, const Vec3& v) { return v * k; }
inline Vec2 operator*(double k, const Vec2& v) { return v * k; }

// 3x3 matrix, row-major. Rotations act on row vectors from the right
// (p' = p * M); camera matrices use the usual column form (q = M * v).
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
    double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

    Mat3 operator*(const Mat3& o) const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                out(r, c) = (*this)(r, 0) * o(0, c) + (*this)(r, 1) * o(1, c) +
                            (*this)(r, 2) * o(2, c);
        return out;
    }

    Mat3 transposed() const {
        Mat3 out;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out(r, c) = (*this)(c, r);
        return out;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) -
               m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    // Column action: M * v.
    Vec3 mul(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 inverse() const {
        const double d = det();
        if (std::abs(d) < 1e-15) {
            throw InvalidCalibrationError("matrix is singular, cannot invert");
        }
        Mat3 out;
        out.m = {(m[4] * m[8] - m[5] * m[7]) / d, (m[2] * m[7] - m[1] * m[8]) / d,
                 (m[1] * m[5] - m[2] * m[4]) / d, (m[5] * m[6] - m[3] * m[8]) / d,
                 (m[0] * m[8] - m[2] * m[6]) / d, (m[2] * m[3] - m[0] * m[5]) / d,
                 (m[3] * m[7] - m[4] * m[6]) / d, (m[1] * m[6] - m[0] * m[7]) / d,
                 (m[0] * m[4] - m[1] * m[3]) / d};
        return out;
    }
};

// Row action: p * M.
inline Vec3 operator*(const Vec3& p, const Mat3& M) {
    return {p.x * M(0, 0) + p.y * M(1, 0) + p.z * M(2, 0),
            p.x * M(0, 1) + p.y * M(1, 1) + p.z * M(2, 1),
            p.x * M(0, 2) + p.y * M(1, 2) + p.z * M(2, 2)};
}

namespace detail {

inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    return std::fmod(a, two_pi);
}

}  // namespace detail

// Elemental rotations for row vectors, counterclockwise-positive when
// looking down the axis toward the origin.
inline Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {1, 0, 0, 0, c, s, 0, -s, c};
    return r;
}

inline Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, 0, -s, 0, 1, 0, s, 0, c};
    return r;
}

inline Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Mat3 r;
    r.m = {c, s, 0, -s, c, 0, 0, 0, 1};
    return r;
}

// Composed rotation R(gamma)*R(beta)*R(alpha) applied to row vectors,
// i.e. the point is rotated about z, then y, then x.
inline Mat3 rotation_matrix(double alpha, double beta, double gamma) {
    if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(gamma)) {
        throw InvalidInputError("rotation angles must be finite");
    }
    alpha = detail::wrap_angle(alpha);
    beta = detail::wrap_angle(beta);
    gamma = detail::wrap_angle(gamma);
    return rot_z(gamma) * rot_y(beta) * rot_x(alpha);
}

struct Line3 {
    Vec3 origin;
    Vec3 direction;  // need not be unit length, but must be nonzero
};

struct LineClosestPoints {
    Vec3 p1;        // closest point on the first line
    Vec3 p2;        // closest point on the second line
    Vec3 midpoint;  // (p1 + p2) / 2
    double gap;     // |p1 - p2|
};

// Closest pair of points between two 3D lines via the 2x2 normal equations
// of the squared-distance objective. Near-parallel directions have no
// unique minimizer and are rejected.
inline LineClosestPoints closest_points_between_lines(const Line3& l1, const Line3& l2) {
    const Vec3 d1 = l1.direction;
    const Vec3 d2 = l2.direction;
    const double n1 = d1.norm();
    const double n2 = d2.norm();
    if (n1 <= 1e-12 || n2 <= 1e-12) {
        throw InvalidInputError("line direction must have nonzero norm");
    }
    const double sin_angle = d1.cross(d2).norm() / (n1 * n2);
    if (sin_angle < 1e-9) {
        throw DegenerateGeometryError("lines are (near-)parallel, closest point pair is not unique");
    }

    const Vec3 w = l1.origin - l2.origin;
    const double a = d1.dot(d1);
    const double b = d1.dot(d2);
    const double c = d2.dot(d2);
    const double e = d1.dot(w);
    const double f = d2.dot(w);
    const double denom = a * c - b * b;  // > 0 for non-parallel lines

    const double m = (b * f - c * e) / denom;
    const double n = (a * f - b * e) / denom;

    LineClosestPoints out;
    out.p1 = l1.origin + m * d1;
    out.p2 = l2.origin + n * d2;
    out.midpoint = (out.p1 + out.p2) * 0.5;
    out.gap = (out.p1 - out.p2).norm();
    return out;
}

}  // namespace fishpose
