#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "fishpose/errors.hpp"
#include "fishpose/geometry.hpp"
#include "fishpose/mask.hpp"

namespace fishpose {

enum class Unit { pixels, millimeters };

// Ordered 3D point set; the unit tag travels with the data.
struct PointSet3 {
    std::vector<Vec3> points;
    Unit unit = Unit::pixels;
};

// The seven deformation parameters: scale, signed curvature (1/r), in-plane
// translation, and the three rotation angles. kappa = 0 is the flat fish.
struct DeformParams {
    double s = 1.0;
    double kappa = 0.0;  // 1 / bending radius, sign picks the bend direction
    double tx = 0.0;
    double ty = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;

    void validate() const {
        if (!std::isfinite(s) || !std::isfinite(kappa) || !std::isfinite(tx) ||
            !std::isfinite(ty) || !std::isfinite(alpha) || !std::isfinite(beta) ||
            !std::isfinite(gamma)) {
            throw InvalidInputError("deformation parameters must be finite");
        }
        if (s <= 0.0) throw InvalidInputError("scale parameter must be positive");
    }
};

// Flat template point sheet (all z = 0), centered on the body-center pixel,
// major axis along y. Keypoints are tracked as indices so they survive
// every deformation.
struct Template {
    PointSet3 points0;
    std::size_t head_idx = 0;
    std::size_t center_idx = 0;
    std::size_t tail_idx = 0;
    std::size_t n_points = 0;

    // Derived quantities used downstream.
    double midline_arc = 0.0;    // flat head-tail arc measured in the (y,z) plane
    double y_absmax = 0.0;       // largest |y|, bounds the bend angle
    std::int64_t source_area = 0;  // foreground pixel count of the source mask
};

inline PointSet3 scale_points(const PointSet3& ps, double s) {
    if (!std::isfinite(s) || s <= 0.0) {
        throw InvalidInputError("scale factor must be finite and positive");
    }
    PointSet3 out;
    out.unit = ps.unit;
    out.points.reserve(ps.points.size());
    for (const Vec3& p : ps.points) out.points.push_back(p * s);
    return out;
}

namespace detail {

// Length-preserving wrap of the y axis onto a cylinder of radius 1/|kappa|.
// theta = y * kappa; output (y, z) = (sin(theta)/kappa, (1-cos(theta))/kappa),
// with a Taylor branch near theta = 0 where the quotients become 0/0.
inline void bend_yz(double y, double kappa, double& y_out, double& z_out) {
    const double theta = y * kappa;
    if (std::abs(theta) < 1e-4) {
        const double t2 = theta * theta;
        y_out = y * (1.0 - t2 / 6.0 + t2 * t2 / 120.0);
        z_out = y * (theta / 2.0 - t2 * theta / 24.0);
    } else {
        const double half = 0.5 * theta;
        y_out = std::sin(theta) / kappa;
        z_out = 2.0 * std::sin(half) * std::sin(half) / kappa;
    }
}

}  // namespace detail

inline PointSet3 bend_points(const PointSet3& ps, double kappa) {
    if (!std::isfinite(kappa)) throw InvalidInputError("curvature must be finite");
    if (kappa == 0.0) return ps;

    PointSet3 out;
    out.unit = ps.unit;
    out.points.reserve(ps.points.size());
    for (const Vec3& p : ps.points) {
        if (std::abs(p.y * kappa) >= std::numbers::pi) {
            throw OverBendError("bend exceeds half cylinder: |y*kappa| >= pi");
        }
        Vec3 q;
        q.x = p.x;
        detail::bend_yz(p.y, kappa, q.y, q.z);
        out.points.push_back(q);
    }
    return out;
}

inline PointSet3 translate_points(const PointSet3& ps, double tx, double ty) {
    if (!std::isfinite(tx) || !std::isfinite(ty)) {
        throw InvalidInputError("translation must be finite");
    }
    PointSet3 out;
    out.unit = ps.unit;
    out.points.reserve(ps.points.size());
    const Vec3 t{tx, ty, 0.0};
    for (const Vec3& p : ps.points) out.points.push_back(p + t);
    return out;
}

inline PointSet3 rotate_points(const PointSet3& ps, double alpha, double beta, double gamma) {
    const Mat3 m = rotation_matrix(alpha, beta, gamma);
    PointSet3 out;
    out.unit = ps.unit;
    out.points.reserve(ps.points.size());
    for (const Vec3& p : ps.points) out.points.push_back(p * m);
    return out;
}

struct DeformedTemplate {
    PointSet3 s4;
    Vec3 head;
    Vec3 center;
    Vec3 tail;
};

// The four transforms in their fixed order: scale, bend, translate, rotate.
inline DeformedTemplate apply_deformation(const Template& t, const DeformParams& p) {
    p.validate();
    PointSet3 cur = scale_points(t.points0, p.s);
    cur = bend_points(cur, p.kappa);
    cur = translate_points(cur, p.tx, p.ty);
    cur = rotate_points(cur, p.alpha, p.beta, p.gamma);

    DeformedTemplate out;
    out.head = cur.points[t.head_idx];
    out.center = cur.points[t.center_idx];
    out.tail = cur.points[t.tail_idx];
    out.s4 = std::move(cur);
    return out;
}

// Builds the flat template from a mask: subsample foreground pixels,
// align the blob's major axis with y, center on the body-center pixel,
// then pick head/center/tail on the midline.
inline Template build_template(const BinaryMask& mask, int stride = 2) {
    if (stride < 1) throw InvalidInputError("stride must be >= 1");

    std::vector<Vec2> px;
    std::int64_t area = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                if (area % stride == 0) px.push_back({static_cast<double>(x), static_cast<double>(y)});
                ++area;
            }
    if (area < 100) {
        throw InvalidInputError("template mask needs at least 100 foreground pixels, got " +
                                std::to_string(area));
    }

    // Principal axis of the subsampled pixels.
    double mx = 0, my = 0;
    for (const Vec2& p : px) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(px.size());
    my /= static_cast<double>(px.size());
    double cxx = 0, cxy = 0, cyy = 0;
    for (const Vec2& p : px) {
        const double dx = p.x - mx, dy = p.y - my;
        cxx += dx * dx;
        cxy += dx * dy;
        cyy += dy * dy;
    }
    const double axis_angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
    const double rho = std::numbers::pi / 2.0 - axis_angle;  // major axis -> +y
    const double c = std::cos(rho), s = std::sin(rho);

    Template t;
    t.points0.unit = Unit::pixels;
    t.points0.points.reserve(px.size());
    double rx_sum = 0, ry_sum = 0;
    for (const Vec2& p : px) {
        const double rx = c * p.x - s * p.y;
        const double ry = s * p.x + c * p.y;
        rx_sum += rx;
        ry_sum += ry;
        t.points0.points.push_back({rx, ry, 0.0});
    }
    const double ox = std::round(rx_sum / static_cast<double>(px.size()));
    const double oy = std::round(ry_sum / static_cast<double>(px.size()));
    for (Vec3& p : t.points0.points) {
        p.x -= ox;
        p.y -= oy;
    }

    // Midline band around x = 0; widened only if subsampling left it empty.
    std::vector<std::size_t> midline;
    for (double band = 1.0; midline.empty(); band *= 2.0) {
        for (std::size_t i = 0; i < t.points0.points.size(); ++i)
            if (std::abs(t.points0.points[i].x) < band) midline.push_back(i);
    }

    double best_head = -1e30, best_tail = 1e30, best_center = 1e30;
    for (std::size_t i : midline) {
        const double y = t.points0.points[i].y;
        if (y > best_head) {
            best_head = y;
            t.head_idx = i;
        }
        if (y < best_tail) {
            best_tail = y;
            t.tail_idx = i;
        }
    }
    for (std::size_t i = 0; i < t.points0.points.size(); ++i) {
        const double d = t.points0.points[i].squared_norm();
        if (d < best_center) {
            best_center = d;
            t.center_idx = i;
        }
    }
    if (t.head_idx == t.tail_idx || t.head_idx == t.center_idx ||
        t.tail_idx == t.center_idx) {
        throw InvalidInputError("degenerate template: keypoints coincide");
    }

    t.n_points = t.points0.points.size();
    t.midline_arc = best_head - best_tail;
    for (const Vec3& p : t.points0.points) t.y_absmax = std::max(t.y_absmax, std::abs(p.y));
    t.source_area = area;
    return t;
}

// Procedural flat fish silhouette (tapered ellipse body plus tail fan);
// the stock template shipped with the repo.
inline BinaryMask make_default_template_mask() {
    const int w = 360, h = 150;
    const double cy = 75.0;
    BinaryMask m(w, h);
    auto half_height = [](double x) -> double {
        if (x >= 90.0 && x <= 330.0) {
            const double u = (330.0 - x) / 240.0;  // 0 at nose, 1 at peduncle
            const double e = 1.0 - (2.0 * u - 1.0) * (2.0 * u - 1.0);
            return std::max(4.0, 55.0 * (1.0 - 0.3 * u) * std::sqrt(std::max(0.0, e)));
        }
        if (x >= 30.0 && x < 90.0) {
            const double v = (90.0 - x) / 60.0;  // tail fan
            return 4.0 + 30.0 * v;
        }
        return -1.0;
    };
    for (int x = 0; x < w; ++x) {
        const double hh = half_height(static_cast<double>(x));
        if (hh < 0.0) continue;
        for (int y = 0; y < h; ++y)
            if (std::abs(static_cast<double>(y) - cy) <= hh) m.set(x, y);
    }
    return m;
}

}  // namespace fishpose
