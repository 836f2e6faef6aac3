#pragma once

#include <cmath>

#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/geometry.hpp"
#include "fishpose/pose_optimizer.hpp"

namespace fishpose {

// Calibrated camera: intrinsics K plus the world->camera extrinsics of the
// reference plane Z_world = 0. The plane homography H = K * [R1 R2 T] is
// derived once at construction.
class CameraModel {
public:
    static CameraModel create(const Mat3& K, const Mat3& R, const Vec3& T) {
        if (std::abs(K(2, 2) - 1.0) > 1e-9) {
            throw InvalidCalibrationError("K[2][2] must be 1");
        }
        const Mat3 rtr = R.transposed() * R;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                const double want = r == c ? 1.0 : 0.0;
                if (std::abs(rtr(r, c) - want) > 1e-9) {
                    throw InvalidCalibrationError("R is not orthonormal");
                }
            }
        if (std::abs(R.det() - 1.0) > 1e-9) {
            throw InvalidCalibrationError("R must have determinant 1");
        }

        CameraModel cam;
        cam.K_ = K;
        cam.R_ = R;
        cam.T_ = T;
        cam.K_inv_ = K.inverse();  // throws invalid-calibration when singular
        for (int r = 0; r < 3; ++r) {
            cam.H_(r, 0) = K(r, 0) * R(0, 0) + K(r, 1) * R(1, 0) + K(r, 2) * R(2, 0);
            cam.H_(r, 1) = K(r, 0) * R(0, 1) + K(r, 1) * R(1, 1) + K(r, 2) * R(2, 1);
        }
        const Vec3 kt = K.mul(T);
        cam.H_(0, 2) = kt.x;
        cam.H_(1, 2) = kt.y;
        cam.H_(2, 2) = kt.z;
        cam.H_inv_ = cam.H_.inverse();
        return cam;
    }

    const Mat3& K() const { return K_; }
    const Mat3& R() const { return R_; }
    const Vec3& T() const { return T_; }
    const Mat3& H() const { return H_; }
    const Mat3& K_inv() const { return K_inv_; }
    const Mat3& H_inv() const { return H_inv_; }

    // World (mm) to camera (mm).
    Vec3 world_to_camera(const Vec3& w) const { return R_.mul(w) + T_; }

    // Perspective projection of a camera-frame point to pixels.
    Vec2 project(const Vec3& p_cam) const {
        const Vec3 q = K_.mul(p_cam);
        if (q.z <= 0.0) throw BehindCameraError("point projects from behind the camera");
        return {q.x / q.z, q.y / q.z};
    }

private:
    Mat3 K_, R_, K_inv_, H_, H_inv_;
    Vec3 T_;
};

// Depth-1 ray point of a pixel: K^-1 (U, V, 1).
inline Vec3 back_project(const CameraModel& cam, const Vec2& uv) {
    return cam.K_inv().mul({uv.x, uv.y, 1.0});
}

struct PlaneDepth {
    double z_cc = 0.0;  // camera-frame depth of the plane point, mm
    double x_cw = 0.0;  // world-plane coordinates, mm
    double y_cw = 0.0;
};

// Intersects a pixel's ray with the reference plane through the homography:
// H^-1 (U, V, 1) = (X_cw/Z_cc, Y_cw/Z_cc, 1/Z_cc).
inline PlaneDepth plane_depth(const CameraModel& cam, const Vec2& uv) {
    const Vec3 w = cam.H_inv().mul({uv.x, uv.y, 1.0});
    const double z = 1.0 / w.z;
    if (!std::isfinite(z) || z <= 0.0) {
        throw BehindCameraError("reference-plane intersection is behind the camera");
    }
    return {z, w.x * z, w.y * z};
}

// Lifts the depth-1 ray point to the metric center point C' = Z_cc * ray.
inline Vec3 absolute_center(const CameraModel& cam, const Vec2& uv_center, const Vec3& ray_point) {
    return ray_point * plane_depth(cam, uv_center).z_cc;
}

struct AbsolutePose {
    Vec3 H_abs;  // head, camera frame, mm
    Vec3 C_abs;  // center
    Vec3 T_abs;  // tail
    double gap_head = 0.0;  // line-pair residual gaps, mm
    double gap_tail = 0.0;
    double length_mm = 0.0;
    double bend_ratio = 1.0;
    bool low_confidence = false;
};

struct LengthResult {
    double length_mm = 0.0;
    double bend_ratio = 1.0;
};

// Bending-corrected length: |H'T'| times arc/chord of the relative pose.
// Arc and chord are both measured in the bending plane; the template's
// half-pixel x jitter between head and tail is removed from the chord so
// the ratio is exactly >= 1.
inline LengthResult compute_length(const RelativePose& rel, const Vec3& abs_h,
                                   const Vec3& abs_t, const Template& tpl) {
    const double chord3_sq = (rel.h - rel.t).squared_norm();
    if (chord3_sq <= 1e-24) throw InvalidInputError("head and tail coincide, zero chord");

    const double dx0 = tpl.points0.points[tpl.head_idx].x - tpl.points0.points[tpl.tail_idx].x;
    const double sx = rel.params.s * dx0;
    const double chord_sq = std::max(chord3_sq - sx * sx, 0.0);
    if (chord_sq <= 1e-24) throw InvalidInputError("degenerate head-tail chord");

    LengthResult out;
    out.bend_ratio = rel.params.s * tpl.midline_arc / std::sqrt(chord_sq);
    out.length_mm = (abs_h - abs_t).norm() * out.bend_ratio;
    return out;
}

// Places head and tail in metric camera space. Each endpoint is the midpoint
// of the closest-point pair between its back-projected pixel ray (Line 1/2)
// and the line through C' along the relative-pose direction.
inline AbsolutePose locate_endpoints(const RelativePose& rel, const CameraModel& cam,
                                     const Vec3& c_abs, const Template& tpl,
                                     double gap_tol_frac = 0.05) {
    if (c_abs.z <= 0.0) throw BehindCameraError("center point must be in front of the camera");
    const Vec3 dh = rel.h - rel.c;
    const Vec3 dt = rel.t - rel.c;
    if (dh.norm() <= 1e-12 || dt.norm() <= 1e-12) {
        throw InvalidInputError("relative pose keypoints coincide");
    }

    // Only offset directions matter; normalizing keeps pixel-unit offsets
    // compatible with the mm-unit anchor point.
    const Line3 line_ch{c_abs, dh / dh.norm()};
    const Line3 line_ct{c_abs, dt / dt.norm()};
    const Line3 ray_h{{0, 0, 0}, back_project(cam, rel.h2d)};
    const Line3 ray_t{{0, 0, 0}, back_project(cam, rel.t2d)};

    AbsolutePose out;
    out.C_abs = c_abs;
    try {
        const LineClosestPoints head = closest_points_between_lines(ray_h, line_ch);
        const LineClosestPoints tail = closest_points_between_lines(ray_t, line_ct);
        out.H_abs = head.midpoint;
        out.T_abs = tail.midpoint;
        out.gap_head = head.gap;
        out.gap_tail = tail.gap;
    } catch (const DegenerateGeometryError&) {
        throw DegenerateGeometryError(
            "degenerate view: fish axis is aligned with the viewing ray");
    }

    const double gap_tol = gap_tol_frac * c_abs.norm();
    out.low_confidence = out.gap_head > gap_tol || out.gap_tail > gap_tol;

    const LengthResult len = compute_length(rel, out.H_abs, out.T_abs, tpl);
    out.length_mm = len.length_mm;
    out.bend_ratio = len.bend_ratio;
    return out;
}

}  // namespace fishpose
