#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "fishpose/localization.hpp"

using namespace fishpose;

namespace {

Mat3 intrinsics(double f, double cx, double cy) {
    Mat3 k;
    k.m = {f, 0, cx, 0, f, cy, 0, 0, 1};
    return k;
}

// Column-convention rotation about x (world tilt).
Mat3 tilt_x(double a) { return rot_x(a).transposed(); }

const Template& default_tpl() {
    static const Template tpl = build_template(make_default_template_mask(), 2);
    return tpl;
}

}  // namespace

TEST_CASE("back projection basics") {
    const CameraModel id = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, 5000});
    const Vec3 p = back_project(id, {3, 4});
    CHECK(p.x == 3.0);
    CHECK(p.y == 4.0);
    CHECK(p.z == 1.0);

    const CameraModel cam =
        CameraModel::create(intrinsics(1000, 640, 360), Mat3::identity(), {0, 0, 4000});
    const Vec3 axis = back_project(cam, {640, 360});
    CHECK_THAT(axis.x, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(axis.y, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(axis.z, Catch::Matchers::WithinAbs(1.0, 1e-12));

    const Vec3 off = back_project(cam, {1640, 360});
    CHECK_THAT(off.x, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(off.y, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(off.z, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("plane homography is assembled from K, R1, R2 and T") {
    Mat3 k = intrinsics(1050, 630, 470);
    const Mat3 r = tilt_x(0.2);
    const Vec3 t{25, -60, 4800};
    const CameraModel cam = CameraModel::create(k, r, t);

    Mat3 cols;  // [R1 R2 T] assembled independently
    for (int row = 0; row < 3; ++row) {
        cols(row, 0) = r(row, 0);
        cols(row, 1) = r(row, 1);
    }
    cols(0, 2) = t.x;
    cols(1, 2) = t.y;
    cols(2, 2) = t.z;
    const Mat3 want = k * cols;
    for (int i = 0; i < 9; ++i) {
        CHECK_THAT(cam.H().m[static_cast<std::size_t>(i)],
                   Catch::Matchers::WithinAbs(want.m[static_cast<std::size_t>(i)], 1e-12));
    }
}

TEST_CASE("camera model validation") {
    Mat3 singular;
    singular.m = {0, 0, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(CameraModel::create(singular, Mat3::identity(), {0, 0, 1000}),
                    InvalidCalibrationError);

    Mat3 bad_k = intrinsics(1000, 640, 360);
    bad_k(2, 2) = 2.0;
    CHECK_THROWS_AS(CameraModel::create(bad_k, Mat3::identity(), {0, 0, 1000}),
                    InvalidCalibrationError);

    Mat3 not_rot = Mat3::identity();
    not_rot(0, 0) = 2.0;
    CHECK_THROWS_AS(CameraModel::create(intrinsics(1000, 0, 0), not_rot, {0, 0, 1000}),
                    InvalidCalibrationError);
}

TEST_CASE("plane depth on the axis-aligned reference plane") {
    const CameraModel cam = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, 5000});

    const PlaneDepth a = plane_depth(cam, {0.1, 0.02});
    CHECK_THAT(a.z_cc, Catch::Matchers::WithinRel(5000.0, 1e-12));
    CHECK_THAT(a.x_cw, Catch::Matchers::WithinRel(500.0, 1e-12));
    CHECK_THAT(a.y_cw, Catch::Matchers::WithinRel(100.0, 1e-12));

    const PlaneDepth b = plane_depth(cam, {0.0, 0.0});
    CHECK_THAT(b.z_cc, Catch::Matchers::WithinRel(5000.0, 1e-12));
    CHECK_THAT(b.x_cw, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(b.y_cw, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("plane depth inverts a forward projection under tilt") {
    const double tilt = 10.0 * std::numbers::pi / 180.0;
    const CameraModel cam =
        CameraModel::create(intrinsics(900, 640, 480), tilt_x(tilt), {0, 0, 5000});

    const Vec3 world{200, 300, 0};
    const Vec3 in_cam = cam.world_to_camera(world);
    const Vec2 uv = cam.project(in_cam);

    const PlaneDepth d = plane_depth(cam, uv);
    CHECK_THAT(d.z_cc, Catch::Matchers::WithinRel(in_cam.z, 1e-9));
    CHECK_THAT(d.x_cw, Catch::Matchers::WithinRel(200.0, 1e-9));
    CHECK_THAT(d.y_cw, Catch::Matchers::WithinRel(300.0, 1e-9));
}

TEST_CASE("plane depth rejects geometry behind the camera") {
    const CameraModel cam = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, -100});
    CHECK_THROWS_AS(plane_depth(cam, {0.0, 0.0}), BehindCameraError);
}

TEST_CASE("absolute center scales the ray by the plane depth") {
    const CameraModel cam = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, 5000});
    Vec3 c = absolute_center(cam, {0, 0}, {0, 0, 1});
    CHECK_THAT((c - Vec3{0, 0, 5000}).norm(), Catch::Matchers::WithinAbs(0.0, 1e-9));

    c = absolute_center(cam, {0.1, 0.02}, back_project(cam, {0.1, 0.02}));
    CHECK_THAT((c - Vec3{500, 100, 5000}).norm(), Catch::Matchers::WithinAbs(0.0, 1e-9));

    // Consistency: C' reprojects onto the center pixel.
    const CameraModel cam2 =
        CameraModel::create(intrinsics(1200, 620, 350), tilt_x(0.15), {30, -40, 4500});
    const Vec2 uv{700, 320};
    const Vec3 c2 = absolute_center(cam2, uv, back_project(cam2, uv));
    const Vec2 round_trip = cam2.project(c2);
    CHECK_THAT(round_trip.x, Catch::Matchers::WithinAbs(uv.x, 1e-9));
    CHECK_THAT(round_trip.y, Catch::Matchers::WithinAbs(uv.y, 1e-9));
}

TEST_CASE("compute_length flat fish has unit ratio") {
    const Template& tpl = default_tpl();
    DeformParams p;
    p.s = 1.3;
    p.gamma = 0.9;
    const DeformedTemplate d = apply_deformation(tpl, p);
    RelativePose rel;
    rel.h = d.head;
    rel.c = d.center;
    rel.t = d.tail;
    rel.params = p;

    const Vec3 abs_h{100, 0, 5000}, abs_t{-500, 0, 5000};
    const LengthResult r = compute_length(rel, abs_h, abs_t, tpl);
    CHECK_THAT(r.bend_ratio, Catch::Matchers::WithinRel(1.0, 1e-9));
    CHECK_THAT(r.length_mm, Catch::Matchers::WithinRel(600.0, 1e-9));
}

TEST_CASE("compute_length quarter-circle bending ratio") {
    const Template& tpl = default_tpl();
    DeformParams p;
    p.s = 1.0;
    p.kappa = (std::numbers::pi / 2.0) / tpl.midline_arc;  // quarter circle head to tail
    const DeformedTemplate d = apply_deformation(tpl, p);
    RelativePose rel;
    rel.h = d.head;
    rel.c = d.center;
    rel.t = d.tail;
    rel.params = p;

    const LengthResult r = compute_length(rel, {0, 0, 5000}, {100, 0, 5000}, tpl);
    const double want = (std::numbers::pi / 2.0) / std::sqrt(2.0);
    CHECK_THAT(r.bend_ratio, Catch::Matchers::WithinAbs(want, 1e-9));
    CHECK(r.bend_ratio >= 1.0 - 1e-9);
}

TEST_CASE("bend ratio is invariant under rigid parameters") {
    const Template& tpl = default_tpl();
    DeformParams p;
    p.s = 0.8;
    p.kappa = 1.0 / 400.0;
    auto ratio_of = [&](const DeformParams& q) {
        const DeformedTemplate d = apply_deformation(tpl, q);
        RelativePose rel;
        rel.h = d.head;
        rel.c = d.center;
        rel.t = d.tail;
        rel.params = q;
        return compute_length(rel, {0, 0, 1000}, {500, 0, 1000}, tpl).bend_ratio;
    };
    const double base = ratio_of(p);
    DeformParams moved = p;
    moved.tx = 55;
    moved.ty = -80;
    moved.alpha = 0.7;
    moved.beta = -0.3;
    moved.gamma = 2.9;
    CHECK_THAT(ratio_of(moved), Catch::Matchers::WithinRel(base, 1e-9));
}

TEST_CASE("locate_endpoints is exact on a fronto-parallel scene") {
    const Template& tpl = default_tpl();
    const CameraModel cam =
        CameraModel::create(intrinsics(1000, 640, 480), Mat3::identity(), {0, 0, 5000});

    // Flat fish lying on the reference plane, in millimeters.
    DeformParams p;
    p.s = 2.0;  // 2 mm per template pixel -> 600 mm fish
    p.gamma = 0.7;
    const DeformedTemplate d = apply_deformation(tpl, p);

    const Vec3 offset{120, -40, 0};  // fish center on the plane
    const Vec3 head_w = d.head - d.center + offset;
    const Vec3 center_w = offset;
    const Vec3 tail_w = d.tail - d.center + offset;

    RelativePose rel;
    rel.h = d.head;
    rel.c = d.center;
    rel.t = d.tail;
    rel.params = p;
    rel.h2d = cam.project(cam.world_to_camera(head_w));
    rel.c2d = cam.project(cam.world_to_camera(center_w));
    rel.t2d = cam.project(cam.world_to_camera(tail_w));

    const Vec3 c_abs = absolute_center(cam, rel.c2d, back_project(cam, rel.c2d));
    const AbsolutePose abs = locate_endpoints(rel, cam, c_abs, tpl);

    CHECK((abs.H_abs - cam.world_to_camera(head_w)).norm() <= 1e-6);
    CHECK((abs.T_abs - cam.world_to_camera(tail_w)).norm() <= 1e-6);
    CHECK(abs.gap_head <= 1e-6);
    CHECK(abs.gap_tail <= 1e-6);
    CHECK_FALSE(abs.low_confidence);
    CHECK_THAT(abs.length_mm, Catch::Matchers::WithinRel(2.0 * tpl.midline_arc, 1e-6));
    CHECK_THAT(abs.length_mm, Catch::Matchers::WithinRel((abs.H_abs - abs.T_abs).norm() * abs.bend_ratio, 1e-9));
}

TEST_CASE("locate_endpoints rejects coincident keypoints") {
    const Template& tpl = default_tpl();
    const CameraModel cam = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, 5000});
    RelativePose rel;
    rel.h = rel.c = {0, 0, 0};
    rel.t = {1, 1, 0};
    rel.h2d = rel.c2d = rel.t2d = {0.01, 0.01};
    CHECK_THROWS_AS(locate_endpoints(rel, cam, {0, 0, 5000}, tpl), InvalidInputError);
}

TEST_CASE("endpoint midpoints stay on both lines within half the gap") {
    const Template& tpl = default_tpl();
    const CameraModel cam =
        CameraModel::create(intrinsics(1100, 640, 480), tilt_x(0.12), {0, 0, 4000});
    DeformParams p;
    p.s = 1.5;
    p.kappa = 1.0 / 900.0;
    p.alpha = 0.15;
    p.beta = -0.1;
    p.gamma = 1.9;
    const DeformedTemplate d = apply_deformation(tpl, p);
    RelativePose rel;
    rel.h = d.head;
    rel.c = d.center;
    rel.t = d.tail;
    rel.params = p;
    rel.h2d = {700, 500};  // deliberately inconsistent pixels: nonzero gap
    rel.c2d = {640, 470};
    rel.t2d = {560, 430};

    const Vec3 c_abs = absolute_center(cam, rel.c2d, back_project(cam, rel.c2d));
    const AbsolutePose abs = locate_endpoints(rel, cam, c_abs, tpl);

    auto line_dist = [](const Vec3& q, const Line3& l) {
        const Vec3 d_unit = l.direction / l.direction.norm();
        const Vec3 w = q - l.origin;
        return (w - d_unit * w.dot(d_unit)).norm();
    };
    const Line3 ray_h{{0, 0, 0}, back_project(cam, rel.h2d)};
    const Line3 line_ch{c_abs, (rel.h - rel.c) / (rel.h - rel.c).norm()};
    CHECK(line_dist(abs.H_abs, ray_h) <= abs.gap_head / 2 + 1e-9);
    CHECK(line_dist(abs.H_abs, line_ch) <= abs.gap_head / 2 + 1e-9);
}

TEST_CASE("endpoint localization ignores the scale of the relative offsets") {
    const Template& tpl = default_tpl();
    const CameraModel cam =
        CameraModel::create(intrinsics(1000, 640, 480), tilt_x(0.1), {0, 0, 6000});
    DeformParams p;
    p.s = 1.1;
    p.kappa = 1.0 / 700.0;
    p.gamma = 0.4;
    const DeformedTemplate d = apply_deformation(tpl, p);

    RelativePose rel;
    rel.h = d.head;
    rel.c = d.center;
    rel.t = d.tail;
    rel.params = p;
    rel.h2d = {700, 500};
    rel.c2d = {640, 470};
    rel.t2d = {560, 430};
    const Vec3 c_abs = absolute_center(cam, rel.c2d, back_project(cam, rel.c2d));
    const AbsolutePose base = locate_endpoints(rel, cam, c_abs, tpl);

    RelativePose scaled = rel;
    for (double k : {0.03, 41.0}) {
        scaled.h = rel.c + (rel.h - rel.c) * k;
        scaled.t = rel.c + (rel.t - rel.c) * k;
        const AbsolutePose again = locate_endpoints(scaled, cam, c_abs, tpl);
        CHECK((again.H_abs - base.H_abs).norm() <= 1e-9 * base.H_abs.norm());
        CHECK((again.T_abs - base.T_abs).norm() <= 1e-9 * base.T_abs.norm());
    }
}

TEST_CASE("degenerate view: fish axis along the ray") {
    const Template& tpl = default_tpl();
    const CameraModel cam = CameraModel::create(Mat3::identity(), Mat3::identity(), {0, 0, 5000});
    RelativePose rel;
    rel.c = {0, 0, 0};
    rel.h = {0, 0, 150};  // straight along the optical axis
    rel.t = {0, 0, -150};
    rel.params.s = 1.0;
    rel.h2d = rel.c2d = rel.t2d = {0, 0};
    CHECK_THROWS_AS(locate_endpoints(rel, cam, {0, 0, 5000}, tpl), DegenerateGeometryError);
}
