#pragma once

#include <cmath>
#include <string>

#include "fishpose/contour.hpp"
#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/io.hpp"
#include "fishpose/localization.hpp"
#include "fishpose/mask.hpp"

namespace fishpose {

// Forward model for oracle scenes: a deformed template fish, sized in
// millimeters, center pinned to the world Z = 0 reference plane, seen
// through a real perspective camera.
struct SceneSpec {
    int image_width = 1280;
    int image_height = 960;
    double focal_px = 1100.0;
    double cx = -1.0;  // < 0 means image center
    double cy = -1.0;

    double tilt_x_rad = 0.0;  // camera attitude w.r.t. the reference plane
    double tilt_y_rad = 0.0;
    double cam_tx_mm = 0.0;  // world->camera translation
    double cam_ty_mm = 0.0;
    double plane_dist_mm = 5000.0;

    double length_mm = 700.0;  // true arc length of the fish
    double bend_rad = 0.0;     // total head-tail bend angle
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double world_x_mm = 0.0;  // fish center on the reference plane
    double world_y_mm = 0.0;

    std::string template_path;  // empty = procedural default silhouette
    int template_stride = 1;
};

struct SyntheticScene {
    BinaryMask mask;
    CameraModel cam;
    DeformParams params;  // deformation used; s converts template px to mm
    double true_length_mm = 0.0;
    double mm_per_template_px = 0.0;
    Vec3 head_cam, center_cam, tail_cam;  // mm, camera frame
    Vec2 head_px, center_px, tail_px;
};

inline CameraModel make_scene_camera(const SceneSpec& spec) {
    Mat3 K;
    K.m = {spec.focal_px, 0, spec.cx < 0 ? spec.image_width / 2.0 : spec.cx,
           0, spec.focal_px, spec.cy < 0 ? spec.image_height / 2.0 : spec.cy,
           0, 0, 1};
    const Mat3 R = (rot_x(spec.tilt_x_rad) * rot_y(spec.tilt_y_rad)).transposed();
    return CameraModel::create(K, R, {spec.cam_tx_mm, spec.cam_ty_mm, spec.plane_dist_mm});
}

inline SyntheticScene render_synthetic(const SceneSpec& spec, const Template* tpl_in = nullptr) {
    Template tpl_local;
    const Template* tpl = tpl_in;
    if (!tpl) {
        const BinaryMask tm =
            spec.template_path.empty() ? make_default_template_mask() : read_mask(spec.template_path);
        tpl_local = build_template(tm, spec.template_stride);
        tpl = &tpl_local;
    }
    if (spec.length_mm <= 0.0 || spec.plane_dist_mm == 0.0) {
        throw InvalidSpecError("scene needs a positive fish length and a nonzero plane distance");
    }

    SyntheticScene scene;
    scene.cam = make_scene_camera(spec);
    scene.mm_per_template_px = spec.length_mm / tpl->midline_arc;

    DeformParams p;
    p.s = scene.mm_per_template_px;
    p.kappa = spec.bend_rad / spec.length_mm;  // arc * kappa = total bend
    p.alpha = spec.alpha;
    p.beta = spec.beta;
    p.gamma = spec.gamma;
    scene.params = p;
    scene.true_length_mm = spec.length_mm;

    const DeformedTemplate d = apply_deformation(*tpl, p);
    const Vec3 anchor{spec.world_x_mm, spec.world_y_mm, 0.0};

    std::vector<Vec2> px;
    px.reserve(d.s4.points.size());
    for (const Vec3& q : d.s4.points) {
        const Vec3 world = q - d.center + anchor;
        const Vec3 c = scene.cam.world_to_camera(world);
        if (c.z <= 0.0) throw InvalidSpecError("fish is behind the camera");
        const Vec3 proj = scene.cam.K().mul(c);
        const Vec2 uv{proj.x / proj.z, proj.y / proj.z};
        const long ix = std::lround(uv.x), iy = std::lround(uv.y);
        if (ix < 0 || ix >= spec.image_width || iy < 0 || iy >= spec.image_height) {
            throw InvalidSpecError("fish projects outside the image");
        }
        px.push_back(uv);
    }

    BinaryMask raster(spec.image_width, spec.image_height);
    for (const Vec2& uv : px) {
        raster.set(static_cast<int>(std::lround(uv.x)), static_cast<int>(std::lround(uv.y)));
    }
    scene.mask = morphological_close(raster);

    auto place = [&](const Vec3& q, Vec3& out_cam, Vec2& out_px) {
        const Vec3 world = q - d.center + anchor;
        out_cam = scene.cam.world_to_camera(world);
        out_px = scene.cam.project(out_cam);
    };
    place(d.head, scene.head_cam, scene.head_px);
    place(d.center, scene.center_cam, scene.center_px);
    place(d.tail, scene.tail_cam, scene.tail_px);
    return scene;
}

// Scene spec file: "key value" lines, angles in degrees.
inline SceneSpec read_scene_spec(const std::string& path) {
    const auto kv = detail::read_kv_file(path);
    SceneSpec spec;
    const double deg = std::numbers::pi / 180.0;
    for (const auto& [key, vals] : kv) {
        if (key == "template") {
            if (vals.size() != 1) throw InvalidInputError("'template' needs one value in " + path);
            spec.template_path = vals[0] == "default" ? std::string{} : vals[0];
            continue;
        }
        if (vals.size() != 1) {
            throw InvalidInputError("spec key '" + key + "' in " + path + " needs one value");
        }
        const double v = detail::parse_double_token(vals[0], key);
        if (key == "image_width") spec.image_width = static_cast<int>(v);
        else if (key == "image_height") spec.image_height = static_cast<int>(v);
        else if (key == "focal_px") spec.focal_px = v;
        else if (key == "cx") spec.cx = v;
        else if (key == "cy") spec.cy = v;
        else if (key == "tilt_x_deg") spec.tilt_x_rad = v * deg;
        else if (key == "tilt_y_deg") spec.tilt_y_rad = v * deg;
        else if (key == "cam_tx_mm") spec.cam_tx_mm = v;
        else if (key == "cam_ty_mm") spec.cam_ty_mm = v;
        else if (key == "plane_dist_mm") spec.plane_dist_mm = v;
        else if (key == "length_mm") spec.length_mm = v;
        else if (key == "bend_deg") spec.bend_rad = v * deg;
        else if (key == "alpha_deg") spec.alpha = v * deg;
        else if (key == "beta_deg") spec.beta = v * deg;
        else if (key == "gamma_deg") spec.gamma = v * deg;
        else if (key == "world_x_mm") spec.world_x_mm = v;
        else if (key == "world_y_mm") spec.world_y_mm = v;
        else if (key == "stride") spec.template_stride = static_cast<int>(v);
        else throw InvalidInputError("unknown scene key '" + key + "' in " + path);
    }
    return spec;
}

}  // namespace fishpose
