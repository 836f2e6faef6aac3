#pragma once

// Single-view fish pose and length measurement from binary masks.

#include "fishpose/bfs_baseline.hpp"
#include "fishpose/chamfer.hpp"
#include "fishpose/clip_metrics.hpp"
#include "fishpose/contour.hpp"
#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/geometry.hpp"
#include "fishpose/io.hpp"
#include "fishpose/localization.hpp"
#include "fishpose/mask.hpp"
#include "fishpose/nn_grid.hpp"
#include "fishpose/pose_optimizer.hpp"
#include "fishpose/synthetic.hpp"

namespace fishpose {

struct FrameMeasurement {
    RelativePose relative;
    AbsolutePose absolute;
};

// Full single-frame pipeline: fit the relative pose, lift the center onto
// the reference plane, then intersect the endpoint rays.
inline FrameMeasurement measure_frame(const BinaryMask& mask, const Template& tpl,
                                      const CameraModel& cam, const OptimizerConfig& cfg = {}) {
    FrameMeasurement out;
    out.relative = estimate_relative_pose(mask, tpl, cfg);
    const Vec3 ray = back_project(cam, out.relative.c2d);
    const Vec3 c_abs = absolute_center(cam, out.relative.c2d, ray);
    out.absolute = locate_endpoints(out.relative, cam, c_abs, tpl);
    return out;
}

// Same pipeline with the brute-force-search baseline in place of the
// gradient optimizer.
inline FrameMeasurement measure_frame_bfs(const BinaryMask& mask, const Template& tpl,
                                          const CameraModel& cam, const ProjectionDatabase& db) {
    FrameMeasurement out;
    out.relative = bfs_estimate(mask, db, tpl);
    const Vec3 ray = back_project(cam, out.relative.c2d);
    const Vec3 c_abs = absolute_center(cam, out.relative.c2d, ray);
    out.absolute = locate_endpoints(out.relative, cam, c_abs, tpl);
    return out;
}

}  // namespace fishpose
