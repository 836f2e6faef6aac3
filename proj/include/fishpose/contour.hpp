#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/geometry.hpp"
#include "fishpose/mask.hpp"
#include "fishpose/nn_grid.hpp"

namespace fishpose {

// Unordered 2D contour points in centered coordinates. Template contours
// additionally remember which 3D point each contour sample came from.
struct ContourSet {
    std::vector<Vec2> points;
    std::vector<std::int32_t> source_idx;  // empty for target contours
};

// Boundary of the mask translated so the image center is the origin.
inline ContourSet extract_target_contour(const BinaryMask& mask) {
    if (mask.area() == 0) throw InvalidInputError("target mask has no foreground pixels");
    const double ox = mask.width / 2.0;
    const double oy = mask.height / 2.0;
    ContourSet out;
    for (const auto& [x, y] : boundary_pixels(mask)) {
        out.points.push_back({static_cast<double>(x) - ox, static_cast<double>(y) - oy});
    }
    return out;
}

// Raster of a continuous point set; pixel (c, r) represents the point
// (x0 + c, y0 + r), so boundary pixels map back into the source frame.
struct RasterGrid {
    BinaryMask mask;
    double x0 = 0.0;
    double y0 = 0.0;
};

inline RasterGrid rasterize_grid(const std::vector<Vec2>& points, int pad) {
    if (points.empty()) throw InvalidInputError("cannot rasterize an empty point set");
    if (pad < 0) throw InvalidInputError("raster pad must be nonnegative");
    long min_x = LONG_MAX, min_y = LONG_MAX, max_x = LONG_MIN, max_y = LONG_MIN;
    for (const Vec2& p : points) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw InvalidInputError("cannot rasterize non-finite points");
        }
        const long ix = std::lround(p.x), iy = std::lround(p.y);
        min_x = std::min(min_x, ix);
        max_x = std::max(max_x, ix);
        min_y = std::min(min_y, iy);
        max_y = std::max(max_y, iy);
    }
    const long w = max_x - min_x + 1 + 2 * pad;
    const long h = max_y - min_y + 1 + 2 * pad;
    if (w * h > 100'000'000) {
        throw InvalidInputError("raster grid would exceed 100M pixels");
    }
    RasterGrid g;
    g.mask = BinaryMask(static_cast<int>(w), static_cast<int>(h));
    g.x0 = static_cast<double>(min_x - pad);
    g.y0 = static_cast<double>(min_y - pad);
    for (const Vec2& p : points) {
        g.mask.set(static_cast<int>(std::lround(p.x) - min_x) + pad,
                   static_cast<int>(std::lround(p.y) - min_y) + pad);
    }
    return g;
}

inline BinaryMask rasterize(const std::vector<Vec2>& points, int pad) {
    return rasterize_grid(points, pad).mask;
}

// Orthographic projection contour of a deformed template: drop z, rasterize,
// close pinholes, then walk the binary boundary. Points stay in the centered
// continuous frame and carry the index of the nearest source point.
inline ContourSet project_template_contour(const PointSet3& s4, int raster_pad = 2) {
    if (s4.points.empty()) throw InvalidInputError("cannot project an empty point set");
    std::vector<Vec2> xy;
    xy.reserve(s4.points.size());
    for (const Vec3& p : s4.points) xy.push_back(p.xy());

    RasterGrid g = rasterize_grid(xy, std::max(raster_pad, 1));
    const BinaryMask closed = morphological_close(g.mask);

    const PointGrid2 source_lookup(xy);
    ContourSet out;
    for (const auto& [cx, cy] : boundary_pixels(closed)) {
        const Vec2 p{g.x0 + cx, g.y0 + cy};
        double dist_sq = 0.0;
        const std::size_t src = source_lookup.nearest(p, &dist_sq);
        // Closing can promote filled pinholes to boundary pixels; those with
        // no source point nearby are rasterization artifacts, not silhouette.
        if (dist_sq > 1.5 * 1.5) continue;
        out.points.push_back(p);
        out.source_idx.push_back(static_cast<std::int32_t>(src));
    }
    return out;
}

}  // namespace fishpose
