#pragma once

#include <limits>
#include <vector>

#include "fishpose/contour.hpp"
#include "fishpose/errors.hpp"
#include "fishpose/nn_grid.hpp"

namespace fishpose {

// Symmetric chamfer distance: sum of squared nearest-neighbor distances
// from each set into the other. Grid-accelerated.
inline double chamfer_distance(const ContourSet& a, const ContourSet& b) {
    if (a.points.empty() || b.points.empty()) {
        throw InvalidInputError("chamfer distance needs two nonempty point sets");
    }
    const PointGrid2 ga(a.points);
    const PointGrid2 gb(b.points);
    double sum_ab = 0.0;
    for (const Vec2& p : a.points) {
        double d;
        gb.nearest(p, &d);
        sum_ab += d;
    }
    double sum_ba = 0.0;
    for (const Vec2& q : b.points) {
        double d;
        ga.nearest(q, &d);
        sum_ba += d;
    }
    return sum_ab + sum_ba;
}

// O(n*m) double loop. Kept as the oracle for the grid path.
inline double chamfer_distance_bruteforce(const ContourSet& a, const ContourSet& b) {
    if (a.points.empty() || b.points.empty()) {
        throw InvalidInputError("chamfer distance needs two nonempty point sets");
    }
    double sum_ab = 0.0;
    for (const Vec2& p : a.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& q : b.points) best = std::min(best, (p - q).squared_norm());
        sum_ab += best;
    }
    double sum_ba = 0.0;
    for (const Vec2& q : b.points) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec2& p : a.points) best = std::min(best, (p - q).squared_norm());
        sum_ba += best;
    }
    return sum_ab + sum_ba;
}

}  // namespace fishpose
