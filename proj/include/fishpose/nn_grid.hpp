#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "fishpose/errors.hpp"
#include "fishpose/geometry.hpp"

namespace fishpose {

// Uniform grid hash for 2D nearest-neighbor queries over a fixed point set.
// Contour points are dense along curves, so a flat grid beats a tree here.
class PointGrid2 {
public:
    explicit PointGrid2(const std::vector<Vec2>& pts, double cell = 4.0)
        : pts_(&pts), cell_(cell) {
        if (pts.empty()) throw InvalidInputError("point grid needs a nonempty set");
        min_x_ = min_y_ = std::numeric_limits<double>::infinity();
        double max_x = -std::numeric_limits<double>::infinity();
        double max_y = -std::numeric_limits<double>::infinity();
        for (const Vec2& p : pts) {
            min_x_ = std::min(min_x_, p.x);
            min_y_ = std::min(min_y_, p.y);
            max_x = std::max(max_x, p.x);
            max_y = std::max(max_y, p.y);
        }
        // Widen cells on huge extents so the grid allocation stays bounded.
        cell_ = std::max(cell_, std::max(max_x - min_x_, max_y - min_y_) / 2048.0);
        nx_ = static_cast<int>((max_x - min_x_) / cell_) + 1;
        ny_ = static_cast<int>((max_y - min_y_) / cell_) + 1;

        std::vector<int> count(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
        cell_of_.resize(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const int c = cell_index(pts[i]);
            cell_of_[i] = c;
            ++count[static_cast<std::size_t>(c) + 1];
        }
        offsets_ = std::move(count);
        for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] += offsets_[i - 1];
        order_.resize(pts.size());
        std::vector<int> cursor(offsets_.begin(), offsets_.end() - 1);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            order_[static_cast<std::size_t>(cursor[static_cast<std::size_t>(cell_of_[i])]++)] =
                static_cast<int>(i);
        }
    }

    // Index of the closest stored point; optionally reports the squared distance.
    std::size_t nearest(const Vec2& q, double* best_sq_out = nullptr) const {
        const auto& pts = *pts_;
        const int qc = static_cast<int>(std::floor((q.x - min_x_) / cell_));
        const int qr = static_cast<int>(std::floor((q.y - min_y_) / cell_));

        double best_sq = std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;

        // Chebyshev distance from the query cell to the occupied box; rings
        // closer than that are empty.
        int k = 0;
        if (qc < 0) k = std::max(k, -qc);
        if (qc >= nx_) k = std::max(k, qc - nx_ + 1);
        if (qr < 0) k = std::max(k, -qr);
        if (qr >= ny_) k = std::max(k, qr - ny_ + 1);

        const int k_max = std::max(nx_, ny_) + std::max({0, -qc, qc - nx_ + 1, -qr, qr - ny_ + 1});
        for (; k <= k_max; ++k) {
            scan_ring(q, qc, qr, k, best_sq, best_i);
            // Cells in ring k+1 or beyond hold points at distance >= k*cell.
            const double bound = static_cast<double>(k) * cell_;
            if (best_sq <= bound * bound) break;
        }
        if (best_sq_out) *best_sq_out = best_sq;
        (void)pts;
        return best_i;
    }

private:
    int cell_index(const Vec2& p) const {
        int cx = static_cast<int>((p.x - min_x_) / cell_);
        int cy = static_cast<int>((p.y - min_y_) / cell_);
        cx = std::min(std::max(cx, 0), nx_ - 1);
        cy = std::min(std::max(cy, 0), ny_ - 1);
        return cy * nx_ + cx;
    }

    void scan_cell(const Vec2& q, int cx, int cy, double& best_sq, std::size_t& best_i) const {
        const auto& pts = *pts_;
        const std::size_t c = static_cast<std::size_t>(cy) * nx_ + cx;
        for (int k = offsets_[c]; k < offsets_[c + 1]; ++k) {
            const std::size_t i = static_cast<std::size_t>(order_[static_cast<std::size_t>(k)]);
            const double d = (pts[i] - q).squared_norm();
            if (d < best_sq) {
                best_sq = d;
                best_i = i;
            }
        }
    }

    void scan_ring(const Vec2& q, int qc, int qr, int k, double& best_sq,
                   std::size_t& best_i) const {
        if (k == 0) {
            if (qc >= 0 && qc < nx_ && qr >= 0 && qr < ny_) scan_cell(q, qc, qr, best_sq, best_i);
            return;
        }
        const int x0 = std::max(qc - k, 0), x1 = std::min(qc + k, nx_ - 1);
        const int y0 = std::max(qr - k, 0), y1 = std::min(qr + k, ny_ - 1);
        if (x0 > x1 || y0 > y1) return;
        if (qr - k >= 0)
            for (int x = x0; x <= x1; ++x) scan_cell(q, x, qr - k, best_sq, best_i);
        if (qr + k < ny_)
            for (int x = x0; x <= x1; ++x) scan_cell(q, x, qr + k, best_sq, best_i);
        const int yy0 = std::max(y0, qr - k + 1), yy1 = std::min(y1, qr + k - 1);
        if (qc - k >= 0)
            for (int y = yy0; y <= yy1; ++y) scan_cell(q, qc - k, y, best_sq, best_i);
        if (qc + k < nx_)
            for (int y = yy0; y <= yy1; ++y) scan_cell(q, qc + k, y, best_sq, best_i);
    }

    const std::vector<Vec2>* pts_;
    double cell_;
    double min_x_ = 0.0, min_y_ = 0.0;
    int nx_ = 0, ny_ = 0;
    std::vector<int> cell_of_;
    std::vector<int> offsets_;
    std::vector<int> order_;
};

}  // namespace fishpose
