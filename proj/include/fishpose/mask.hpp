#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "fishpose/errors.hpp"
#include "fishpose/geometry.hpp"

namespace fishpose {

// Row-major binary image. One byte per pixel, 0 = background, 1 = foreground.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    BinaryMask() = default;
    BinaryMask(int w, int h) : width(w), height(h) {
        if (w < 1 || h < 1) throw InvalidInputError("mask dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    }

    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
    std::uint8_t at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    void set(int x, int y, std::uint8_t v = 1) {
        data[static_cast<std::size_t>(y) * width + x] = v;
    }

    std::int64_t area() const {
        std::int64_t n = 0;
        for (std::uint8_t v : data) n += (v != 0);
        return n;
    }

    // Mean of foreground pixel coordinates.
    Vec2 centroid() const {
        double sx = 0, sy = 0;
        std::int64_t n = 0;
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                if (at(x, y)) {
                    sx += x;
                    sy += y;
                    ++n;
                }
        if (n == 0) throw InvalidInputError("mask has no foreground pixels");
        return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
    }
};

// 3x3 dilation; pixels outside the grid stay background.
inline BinaryMask dilate3x3(const BinaryMask& m) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            const int x0 = std::max(0, x - 1), x1 = std::min(m.width - 1, x + 1);
            const int y0 = std::max(0, y - 1), y1 = std::min(m.height - 1, y + 1);
            for (int yy = y0; yy <= y1; ++yy)
                for (int xx = x0; xx <= x1; ++xx) out.set(xx, yy);
        }
    return out;
}

// 3x3 erosion; out-of-grid neighbors count as background.
inline BinaryMask erode3x3(const BinaryMask& m) {
    BinaryMask out(m.width, m.height);
    for (int y = 1; y + 1 < m.height; ++y)
        for (int x = 1; x + 1 < m.width; ++x) {
            bool all = true;
            for (int yy = y - 1; yy <= y + 1 && all; ++yy)
                for (int xx = x - 1; xx <= x + 1 && all; ++xx)
                    if (!m.at(xx, yy)) all = false;
            if (all) out.set(x, y);
        }
    return out;
}

// One closing pass (dilate then erode); fills 1-pixel rasterization holes.
inline BinaryMask morphological_close(const BinaryMask& m) {
    return erode3x3(dilate3x3(m));
}

// Foreground pixels with at least one background 4-neighbor; the image
// border counts as background.
inline std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& m) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            const bool edge = x == 0 || x == m.width - 1 || y == 0 || y == m.height - 1;
            if (edge || !m.at(x - 1, y) || !m.at(x + 1, y) || !m.at(x, y - 1) ||
                !m.at(x, y + 1)) {
                out.emplace_back(x, y);
            }
        }
    return out;
}

}  // namespace fishpose
