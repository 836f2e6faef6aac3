#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fishpose/chamfer.hpp"
#include "fishpose/contour.hpp"
#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/geometry.hpp"
#include "fishpose/io.hpp"
#include "fishpose/mask.hpp"
#include "fishpose/pose_optimizer.hpp"

namespace fishpose {

// Intersection over union of two equal-size masks.
inline double iou(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw InvalidInputError("iou needs masks of equal dimensions");
    }
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const bool pa = a.data[i] != 0, pb = b.data[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    if (uni == 0) throw InvalidInputError("iou of two empty masks is undefined");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// Deformation grid for the projection database. Translation is excluded;
// queries align by centroid. Bend is parameterized by the total head-tail
// bend angle so the grid is meaningful at every scale. Scale steps are
// geometric: length error from quantization is relative, so most of the
// entry budget goes into the scale dimension.
struct GridSpec {
    double s_min = 0.2;
    double s_max = 1.25;
    int s_count = 21;
    double bend_absmax = std::numbers::pi / 2.0;
    int bend_count = 9;  // symmetric, includes 0 when odd
    double alpha_absmax = 0.25;
    int alpha_count = 3;
    double beta_absmax = 0.25;
    int beta_count = 3;
    int gamma_count = 16;  // evenly spaced over [0, 2*pi)

    void validate() const {
        if (s_count < 1 || bend_count < 1 || alpha_count < 1 || beta_count < 1 ||
            gamma_count < 1) {
            throw InvalidInputError("grid step counts must be >= 1");
        }
        if (s_min <= 0.0 || s_max < s_min) throw InvalidInputError("bad grid scale range");
    }

    std::size_t total() const {
        return static_cast<std::size_t>(s_count) * static_cast<std::size_t>(bend_count) *
               static_cast<std::size_t>(alpha_count) * static_cast<std::size_t>(beta_count) *
               static_cast<std::size_t>(gamma_count);
    }
};

namespace detail {

inline double grid_value(double lo, double hi, int count, int i) {
    if (count == 1) return 0.5 * (lo + hi);
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

inline double grid_value_geometric(double lo, double hi, int count, int i) {
    if (count == 1) return std::sqrt(lo * hi);
    return lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
}

// Word-packed mask rows for fast shifted-intersection popcounts.
struct PackedMask {
    int width = 0;
    int height = 0;
    int words_per_row = 0;
    std::vector<std::uint64_t> words;

    static PackedMask pack(const BinaryMask& m) {
        PackedMask p;
        p.width = m.width;
        p.height = m.height;
        p.words_per_row = (m.width + 63) / 64;
        p.words.assign(static_cast<std::size_t>(p.words_per_row) * m.height, 0);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x)
                if (m.at(x, y)) {
                    p.words[static_cast<std::size_t>(y) * p.words_per_row + x / 64] |=
                        std::uint64_t{1} << (x % 64);
                }
        return p;
    }

    // 64 bits of row y starting at bit position x (may be negative or past
    // the end; out-of-range bits read as zero).
    std::uint64_t fetch(int y, int x) const {
        auto word_at = [&](int w) -> std::uint64_t {
            if (w < 0 || w >= words_per_row) return 0;
            return words[static_cast<std::size_t>(y) * words_per_row + w];
        };
        if (x >= 0) {
            const int w = x / 64, sh = x % 64;
            std::uint64_t v = word_at(w) >> sh;
            if (sh) v |= word_at(w + 1) << (64 - sh);
            return v;
        }
        const int sh = -x;
        if (sh >= 64) return 0;
        return word_at(0) << sh;
    }
};

// Popcount of the intersection of `a` with `b` shifted by (dx, dy).
inline std::int64_t shifted_intersection(const PackedMask& a, const PackedMask& b, int dx,
                                         int dy) {
    std::int64_t count = 0;
    for (int ya = 0; ya < a.height; ++ya) {
        const int yb = ya - dy;
        if (yb < 0 || yb >= b.height) continue;
        for (int w = 0; w < a.words_per_row; ++w) {
            const std::uint64_t va =
                a.words[static_cast<std::size_t>(ya) * a.words_per_row + w];
            if (!va) continue;
            count += std::popcount(va & b.fetch(yb, w * 64 - dx));
        }
    }
    return count;
}

inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

struct ProjectionEntry {
    DeformParams params;  // tx = ty = 0
    BinaryMask thumb;     // closed raster, tight bounding box
    std::int64_t area = 0;
    Vec2 centroid;     // thumbnail centroid in the continuous template frame
    Vec2 centroid_px;  // same centroid in thumbnail pixel coordinates
    detail::PackedMask packed;
};

struct ProjectionDatabase {
    std::vector<ProjectionEntry> entries;
    GridSpec grid;
    int skipped_overbend = 0;
};

// Renders one database thumbnail; empty when the grid point over-bends.
inline std::optional<ProjectionEntry> render_projection_entry(const Template& tpl,
                                                              const DeformParams& p) {
    PointSet3 s4;
    try {
        s4 = apply_deformation(tpl, p).s4;
    } catch (const OverBendError&) {
        return std::nullopt;
    }
    std::vector<Vec2> xy;
    xy.reserve(s4.points.size());
    for (const Vec3& q : s4.points) xy.push_back(q.xy());

    const RasterGrid g = rasterize_grid(xy, 2);
    ProjectionEntry e;
    e.params = p;
    e.thumb = morphological_close(g.mask);
    e.area = e.thumb.area();
    e.centroid_px = e.thumb.centroid();
    e.centroid = {e.centroid_px.x + g.x0, e.centroid_px.y + g.y0};
    e.packed = detail::PackedMask::pack(e.thumb);
    return e;
}

inline ProjectionDatabase build_projection_database(const Template& tpl, const GridSpec& grid) {
    grid.validate();
    const std::size_t total = grid.total();

    std::vector<std::optional<ProjectionEntry>> slots(total);
    detail::parallel_for(total, [&](std::size_t idx) {
        std::size_t rest = idx;
        const int gi = static_cast<int>(rest % static_cast<std::size_t>(grid.gamma_count));
        rest /= static_cast<std::size_t>(grid.gamma_count);
        const int bi = static_cast<int>(rest % static_cast<std::size_t>(grid.beta_count));
        rest /= static_cast<std::size_t>(grid.beta_count);
        const int ai = static_cast<int>(rest % static_cast<std::size_t>(grid.alpha_count));
        rest /= static_cast<std::size_t>(grid.alpha_count);
        const int ki = static_cast<int>(rest % static_cast<std::size_t>(grid.bend_count));
        const int si = static_cast<int>(rest / static_cast<std::size_t>(grid.bend_count));

        DeformParams p;
        p.s = detail::grid_value_geometric(grid.s_min, grid.s_max, grid.s_count, si);
        const double bend =
            detail::grid_value(-grid.bend_absmax, grid.bend_absmax, grid.bend_count, ki);
        p.kappa = bend / (p.s * tpl.midline_arc);
        p.alpha = detail::grid_value(-grid.alpha_absmax, grid.alpha_absmax, grid.alpha_count, ai);
        p.beta = detail::grid_value(-grid.beta_absmax, grid.beta_absmax, grid.beta_count, bi);
        p.gamma = 2.0 * std::numbers::pi * static_cast<double>(gi) /
                  static_cast<double>(grid.gamma_count);
        slots[idx] = render_projection_entry(tpl, p);
    });

    ProjectionDatabase db;
    db.grid = grid;
    db.entries.reserve(total);
    for (auto& s : slots) {
        if (s) {
            db.entries.push_back(std::move(*s));
        } else {
            ++db.skipped_overbend;
        }
    }
    return db;
}

// Argmax-IoU retrieval with centroid alignment. Ties prefer the flatter
// entry, then the lower index. Translation is solved afterwards so the
// re-materialized projection centroid lands on the query centroid.
inline RelativePose bfs_estimate(const BinaryMask& mask, const ProjectionDatabase& db,
                                 const Template& tpl) {
    if (db.entries.empty()) throw InvalidInputError("projection database is empty");
    if (mask.area() == 0) throw InvalidInputError("query mask has no foreground pixels");

    const detail::PackedMask query = detail::PackedMask::pack(mask);
    const std::int64_t query_area = mask.area();
    const Vec2 query_centroid = mask.centroid();

    struct Best {
        double iou = -1.0;
        double abs_kappa = 0.0;
        std::size_t index = 0;
        bool better_than(const Best& o) const {
            if (iou != o.iou) return iou > o.iou;
            if (abs_kappa != o.abs_kappa) return abs_kappa < o.abs_kappa;
            return index < o.index;
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n = db.entries.size();
    std::vector<Best> bests(hw);
    detail::parallel_for(hw, [&](std::size_t tid) {
        Best best;
        for (std::size_t i = tid; i < n; i += hw) {
            const ProjectionEntry& e = db.entries[i];
            const double bound =
                static_cast<double>(std::min(e.area, query_area)) /
                static_cast<double>(std::max(e.area, query_area));
            if (bound < best.iou) continue;
            const int off_x = static_cast<int>(std::lround(query_centroid.x - e.centroid_px.x));
            const int off_y = static_cast<int>(std::lround(query_centroid.y - e.centroid_px.y));
            const std::int64_t inter =
                detail::shifted_intersection(query, e.packed, off_x, off_y);
            const std::int64_t uni = query_area + e.area - inter;
            const Best cand{static_cast<double>(inter) / static_cast<double>(uni),
                            std::abs(e.params.kappa), i};
            if (cand.better_than(best)) best = cand;
        }
        bests[tid] = best;
    });
    Best best = bests[0];
    for (const Best& b : bests)
        if (b.better_than(best)) best = b;

    const ProjectionEntry& e = db.entries[best.index];
    DeformParams p = e.params;

    // Solve (tx, ty) so the projected centroid moves onto the query centroid.
    const Vec2 delta{query_centroid.x - mask.width / 2.0 - e.centroid.x,
                     query_centroid.y - mask.height / 2.0 - e.centroid.y};
    const Mat3 m = rotation_matrix(p.alpha, p.beta, p.gamma);
    const double a = m(0, 0), b = m(1, 0), c = m(0, 1), d = m(1, 1);
    const double det = a * d - b * c;
    if (std::abs(det) > 1e-9) {
        p.tx = (delta.x * d - delta.y * b) / det;
        p.ty = (a * delta.y - c * delta.x) / det;
    } else {
        p.tx = delta.x;
        p.ty = delta.y;
    }

    const DeformedTemplate dt = apply_deformation(tpl, p);
    const Vec2 img_center{mask.width / 2.0, mask.height / 2.0};
    RelativePose pose;
    pose.h = dt.head;
    pose.c = dt.center;
    pose.t = dt.tail;
    pose.params = p;
    pose.h2d = dt.head.xy() + img_center;
    pose.c2d = dt.center.xy() + img_center;
    pose.t2d = dt.tail.xy() + img_center;
    pose.final_loss =
        chamfer_distance(project_template_contour(dt.s4, 2), extract_target_contour(mask));
    return pose;
}

// Grid spec file: "key value" lines, angles in degrees.
inline GridSpec read_grid_spec(const std::string& path) {
    const auto kv = detail::read_kv_file(path);
    GridSpec g;
    const double deg = std::numbers::pi / 180.0;
    for (const auto& [key, vals] : kv) {
        if (vals.size() != 1) {
            throw InvalidInputError("grid key '" + key + "' in " + path + " needs one value");
        }
        const double v = detail::parse_double_token(vals[0], key);
        if (key == "s_min") g.s_min = v;
        else if (key == "s_max") g.s_max = v;
        else if (key == "s_count") g.s_count = static_cast<int>(v);
        else if (key == "bend_absmax_deg") g.bend_absmax = v * deg;
        else if (key == "bend_count") g.bend_count = static_cast<int>(v);
        else if (key == "alpha_absmax_deg") g.alpha_absmax = v * deg;
        else if (key == "alpha_count") g.alpha_count = static_cast<int>(v);
        else if (key == "beta_absmax_deg") g.beta_absmax = v * deg;
        else if (key == "beta_count") g.beta_count = static_cast<int>(v);
        else if (key == "gamma_count") g.gamma_count = static_cast<int>(v);
        else throw InvalidInputError("unknown grid key '" + key + "' in " + path);
    }
    g.validate();
    return g;
}

// On-disk layout: <dir>/index.tsv plus one PGM thumbnail per entry.
inline void save_projection_database(const ProjectionDatabase& db, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ostringstream index;
    index << "# fishpose projection database\n";
    index << "grid " << format_double(db.grid.s_min) << " " << format_double(db.grid.s_max) << " "
          << db.grid.s_count << " " << format_double(db.grid.bend_absmax) << " "
          << db.grid.bend_count << " " << format_double(db.grid.alpha_absmax) << " "
          << db.grid.alpha_count << " " << format_double(db.grid.beta_absmax) << " "
          << db.grid.beta_count << " " << db.grid.gamma_count << "\n";
    index << "skipped_overbend " << db.skipped_overbend << "\n";
    for (std::size_t i = 0; i < db.entries.size(); ++i) {
        const ProjectionEntry& e = db.entries[i];
        char name[32];
        std::snprintf(name, sizeof(name), "entry_%06zu.pgm", i);
        write_mask((fs::path(dir) / name).string(), e.thumb);
        index << name << " " << format_double(e.params.s) << " " << format_double(e.params.kappa)
              << " " << format_double(e.params.alpha) << " " << format_double(e.params.beta)
              << " " << format_double(e.params.gamma) << " " << format_double(e.centroid.x)
              << " " << format_double(e.centroid.y) << " " << e.area << "\n";
    }
    write_file_bytes((fs::path(dir) / "index.tsv").string(), index.str());
}

inline ProjectionDatabase load_projection_database(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string index_path = (fs::path(dir) / "index.tsv").string();
    const std::string bytes = read_file_bytes(index_path);
    std::istringstream stream(bytes);
    std::string line;
    ProjectionDatabase db;
    while (std::getline(stream, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "grid") {
            ls >> db.grid.s_min >> db.grid.s_max >> db.grid.s_count >> db.grid.bend_absmax >>
                db.grid.bend_count >> db.grid.alpha_absmax >> db.grid.alpha_count >>
                db.grid.beta_absmax >> db.grid.beta_count >> db.grid.gamma_count;
            continue;
        }
        if (head == "skipped_overbend") {
            ls >> db.skipped_overbend;
            continue;
        }
        ProjectionEntry e;
        ls >> e.params.s >> e.params.kappa >> e.params.alpha >> e.params.beta >> e.params.gamma >>
            e.centroid.x >> e.centroid.y >> e.area;
        if (!ls) throw InvalidInputError("malformed database index line in " + index_path);
        e.thumb = read_mask((fs::path(dir) / head).string());
        e.centroid_px = e.thumb.centroid();
        e.packed = detail::PackedMask::pack(e.thumb);
        db.entries.push_back(std::move(e));
    }
    if (db.entries.empty()) {
        throw InvalidInputError("projection database at " + dir + " has no entries");
    }
    return db;
}

}  // namespace fishpose
