#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fishpose/errors.hpp"
#include "fishpose/localization.hpp"
#include "fishpose/mask.hpp"
#include "fishpose/pose_optimizer.hpp"

namespace fishpose {

// Shortest round-trip decimal form; keeps text output deterministic.
inline std::string format_double(double v) {
    std::array<char, 32> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidInputError("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw InvalidInputError("cannot open file for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw InvalidInputError("failed writing file: " + path);
}

namespace detail {

// Skips PGM whitespace and '#' comments, tracking the byte offset.
inline void pgm_skip(const std::string& b, std::size_t& i) {
    while (i < b.size()) {
        if (std::isspace(static_cast<unsigned char>(b[i]))) {
            ++i;
        } else if (b[i] == '#') {
            while (i < b.size() && b[i] != '\n') ++i;
        } else {
            break;
        }
    }
}

inline long pgm_int(const std::string& b, std::size_t& i, const char* what) {
    pgm_skip(b, i);
    long v = 0;
    const auto res = std::from_chars(b.data() + i, b.data() + b.size(), v);
    if (res.ec != std::errc() || res.ptr == b.data() + i) {
        throw ParseError(std::string("expected ") + what + " in PGM header", i);
    }
    i = static_cast<std::size_t>(res.ptr - b.data());
    if (v < 0) throw ParseError(std::string("negative ") + what + " in PGM header", i);
    return v;
}

}  // namespace detail

// Binary PGM (P5); any sample value above 127 is foreground.
inline BinaryMask read_mask(const std::string& path) {
    const std::string b = read_file_bytes(path);
    std::size_t i = 0;
    if (b.size() < 2 || b[0] != 'P' || b[1] != '5') {
        throw ParseError("not a binary PGM (missing P5 magic)", 0);
    }
    i = 2;
    const long w = detail::pgm_int(b, i, "width");
    const long h = detail::pgm_int(b, i, "height");
    const long maxval = detail::pgm_int(b, i, "maxval");
    if (w < 1 || h < 1) throw ParseError("PGM dimensions must be >= 1", i);
    if (maxval < 1 || maxval > 255) throw ParseError("unsupported PGM maxval", i);
    if (i >= b.size() || !std::isspace(static_cast<unsigned char>(b[i]))) {
        throw ParseError("expected single whitespace after maxval", i);
    }
    ++i;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (b.size() - i < need) {
        throw ParseError("truncated PGM payload", b.size());
    }
    BinaryMask m(static_cast<int>(w), static_cast<int>(h));
    for (std::size_t k = 0; k < need; ++k) {
        m.data[k] = static_cast<std::uint8_t>(b[i + k]) > 127 ? 1 : 0;
    }
    return m;
}

inline void write_mask(const std::string& path, const BinaryMask& m) {
    std::string out = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
    out.reserve(out.size() + m.data.size());
    for (std::uint8_t v : m.data) out.push_back(v ? static_cast<char>(255) : '\0');
    write_file_bytes(path, out);
}

namespace detail {

// "key value value ..." lines; '#' starts a comment.
inline std::map<std::string, std::vector<std::string>> read_kv_file(const std::string& path) {
    const std::string bytes = read_file_bytes(path);
    std::map<std::string, std::vector<std::string>> out;
    std::istringstream stream(bytes);
    std::string line;
    while (std::getline(stream, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key)) continue;
        std::vector<std::string> vals;
        std::string v;
        while (ls >> v) vals.push_back(v);
        out[key] = vals;
    }
    return out;
}

inline double parse_double_token(const std::string& tok, const std::string& ctx) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InvalidInputError("bad numeric value '" + tok + "' for " + ctx);
    }
}

inline std::vector<double> want_doubles(
    const std::map<std::string, std::vector<std::string>>& kv, const std::string& key,
    std::size_t n, const std::string& path) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw InvalidInputError("missing key '" + key + "' in " + path);
    }
    if (it->second.size() != n) {
        throw InvalidInputError("key '" + key + "' in " + path + " needs " + std::to_string(n) +
                                " values, got " + std::to_string(it->second.size()));
    }
    std::vector<double> out;
    out.reserve(n);
    for (const std::string& tok : it->second) out.push_back(parse_double_token(tok, key));
    return out;
}

}  // namespace detail

struct Calibration {
    CameraModel cam;
    int image_width = 0;
    int image_height = 0;
};

inline Calibration read_calibration(const std::string& path) {
    const auto kv = detail::read_kv_file(path);
    const auto k = detail::want_doubles(kv, "K", 9, path);
    const auto r = detail::want_doubles(kv, "R", 9, path);
    const auto t = detail::want_doubles(kv, "T", 3, path);
    const auto w = detail::want_doubles(kv, "image_width", 1, path);
    const auto h = detail::want_doubles(kv, "image_height", 1, path);

    Mat3 K, R;
    std::copy(k.begin(), k.end(), K.m.begin());
    std::copy(r.begin(), r.end(), R.m.begin());
    Calibration out{CameraModel::create(K, R, {t[0], t[1], t[2]}), static_cast<int>(w[0]),
                    static_cast<int>(h[0])};
    if (out.image_width < 1 || out.image_height < 1) {
        throw InvalidInputError("image dimensions in " + path + " must be >= 1");
    }
    return out;
}

inline void write_calibration(const std::string& path, const CameraModel& cam, int image_width,
                              int image_height) {
    std::ostringstream ss;
    ss << "K";
    for (double v : cam.K().m) ss << " " << format_double(v);
    ss << "\nR";
    for (double v : cam.R().m) ss << " " << format_double(v);
    ss << "\nT " << format_double(cam.T().x) << " " << format_double(cam.T().y) << " "
       << format_double(cam.T().z);
    ss << "\nimage_width " << image_width << "\nimage_height " << image_height << "\n";
    write_file_bytes(path, ss.str());
}

// Optimizer settings file: one "key value" per line, every default overridable.
inline OptimizerConfig read_optimizer_config(const std::string& path) {
    const auto kv = detail::read_kv_file(path);
    OptimizerConfig cfg;
    for (const auto& [key, vals] : kv) {
        if (vals.size() != 1) {
            throw InvalidInputError("config key '" + key + "' in " + path + " needs one value");
        }
        const double v = detail::parse_double_token(vals[0], key);
        if (key == "max_outer_iters") cfg.max_outer_iters = static_cast<int>(v);
        else if (key == "inner_steps") cfg.inner_steps = static_cast<int>(v);
        else if (key == "lr_shape") cfg.lr_shape = v;
        else if (key == "lr_trans") cfg.lr_trans = v;
        else if (key == "lr_angle") cfg.lr_angle = v;
        else if (key == "fd_step_s") cfg.fd_step_s = v;
        else if (key == "fd_step_kappa") cfg.fd_step_kappa = v;
        else if (key == "fd_step_trans") cfg.fd_step_trans = v;
        else if (key == "fd_step_angle") cfg.fd_step_angle = v;
        else if (key == "tol_per_point") cfg.tol_per_point = v;
        else if (key == "multi_start") cfg.multi_start = static_cast<int>(v);
        else if (key == "optimize_kappa") cfg.optimize_kappa = v != 0.0;
        else if (key == "raster_pad") cfg.raster_pad = static_cast<int>(v);
        else if (key == "seed") cfg.seed = static_cast<unsigned>(v);
        else throw InvalidInputError("unknown config key '" + key + "' in " + path);
    }
    cfg.validate();
    return cfg;
}

// Pulls one numeric column out of a CSV. Prefers a column named like
// `column`; without a header falls back to the first column. Rows whose
// cell is empty or non-numeric are skipped.
inline std::vector<double> read_lengths_csv(const std::string& path,
                                            const std::string& column = "length_mm") {
    const std::string bytes = read_file_bytes(path);
    std::istringstream stream(bytes);
    std::string line;
    std::vector<double> out;
    long col = -1;
    bool first = true;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            first = false;
            for (std::size_t i = 0; i < cells.size(); ++i)
                if (cells[i] == column) col = static_cast<long>(i);
            if (col >= 0) continue;  // header row consumed
            col = 0;
        }
        if (static_cast<std::size_t>(col) >= cells.size()) continue;
        const std::string& cell = cells[static_cast<std::size_t>(col)];
        if (cell.empty()) continue;
        try {
            std::size_t used = 0;
            const double v = std::stod(cell, &used);
            if (used == cell.size() && std::isfinite(v)) out.push_back(v);
        } catch (const std::exception&) {
            // non-numeric row (header or label), skip
        }
    }
    if (out.empty()) {
        throw InvalidInputError("no numeric '" + column + "' values found in " + path);
    }
    return out;
}

}  // namespace fishpose
