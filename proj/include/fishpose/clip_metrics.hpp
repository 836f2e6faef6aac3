#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fishpose/errors.hpp"

namespace fishpose {

// One fish, one clip: per-frame lengths reduced to a single measurement.
struct ClipEstimate {
    std::vector<double> frame_lengths;
    std::vector<bool> kept_mask;
    double final_length_mm = 0.0;
    std::size_t n_kept = 0;
};

// Gaussian outlier rejection: drop frames farther than 2 sigma from the
// mean (population sigma, single pass), then average the rest.
inline ClipEstimate aggregate_clip(const std::vector<double>& frame_lengths) {
    if (frame_lengths.empty()) throw InvalidInputError("clip has no frame lengths");
    for (double v : frame_lengths)
        if (!std::isfinite(v)) throw InvalidInputError("frame lengths must be finite");

    const double n = static_cast<double>(frame_lengths.size());
    double mean = 0.0;
    for (double v : frame_lengths) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : frame_lengths) var += (v - mean) * (v - mean);
    var /= n;
    const double sigma = std::sqrt(var);

    ClipEstimate out;
    out.frame_lengths = frame_lengths;
    out.kept_mask.assign(frame_lengths.size(), true);
    if (sigma > 0.0) {
        for (std::size_t i = 0; i < frame_lengths.size(); ++i)
            out.kept_mask[i] = std::abs(frame_lengths[i] - mean) < 2.0 * sigma;
    }
    double sum = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < frame_lengths.size(); ++i)
        if (out.kept_mask[i]) {
            sum += frame_lengths[i];
            ++kept;
        }
    if (kept == 0) {  // everything beyond 2 sigma: keep all instead
        std::fill(out.kept_mask.begin(), out.kept_mask.end(), true);
        sum = mean * n;
        kept = frame_lengths.size();
    }
    out.n_kept = kept;
    out.final_length_mm = sum / static_cast<double>(kept);
    return out;
}

// Normalized length distribution over equal-width bins.
struct LengthHistogram {
    std::vector<double> edges;  // n_bins + 1, strictly ascending, mm
    std::vector<double> mass;   // n_bins, sums to 1

    std::size_t n_bins() const { return mass.size(); }
    double bin_width() const { return edges[1] - edges[0]; }
    double bin_center(std::size_t b) const { return 0.5 * (edges[b] + edges[b + 1]); }
};

// Values outside [lo, hi) are dropped; mass is normalized over what remains.
inline LengthHistogram build_histogram(const std::vector<double>& lengths, double lo = 500.0,
                                       double hi = 1000.0, std::size_t n_bins = 20) {
    if (n_bins < 1) throw InvalidInputError("histogram needs at least one bin");
    if (!(hi > lo)) throw InvalidInputError("histogram range must have hi > lo");

    LengthHistogram h;
    h.edges.resize(n_bins + 1);
    const double w = (hi - lo) / static_cast<double>(n_bins);
    for (std::size_t b = 0; b <= n_bins; ++b) h.edges[b] = lo + w * static_cast<double>(b);
    h.mass.assign(n_bins, 0.0);

    std::size_t used = 0;
    for (double v : lengths) {
        if (!(v >= lo) || !(v < hi)) continue;
        auto b = static_cast<std::size_t>((v - lo) / w);
        b = std::min(b, n_bins - 1);
        h.mass[b] += 1.0;
        ++used;
    }
    if (used == 0) throw InvalidInputError("no lengths fall inside the histogram range");
    for (double& m : h.mass) m /= static_cast<double>(used);
    return h;
}

struct HistogramMetrics {
    double bias_mm = 0.0;  // difference of histogram means
    double emd_mm = 0.0;   // exact 1D earth mover's distance
    double rmsd = 0.0;     // root mean square deviation of bin masses
    double kl = 0.0;       // KL(pred || gt), natural log, gt eps-smoothed
};

inline HistogramMetrics compare_histograms(const LengthHistogram& pred,
                                           const LengthHistogram& gt) {
    if (pred.edges.size() != gt.edges.size()) {
        throw InvalidInputError("histograms have different bin counts");
    }
    for (std::size_t b = 0; b < pred.edges.size(); ++b)
        if (pred.edges[b] != gt.edges[b]) {
            throw InvalidInputError("histograms have mismatched bin edges");
        }

    const std::size_t n = pred.n_bins();
    HistogramMetrics m;

    double mean_p = 0.0, mean_g = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        mean_p += pred.mass[b] * pred.bin_center(b);
        mean_g += gt.mass[b] * gt.bin_center(b);
    }
    m.bias_mm = mean_p - mean_g;

    double cdf_diff = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        cdf_diff += pred.mass[b] - gt.mass[b];
        m.emd_mm += std::abs(cdf_diff) * pred.bin_width();
    }

    double sq = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const double d = pred.mass[b] - gt.mass[b];
        sq += d * d;
    }
    m.rmsd = std::sqrt(sq / static_cast<double>(n));

    constexpr double eps = 1e-9;
    const double denom = 1.0 + eps * static_cast<double>(n);
    for (std::size_t b = 0; b < n; ++b) {
        if (pred.mass[b] <= 0.0) continue;
        const double q = (gt.mass[b] + eps) / denom;
        m.kl += pred.mass[b] * std::log(pred.mass[b] / q);
    }
    return m;
}

}  // namespace fishpose
