#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "fishpose/clip_metrics.hpp"

using namespace fishpose;

TEST_CASE("aggregate_clip single value") {
    const ClipEstimate c = aggregate_clip({700.0});
    CHECK(c.final_length_mm == 700.0);
    CHECK(c.n_kept == 1);
    CHECK(c.kept_mask[0]);
}

TEST_CASE("aggregate_clip removes the 2-sigma outlier") {
    std::vector<double> lengths(9, 700.0);
    lengths.push_back(1400.0);
    const ClipEstimate c = aggregate_clip(lengths);
    // mean 770, population sigma 210; |1400-770| = 630 > 420.
    CHECK(c.n_kept == 9);
    CHECK_FALSE(c.kept_mask[9]);
    CHECK_THAT(c.final_length_mm, Catch::Matchers::WithinAbs(700.0, 1e-12));
}

TEST_CASE("aggregate_clip keeps everything at zero variance") {
    const ClipEstimate c = aggregate_clip({700.0, 700.0, 700.0});
    CHECK(c.n_kept == 3);
    CHECK(c.final_length_mm == 700.0);
}

TEST_CASE("aggregate_clip is permutation invariant and bounded") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(400.0, 1200.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v;
        for (int i = 0; i < 15; ++i) v.push_back(u(rng));
        const ClipEstimate a = aggregate_clip(v);
        std::vector<double> shuffled = v;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const ClipEstimate b = aggregate_clip(shuffled);
        CHECK_THAT(a.final_length_mm, Catch::Matchers::WithinAbs(b.final_length_mm, 1e-9));
        CHECK(a.n_kept == b.n_kept);

        double lo = 1e30, hi = -1e30;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (a.kept_mask[i]) {
                lo = std::min(lo, v[i]);
                hi = std::max(hi, v[i]);
            }
        CHECK(a.final_length_mm >= lo);
        CHECK(a.final_length_mm <= hi);
    }
}

TEST_CASE("aggregate_clip rejects empty and non-finite input") {
    CHECK_THROWS_AS(aggregate_clip({}), InvalidInputError);
    CHECK_THROWS_AS(aggregate_clip({700.0, std::nan("")}), InvalidInputError);
}

TEST_CASE("build_histogram places values in bins") {
    const LengthHistogram h = build_histogram({600.0, 600.0}, 500, 1000, 5);
    REQUIRE(h.mass.size() == 5);
    CHECK(h.mass[0] == 0.0);
    CHECK(h.mass[1] == 1.0);
    CHECK(h.mass[2] == 0.0);

    // One value per bin center: uniform mass.
    std::vector<double> centers;
    for (int b = 0; b < 5; ++b) centers.push_back(550.0 + 100.0 * b);
    const LengthHistogram u = build_histogram(centers, 500, 1000, 5);
    for (double m : u.mass) CHECK_THAT(m, Catch::Matchers::WithinAbs(0.2, 1e-12));
}

TEST_CASE("build_histogram drops out-of-range values and renormalizes") {
    const LengthHistogram h = build_histogram({450.0, 550.0, 650.0, 1200.0}, 500, 1000, 5);
    double total = 0;
    for (double m : h.mass) total += m;
    CHECK_THAT(total, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(h.mass[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK_THAT(h.mass[1], Catch::Matchers::WithinAbs(0.5, 1e-12));

    CHECK_THROWS_AS(build_histogram({100.0, 2000.0}, 500, 1000, 5), InvalidInputError);
    CHECK_THROWS_AS(build_histogram({600.0}, 1000, 500, 5), InvalidInputError);
}

TEST_CASE("compare_histograms on identical inputs is zero") {
    const LengthHistogram h = build_histogram({510, 620, 620, 830, 990}, 500, 1000, 10);
    const HistogramMetrics m = compare_histograms(h, h);
    CHECK(m.bias_mm == 0.0);
    CHECK(m.emd_mm == 0.0);
    CHECK(m.rmsd == 0.0);
    CHECK(std::abs(m.kl) < 1e-7);
}

TEST_CASE("compare_histograms adjacent point masses") {
    const LengthHistogram a = build_histogram({525.0}, 500, 1000, 10);  // bin 0
    const LengthHistogram b = build_histogram({575.0}, 500, 1000, 10);  // bin 1
    const HistogramMetrics m = compare_histograms(a, b);
    CHECK_THAT(m.emd_mm, Catch::Matchers::WithinAbs(50.0, 1e-9));  // one bin width
    CHECK_THAT(m.bias_mm, Catch::Matchers::WithinAbs(-50.0, 1e-9));
}

TEST_CASE("compare_histograms KL worked example") {
    LengthHistogram p, q;
    p.edges = {0.0, 1.0, 2.0};
    q.edges = p.edges;
    p.mass = {0.5, 0.5};
    q.mass = {0.25, 0.75};
    const HistogramMetrics m = compare_histograms(p, q);
    CHECK_THAT(m.kl, Catch::Matchers::WithinAbs(0.1438, 1e-4));
}

TEST_CASE("compare_histograms rejects mismatched edges") {
    const LengthHistogram a = build_histogram({600.0}, 500, 1000, 5);
    const LengthHistogram b = build_histogram({600.0}, 500, 1000, 10);
    CHECK_THROWS_AS(compare_histograms(a, b), InvalidInputError);
}

namespace {

LengthHistogram random_hist(std::mt19937& rng, std::size_t bins) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LengthHistogram h;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = 500.0 + 25.0 * static_cast<double>(b);
    h.mass.resize(bins);
    double total = 0;
    for (double& m : h.mass) {
        m = u(rng) < 0.25 ? 0.0 : u(rng);  // allow empty bins
        total += m;
    }
    if (total == 0) h.mass[0] = total = 1.0;
    for (double& m : h.mass) m /= total;
    return h;
}

}  // namespace

TEST_CASE("KL is nonnegative and EMD is a metric on random histograms") {
    std::mt19937 rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const LengthHistogram a = random_hist(rng, 20);
        const LengthHistogram b = random_hist(rng, 20);
        const LengthHistogram c = random_hist(rng, 20);

        const HistogramMetrics ab = compare_histograms(a, b);
        const HistogramMetrics ba = compare_histograms(b, a);
        const HistogramMetrics ac = compare_histograms(a, c);
        const HistogramMetrics cb = compare_histograms(c, b);

        CHECK(ab.kl >= -1e-7);
        CHECK_THAT(ab.emd_mm, Catch::Matchers::WithinAbs(ba.emd_mm, 1e-9));
        CHECK(ab.emd_mm <= ac.emd_mm + cb.emd_mm + 1e-9);
    }
}
