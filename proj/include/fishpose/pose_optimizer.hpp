#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <thread>
#include <vector>

#include "fishpose/chamfer.hpp"
#include "fishpose/contour.hpp"
#include "fishpose/errors.hpp"
#include "fishpose/fish_template.hpp"
#include "fishpose/geometry.hpp"

namespace fishpose {

struct OptimizerConfig {
    int max_outer_iters = 60;
    int inner_steps = 5;

    // Per-group step scales on the unit-preconditioned gradient.
    double lr_shape = 0.5;  // s, kappa
    double lr_trans = 0.5;  // tx, ty
    double lr_angle = 0.5;  // alpha, beta, gamma

    // Finite-difference probe sizes.
    double fd_step_s = 1e-3;
    double fd_step_kappa = 1e-6;
    double fd_step_trans = 0.5;
    double fd_step_angle = 1e-3;

    // Outer loop stops once the loss improves by less than
    // tol_per_point * (contour sizes m + n).
    double tol_per_point = 1e-3;

    int multi_start = 5;         // number of initial gamma seeds
    bool optimize_kappa = true;  // false pins the fish flat (ablation mode)
    int raster_pad = 2;
    unsigned seed = 0;  // multi-start ordering; 0 keeps the canonical order

    void validate() const {
        if (max_outer_iters < 1 || inner_steps < 1 || multi_start < 1) {
            throw InvalidInputError("optimizer iteration counts must be >= 1");
        }
        if (lr_shape <= 0 || lr_trans <= 0 || lr_angle <= 0 || fd_step_s <= 0 ||
            fd_step_kappa <= 0 || fd_step_trans <= 0 || fd_step_angle <= 0 ||
            tol_per_point <= 0) {
            throw InvalidInputError("optimizer rates and steps must be > 0");
        }
    }
};

// Estimated relative pose: keypoints in the camera-aligned pixel frame plus
// their projections in whole-image coordinates.
struct RelativePose {
    Vec3 h;
    Vec3 c;
    Vec3 t;
    DeformParams params;
    double final_loss = 0.0;
    Vec2 h2d;
    Vec2 c2d;
    Vec2 t2d;
};

inline ContourSet render_template_contour(const Template& tpl, const DeformParams& p,
                                          int raster_pad = 2) {
    return project_template_contour(apply_deformation(tpl, p).s4, raster_pad);
}

// Chamfer loss with nearest-neighbor correspondences frozen at a reference
// parameter point. The raster/boundary steps are not differentiable, so each
// contour sample is bound to its source template point; moving the parameters
// moves those source points smoothly. Terms are grouped per source point:
//   sum_sigma  w‖P(p)‖² − 2 P(p)·A + B.
class FrozenCorrespondenceLoss {
public:
    struct Term {
        std::int32_t source = 0;  // template point index
        double weight = 0.0;      // number of anchors attached to this point
        Vec2 anchor_sum;
        double anchor_sq_sum = 0.0;
    };

    FrozenCorrespondenceLoss(const Template& tpl, const DeformParams& at,
                             const ContourSet& target, int raster_pad = 2)
        : tpl_(&tpl) {
        if (target.points.empty()) throw InvalidInputError("target contour is empty");
        const ContourSet tc = render_template_contour(tpl, at, raster_pad);

        std::vector<Term> by_source(tpl.n_points);
        auto add_anchor = [&](std::int32_t src, const Vec2& a) {
            Term& t = by_source[static_cast<std::size_t>(src)];
            t.source = src;
            t.weight += 1.0;
            t.anchor_sum = t.anchor_sum + a;
            t.anchor_sq_sum += a.squared_norm();
        };

        const PointGrid2 target_grid(target.points);
        double chamfer = 0.0;
        for (std::size_t i = 0; i < tc.points.size(); ++i) {
            double d;
            const std::size_t j = target_grid.nearest(tc.points[i], &d);
            chamfer += d;
            add_anchor(tc.source_idx[i], target.points[j]);
        }
        const PointGrid2 contour_grid(tc.points);
        for (const Vec2& g : target.points) {
            double d;
            const std::size_t i = contour_grid.nearest(g, &d);
            chamfer += d;
            add_anchor(tc.source_idx[i], g);
        }
        anchor_chamfer_ = chamfer;
        term_count_ = tc.points.size() + target.points.size();

        for (const Term& t : by_source)
            if (t.weight > 0.0) terms_.push_back(t);
    }

    // Smooth surrogate loss at parameters p.
    double value(const DeformParams& p) const {
        const Mat3 m = rotation_matrix(p.alpha, p.beta, p.gamma);
        const auto& pts = tpl_->points0.points;
        double loss = 0.0;
        for (const Term& t : terms_) {
            const Vec3& p0 = pts[static_cast<std::size_t>(t.source)];
            const double sy = p0.y * p.s;
            if (std::abs(sy * p.kappa) >= std::numbers::pi) {
                throw OverBendError("bend exceeds half cylinder in frozen loss");
            }
            double by, bz;
            if (p.kappa == 0.0) {
                by = sy;
                bz = 0.0;
            } else {
                detail::bend_yz(sy, p.kappa, by, bz);
            }
            const Vec3 v{p0.x * p.s + p.tx, by + p.ty, bz};
            const Vec3 r = v * m;
            loss += t.weight * (r.x * r.x + r.y * r.y) -
                    2.0 * (r.x * t.anchor_sum.x + r.y * t.anchor_sum.y) + t.anchor_sq_sum;
        }
        return loss;
    }

    // Central finite differences with per-group steps; falls back to a
    // one-sided difference when a probe lands past the over-bend boundary.
    std::array<double, 7> fd_gradient(const DeformParams& p, const OptimizerConfig& cfg) const {
        const std::array<double, 7> steps{cfg.fd_step_s,     cfg.fd_step_kappa,
                                          cfg.fd_step_trans, cfg.fd_step_trans,
                                          cfg.fd_step_angle, cfg.fd_step_angle,
                                          cfg.fd_step_angle};
        std::array<double, 7> grad{};
        for (int k = 0; k < 7; ++k) {
            const double hstep = steps[static_cast<std::size_t>(k)];
            DeformParams hi = p, lo = p;
            param_ref(hi, k) += hstep;
            param_ref(lo, k) -= hstep;
            bool have_hi = true, have_lo = true;
            double f_hi = 0.0, f_lo = 0.0;
            try {
                f_hi = value(hi);
            } catch (const Error&) {
                have_hi = false;
            }
            try {
                f_lo = value(lo);
            } catch (const Error&) {
                have_lo = false;
            }
            if (have_hi && have_lo) {
                grad[static_cast<std::size_t>(k)] = (f_hi - f_lo) / (2.0 * hstep);
            } else if (have_hi) {
                grad[static_cast<std::size_t>(k)] = (f_hi - value(p)) / hstep;
            } else if (have_lo) {
                grad[static_cast<std::size_t>(k)] = (value(p) - f_lo) / hstep;
            } else {
                throw OverBendError("parameters too close to the over-bend boundary");
            }
        }
        return grad;
    }

    double anchor_chamfer() const { return anchor_chamfer_; }
    std::size_t term_count() const { return term_count_; }
    const std::vector<Term>& terms() const { return terms_; }

    static double& param_ref(DeformParams& p, int k) {
        switch (k) {
            case 0: return p.s;
            case 1: return p.kappa;
            case 2: return p.tx;
            case 3: return p.ty;
            case 4: return p.alpha;
            case 5: return p.beta;
            default: return p.gamma;
        }
    }

private:
    const Template* tpl_;
    std::vector<Term> terms_;
    double anchor_chamfer_ = 0.0;
    std::size_t term_count_ = 0;
};

// Finite-difference gradient of the frozen-correspondence loss with
// correspondences rebuilt at `params`.
inline std::array<double, 7> fd_gradient(const BinaryMask& mask, const Template& tpl,
                                         const DeformParams& params,
                                         const OptimizerConfig& cfg = {}) {
    const ContourSet target = extract_target_contour(mask);
    const FrozenCorrespondenceLoss frozen(tpl, params, target, cfg.raster_pad);
    return frozen.fd_gradient(params, cfg);
}

namespace detail {

struct SingleFitResult {
    DeformParams params;
    double loss = std::numeric_limits<double>::infinity();
    std::vector<double> outer_losses;
};

inline double true_chamfer(const Template& tpl, const DeformParams& p,
                           const ContourSet& target, int raster_pad) {
    try {
        return chamfer_distance(render_template_contour(tpl, p, raster_pad), target);
    } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline void clamp_params(DeformParams& p, const Template& tpl, bool allow_bend) {
    p.s = std::clamp(p.s, 1e-3, 2e3);
    if (!allow_bend) {
        p.kappa = 0.0;
    } else {
        const double kappa_max = 0.98 * std::numbers::pi / std::max(p.s * tpl.y_absmax, 1e-9);
        p.kappa = std::clamp(p.kappa, -kappa_max, kappa_max);
    }
}

inline SingleFitResult fit_from_seed(const Template& tpl, const ContourSet& target,
                                     DeformParams init, const OptimizerConfig& cfg) {
    SingleFitResult res;
    clamp_params(init, tpl, cfg.optimize_kappa);
    DeformParams cur = init;
    double cur_loss = std::numeric_limits<double>::infinity();

    const std::array<double, 7> lr{cfg.lr_shape, cfg.lr_shape, cfg.lr_trans, cfg.lr_trans,
                                   cfg.lr_angle, cfg.lr_angle, cfg.lr_angle};

    // Escape probes for the even directions. The silhouette is even in
    // kappa, alpha and beta around zero, so frozen-correspondence gradients
    // vanish exactly on that manifold. Probes are paired with a scale
    // correction that holds the projected span fixed (the template is
    // y-aligned: alpha pitches the long axis, kappa curls it), so a probe
    // explores the degeneracy valley instead of fighting the fitted extent.
    auto sinc = [](double x) { return std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x; };
    auto kick_candidates = [&](const DeformParams& at) {
        std::vector<DeformParams> out;
        const double arc = at.s * tpl.midline_arc;
        if (cfg.optimize_kappa) {
            const double psi = at.kappa * arc;
            for (double dpsi : {0.3, -0.3, 0.12, -0.12}) {
                if (dpsi < 0.0 && std::abs(psi) < std::abs(dpsi) / 2.0) continue;
                DeformParams cand = at;
                const double psi2 = psi + (psi < 0 ? -dpsi : dpsi);
                cand.kappa = psi2 / arc;
                cand.s = at.s * sinc(psi / 2.0) / sinc(psi2 / 2.0);
                out.push_back(cand);
            }
        }
        for (double da : {0.12, -0.12, 0.05, -0.05}) {
            DeformParams cand = at;
            cand.alpha = at.alpha + da;
            if (std::abs(std::cos(cand.alpha)) > 0.2) {
                cand.s = at.s * std::cos(at.alpha) / std::cos(cand.alpha);
                out.push_back(cand);
            }
            DeformParams roll = at;
            roll.beta = at.beta + da;
            out.push_back(roll);
        }
        return out;
    };

    for (int outer = 0; outer < cfg.max_outer_iters; ++outer) {
        if (outer == 0) cur_loss = true_chamfer(tpl, cur, target, cfg.raster_pad);
        const double base_loss = cur_loss;

        const FrozenCorrespondenceLoss frozen(tpl, cur, target, cfg.raster_pad);
        const double n_terms = static_cast<double>(frozen.term_count());
        const double tol = cfg.tol_per_point * n_terms;

        // Unit scales: a one-unit change in any parameter moves the template
        // extremity by about one pixel.
        const double reach = std::max(cur.s * tpl.y_absmax, 1.0);
        const std::array<double, 7> unit{1.0 / reach,
                                         2.0 / (reach * reach),
                                         1.0,
                                         1.0,
                                         1.0 / reach,
                                         1.0 / reach,
                                         1.0 / reach};

        double scale = 1.0;
        for (int attempt = 0; attempt <= 5; ++attempt, scale *= 0.5) {
            DeformParams trial = cur;
            bool ok = true;
            for (int k = 0; k < cfg.inner_steps && ok; ++k) {
                std::array<double, 7> g;
                try {
                    g = frozen.fd_gradient(trial, cfg);
                } catch (const Error&) {
                    ok = false;
                    break;
                }
                for (int j = 0; j < 7; ++j) {
                    if (j == 1 && !cfg.optimize_kappa) continue;
                    const auto ju = static_cast<std::size_t>(j);
                    FrozenCorrespondenceLoss::param_ref(trial, j) -=
                        scale * lr[ju] * unit[ju] * unit[ju] * g[ju] / n_terms;
                }
                clamp_params(trial, tpl, cfg.optimize_kappa);
            }
            if (!ok) continue;
            const double trial_loss = true_chamfer(tpl, trial, target, cfg.raster_pad);
            if (trial_loss <= cur_loss) {
                cur = trial;
                cur_loss = trial_loss;
                break;
            }
        }

        // Once gradient descent stalls, try the even-direction escapes on the
        // re-rendered loss; stop when neither moves.
        if (base_loss - cur_loss < tol) {
            DeformParams best_kick = cur;
            double best_kick_loss = cur_loss;
            for (DeformParams cand : kick_candidates(cur)) {
                clamp_params(cand, tpl, cfg.optimize_kappa);
                const double l = true_chamfer(tpl, cand, target, cfg.raster_pad);
                if (l < best_kick_loss) {
                    best_kick_loss = l;
                    best_kick = cand;
                }
            }
            if (best_kick_loss < cur_loss - tol) {
                cur = best_kick;
                cur_loss = best_kick_loss;
            } else {
                res.outer_losses.push_back(cur_loss);
                break;
            }
        }
        res.outer_losses.push_back(cur_loss);
    }

    // Canonical bend sign: the z-mirror (kappa, alpha, beta) ->
    // (-kappa, -alpha, -beta) renders the same silhouette, so report the
    // non-negative-kappa representative.
    if (cur.kappa < 0.0) {
        cur.kappa = -cur.kappa;
        cur.alpha = -cur.alpha;
        cur.beta = -cur.beta;
    }
    res.params = cur;
    res.loss = cur_loss;
    return res;
}

inline double principal_axis_angle(const BinaryMask& mask) {
    const Vec2 c = mask.centroid();
    double cxx = 0, cxy = 0, cyy = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                const double dx = x - c.x, dy = y - c.y;
                cxx += dx * dx;
                cxy += dx * dy;
                cyy += dy * dy;
            }
    return 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
}

}  // namespace detail

// Fits the seven deformation parameters to a target mask by chamfer-distance
// descent. Correspondences are re-frozen every outer iteration; steps that
// raise the true loss are halved up to five times, so the accepted loss trace
// never increases. Multi-start over gamma handles the in-plane flip.
inline RelativePose estimate_relative_pose(const BinaryMask& mask, const Template& tpl,
                                           const OptimizerConfig& cfg = {},
                                           std::vector<double>* loss_trace = nullptr) {
    cfg.validate();
    const ContourSet target = extract_target_contour(mask);

    const double s0 =
        std::sqrt(static_cast<double>(mask.area()) / static_cast<double>(tpl.source_area));
    const Vec2 centroid = mask.centroid() - Vec2{mask.width / 2.0, mask.height / 2.0};
    const double axis = detail::principal_axis_angle(mask);

    constexpr double half_pi = std::numbers::pi / 2.0;
    std::vector<double> seeds{axis - half_pi, 0.0, half_pi, std::numbers::pi, 3.0 * half_pi};
    seeds.push_back(axis + half_pi);
    for (int k = 1; static_cast<int>(seeds.size()) < cfg.multi_start; ++k) {
        seeds.push_back(half_pi / 2.0 + k * half_pi);
    }
    seeds.resize(static_cast<std::size_t>(cfg.multi_start));
    if (cfg.seed != 0) {
        std::mt19937 rng(cfg.seed);
        std::shuffle(seeds.begin(), seeds.end(), rng);
    }

    std::vector<detail::SingleFitResult> results(seeds.size());
    auto run_seed = [&](std::size_t i) {
        DeformParams init;
        init.s = s0;
        init.gamma = seeds[i];
        const double cg = std::cos(seeds[i]), sg = std::sin(seeds[i]);
        init.tx = centroid.x * cg + centroid.y * sg;
        init.ty = -centroid.x * sg + centroid.y * cg;
        results[i] = detail::fit_from_seed(tpl, target, init, cfg);
    };
    if (seeds.size() > 1) {
        std::vector<std::thread> workers;
        workers.reserve(seeds.size());
        for (std::size_t i = 0; i < seeds.size(); ++i) workers.emplace_back(run_seed, i);
        for (auto& w : workers) w.join();
    } else {
        run_seed(0);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].loss < results[best].loss) best = i;
    if (loss_trace) *loss_trace = results[best].outer_losses;

    const DeformParams& p = results[best].params;
    const DeformedTemplate d = apply_deformation(tpl, p);
    const Vec2 img_center{mask.width / 2.0, mask.height / 2.0};

    RelativePose pose;
    pose.h = d.head;
    pose.c = d.center;
    pose.t = d.tail;
    pose.params = p;
    pose.final_loss = results[best].loss;
    pose.h2d = d.head.xy() + img_center;
    pose.c2d = d.center.xy() + img_center;
    pose.t2d = d.tail.xy() + img_center;
    return pose;
}

}  // namespace fishpose
