#include "pmgeo/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/geometry.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/metrics.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/refine.hpp"
#include "pmgeo/synth.hpp"

namespace pmgeo {

namespace {

// ---------------------------------------------------------------------------
// Brute-force oracles. These share no code with the solvers: plain
// enumeration and grid searches over independently written objectives.
// ---------------------------------------------------------------------------

double direct_objective(std::span<const AxisSeries> axes, double a, std::span<const double> b) {
    double sum = 0.0;
    for (size_t k = 0; k < axes.size(); ++k)
        for (size_t i = 0; i < axes[k].src.size(); ++i)
            sum += axes[k].w[i] * std::fabs(a * axes[k].src[i] + b[k] - axes[k].dst[i]);
    return sum;
}

// Scale-only: the convex piecewise-linear objective attains its minimum at a
// breakpoint dst/src; evaluate all of them.
double oracle_scale_only(std::span<const AxisSeries> axes) {
    std::vector<double> breakpoints;
    for (const auto& ax : axes)
        for (size_t i = 0; i < ax.src.size(); ++i)
            if (ax.src[i] != 0.0 && ax.w[i] > 0.0) breakpoints.push_back(ax.dst[i] / ax.src[i]);
    std::sort(breakpoints.begin(), breakpoints.end());
    std::vector<double> zero(axes.size(), 0.0);
    double best_f = std::numeric_limits<double>::infinity();
    for (double a : breakpoints) best_f = std::min(best_f, direct_objective(axes, a, zero));
    // smallest minimizer on flat intervals, matching the lower-median rule
    for (double a : breakpoints)
        if (direct_objective(axes, a, zero) <= best_f + 1e-12 * std::max(1.0, best_f)) return a;
    return breakpoints.front();
}

// Per-axis inner optimum by sorting and cumulative weights (independent
// rewrite of the weighted median).
double oracle_inner_shift(std::span<const double> src, std::span<const double> dst,
                          std::span<const double> w, double a) {
    std::vector<std::pair<double, double>> tv;  // (t, w)
    tv.reserve(src.size());
    double total = 0.0;
    for (size_t i = 0; i < src.size(); ++i) {
        tv.emplace_back(dst[i] - a * src[i], w[i]);
        total += w[i];
    }
    std::stable_sort(tv.begin(), tv.end(),
                     [](const auto& p, const auto& q) { return p.first < q.first; });
    double cum = 0.0;
    for (const auto& [t, wi] : tv) {
        cum += wi;
        if (cum >= 0.5 * total) return t;
    }
    return tv.back().first;
}

double oracle_g(std::span<const AxisSeries> axes, double a, std::vector<double>* b_out) {
    double g = 0.0;
    for (size_t k = 0; k < axes.size(); ++k) {
        double b = oracle_inner_shift(axes[k].src, axes[k].dst, axes[k].w, a);
        if (b_out) (*b_out)[k] = b;
        for (size_t i = 0; i < axes[k].src.size(); ++i)
            g += axes[k].w[i] * std::fabs(a * axes[k].src[i] + b - axes[k].dst[i]);
    }
    return g;
}

// Scale+shift: dense log-spaced grid over a in [1e-3, 1e3] followed by
// golden-section refinement of the convex outer objective.
double oracle_scale_shift(std::span<const AxisSeries> axes, std::vector<double>* b_out) {
    const int grid = 240;
    double best_a = 1.0, best_g = std::numeric_limits<double>::infinity();
    int best_k = 0;
    for (int k = 0; k <= grid; ++k) {
        double a = std::pow(10.0, -3.0 + 6.0 * k / grid);
        double g = oracle_g(axes, a, nullptr);
        if (g < best_g) {
            best_g = g;
            best_a = a;
            best_k = k;
        }
    }
    double lo = std::pow(10.0, -3.0 + 6.0 * std::max(0, best_k - 1) / double(grid));
    double hi = std::pow(10.0, -3.0 + 6.0 * std::min(grid, best_k + 1) / double(grid));
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double g1 = oracle_g(axes, x1, nullptr);
    double g2 = oracle_g(axes, x2, nullptr);
    for (int it = 0; it < 160; ++it) {
        if (g1 <= g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = oracle_g(axes, x1, nullptr);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = oracle_g(axes, x2, nullptr);
        }
    }
    double a = 0.5 * (lo + hi);
    if (best_g < oracle_g(axes, a, nullptr)) a = best_a;
    if (b_out) oracle_g(axes, a, b_out);
    return a;
}

// Shift-only: the optimum per axis is attained at a data difference;
// enumerate them all.
std::vector<double> oracle_shift_only(std::span<const AxisSeries> axes) {
    std::vector<double> shifts(axes.size(), 0.0);
    for (size_t k = 0; k < axes.size(); ++k) {
        const auto& ax = axes[k];
        std::vector<double> candidates;
        for (size_t c = 0; c < ax.src.size(); ++c) candidates.push_back(ax.dst[c] - ax.src[c]);
        std::sort(candidates.begin(), candidates.end());
        auto f_at = [&](double b) {
            double f = 0.0;
            for (size_t i = 0; i < ax.src.size(); ++i)
                f += ax.w[i] * std::fabs(ax.src[i] + b - ax.dst[i]);
            return f;
        };
        double best_f = std::numeric_limits<double>::infinity();
        for (double b : candidates) best_f = std::min(best_f, f_at(b));
        for (double b : candidates)
            if (f_at(b) <= best_f + 1e-12 * std::max(1.0, best_f)) {
                shifts[k] = b;
                break;
            }
    }
    return shifts;
}

// ---------------------------------------------------------------------------
// Instance generators.
// ---------------------------------------------------------------------------

struct PointInstance {
    std::vector<Vec3> src, dst;
    std::vector<double> w;
    std::array<std::vector<double>, 3> sx, sy;  // axis views
    std::vector<AxisSeries> axes;

    void build_axes() {
        axes.clear();
        for (int k = 0; k < 3; ++k) {
            sx[k].resize(src.size());
            sy[k].resize(src.size());
            for (size_t i = 0; i < src.size(); ++i) {
                sx[k][i] = src[i][k];
                sy[k][i] = dst[i][k];
            }
            axes.push_back(AxisSeries{sx[k], sy[k], w});
        }
    }
};

PointInstance random_point_instance(SplitMix64& rng, int n, bool with_shift,
                                    double outlier_frac) {
    PointInstance inst;
    double s = rng.uniform(0.5, 3.0);
    Vec3 t = with_shift ? Vec3{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}
                        : Vec3{0, 0, 0};
    for (int i = 0; i < n; ++i) {
        Vec3 p{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.5, 9.0)};
        Vec3 q = s * p + t;
        q.x += 0.05 * rng.normal();
        q.y += 0.05 * rng.normal();
        q.z += 0.05 * rng.normal();
        // corruptions are gross but correlation-preserving so the optimum
        // stays positive and the instance is well-posed
        if (rng.uniform() < outlier_frac)
            q = q * rng.uniform(3.0, 8.0) + Vec3{rng.uniform(-5, 5), rng.uniform(-5, 5),
                                                 rng.uniform(0, 5)};
        inst.src.push_back(p);
        inst.dst.push_back(q);
        inst.w.push_back(1.0 / std::max(0.1, std::fabs(q.z)));
    }
    inst.build_axes();
    return inst;
}

struct DepthInstance {
    std::vector<double> src, dst, w;
    AxisSeries axis() const { return AxisSeries{src, dst, w}; }
};

DepthInstance random_depth_instance(SplitMix64& rng, int n, bool with_shift,
                                    double outlier_frac) {
    DepthInstance inst;
    double s = rng.uniform(0.5, 3.0);
    double b = with_shift ? rng.uniform(-1.5, 1.5) : 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.uniform(0.5, 9.0);
        double y = s * z + b + 0.03 * rng.normal();
        if (rng.uniform() < outlier_frac) y *= rng.uniform(3.0, 10.0);
        inst.src.push_back(z);
        inst.dst.push_back(std::max(0.05, y));
        inst.w.push_back(1.0 / z);
    }
    return inst;
}

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

// ---------------------------------------------------------------------------

struct Checker {
    std::ostream& out;
    SelftestResult result;

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        if (ok) {
            ++result.passed;
            out << "PASS " << name << "\n";
        } else {
            ++result.failed;
            result.failures.push_back(name);
            out << "FAIL " << name << (detail.empty() ? "" : ": " + detail) << "\n";
        }
    }
};

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

// Fronto-parallel faces only: boundary-shift artifacts on this scene carry
// step-scale depth errors everywhere in their footprint.
SceneSpec boxes_scene(uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.width = 64;
    spec.height = 64;
    spec.focal_px = 64.0;
    spec.background_depth = 8.0;
    Primitive near_box;
    near_box.kind = Primitive::Kind::box;
    near_box.center = Vec3{-0.9, 0.4, 3.2};
    near_box.size = Vec3{1.4, 1.6, 0.6};
    Primitive far_box;
    far_box.kind = Primitive::Kind::box;
    far_box.center = Vec3{1.2, -0.7, 5.0};
    far_box.size = Vec3{1.6, 1.2, 0.5};
    spec.primitives = {near_box, far_box};
    return spec;
}

SceneSpec desk_scene(uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.width = 64;
    spec.height = 64;
    spec.focal_px = 64.0;
    spec.background_depth = 8.0;
    Primitive sphere;
    sphere.kind = Primitive::Kind::sphere;
    sphere.center = Vec3{-0.9, 0.3, 4.2};
    sphere.radius = 1.1;
    Primitive box;
    box.kind = Primitive::Kind::box;
    box.center = Vec3{1.3, -0.6, 5.5};
    box.size = Vec3{1.4, 1.8, 1.0};
    Primitive slab;
    slab.kind = Primitive::Kind::plane;
    slab.center = Vec3{0.0, 1.8, 6.5};
    slab.normal = Vec3{0.15, 0.4, -1.0};
    slab.radius = 2.2;
    spec.primitives = {sphere, box, slab};
    return spec;
}

}  // namespace

SelftestResult run_selftest(const RunConfig& cfg, std::ostream& out) {
    Checker c{out, {}};
    AlignOptions aopts;
    aopts.seed = cfg.seed;
    aopts.pair_samples = cfg.align_pair_samples;
    aopts.rel_tol = cfg.align_rel_tol;

    // --- solver vs oracle, point scale-only -------------------------------
    {
        SplitMix64 rng(cfg.seed + 1);
        double worst_p = 0.0, worst_o = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(491));
            PointInstance inst = random_point_instance(rng, n, false, 0.25);
            AffineAlignment got = solve_scale_l1(inst.src, inst.dst, inst.w);
            double want = oracle_scale_only(inst.axes);
            std::vector<double> zero(3, 0.0);
            double obj_want = direct_objective(inst.axes, want, zero);
            worst_p = std::max(worst_p, rel_err(got.scale, want));
            worst_o = std::max(worst_o,
                               std::fabs(got.objective - obj_want) / std::max(1e-12, obj_want));
        }
        c.check("align.scale_point.oracle_equivalence", worst_p <= 1e-6 && worst_o <= 1e-8,
                "param " + fmt(worst_p) + " obj " + fmt(worst_o));
    }

    // --- solver vs oracle, point scale+shift ------------------------------
    {
        SplitMix64 rng(cfg.seed + 2);
        double worst_p = 0.0, worst_o = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(491));
            PointInstance inst = random_point_instance(rng, n, true, 0.3);
            AffineAlignment got = solve_scale_shift_l1(inst.src, inst.dst, inst.w, aopts);
            std::vector<double> b(3, 0.0);
            double want = oracle_scale_shift(inst.axes, &b);
            double obj_want = direct_objective(inst.axes, want, b);
            worst_p = std::max(worst_p, rel_err(got.scale, want));
            worst_o = std::max(worst_o,
                               std::fabs(got.objective - obj_want) / std::max(1e-12, obj_want));
        }
        c.check("align.scale_shift_point.oracle_equivalence", worst_p <= 1e-6 && worst_o <= 1e-8,
                "param " + fmt(worst_p) + " obj " + fmt(worst_o));
    }

    // --- solver vs oracle, point shift-only -------------------------------
    {
        SplitMix64 rng(cfg.seed + 3);
        double worst_p = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(241));
            PointInstance inst = random_point_instance(rng, n, true, 0.2);
            AffineAlignment got = solve_shift_l1(inst.src, inst.dst, inst.w);
            std::vector<double> want = oracle_shift_only(inst.axes);
            for (int k = 0; k < 3; ++k)
                worst_p = std::max(worst_p, rel_err(got.shift[k], want[k]));
        }
        c.check("align.shift_point.oracle_equivalence", worst_p <= 1e-9, "param " + fmt(worst_p));
    }

    // --- solver vs oracle, depth variants ----------------------------------
    {
        SplitMix64 rng(cfg.seed + 4);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(491));
            DepthInstance inst = random_depth_instance(rng, n, false, 0.2);
            AxisSeries ax = inst.axis();
            AffineAlignment got = solve_depth_scale_l1(inst.src, inst.dst, inst.w);
            double want = oracle_scale_only(std::span<const AxisSeries>(&ax, 1));
            worst = std::max(worst, rel_err(got.scale, want));

            DepthInstance inst2 = random_depth_instance(rng, n, true, 0.2);
            AxisSeries ax2 = inst2.axis();
            AffineAlignment got2 = solve_depth_scale_shift_l1(inst2.src, inst2.dst, inst2.w, aopts);
            std::vector<double> b(1, 0.0);
            double want2 = oracle_scale_shift(std::span<const AxisSeries>(&ax2, 1), &b);
            worst = std::max(worst, rel_err(got2.scale, want2));
            worst = std::max(worst, rel_err(got2.shift[0], b[0]));
        }
        c.check("align.depth_variants.oracle_equivalence", worst <= 1e-6, "param " + fmt(worst));
    }

    // --- disparity least squares vs Cramer ---------------------------------
    {
        SplitMix64 rng(cfg.seed + 5);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(491));
            std::vector<double> d_pred(n), d_gt(n);
            for (int i = 0; i < n; ++i) {
                d_pred[i] = rng.uniform(0.05, 2.0);
                d_gt[i] = 1.7 * d_pred[i] + 0.2 + 0.01 * rng.normal();
            }
            AffineAlignment got = solve_disparity_affine_lsq(d_pred, d_gt);
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (int i = 0; i < n; ++i) {
                sx += d_pred[i];
                sy += d_gt[i];
                sxx += d_pred[i] * d_pred[i];
                sxy += d_pred[i] * d_gt[i];
            }
            double det = n * sxx - sx * sx;
            double a = (n * sxy - sx * sy) / det;
            double b = (sxx * sy - sx * sxy) / det;
            worst = std::max(worst, std::fabs(got.scale - a) / std::max(1.0, std::fabs(a)));
            worst = std::max(worst, std::fabs(got.shift[0] - b) / std::max(1.0, std::fabs(b)));
        }
        c.check("align.disparity_lsq.cramer_equivalence", worst <= 1e-10, fmt(worst));
    }

    // --- exact affine recovery ---------------------------------------------
    {
        SplitMix64 rng(cfg.seed + 6);
        double worst_obj = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            int n = 50 + int(rng.uniform_index(200));
            PointInstance inst;
            double s = rng.uniform(0.5, 4.0);
            Vec3 t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
            for (int i = 0; i < n; ++i) {
                Vec3 p{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.5, 9.0)};
                inst.src.push_back(p);
                inst.dst.push_back(s * p + t);
                inst.w.push_back(1.0 / p.z);
            }
            inst.build_axes();
            AffineAlignment got = solve_scale_shift_l1(inst.src, inst.dst, inst.w, aopts);
            worst_obj = std::max(worst_obj, got.objective);
        }
        c.check("align.scale_shift.noiseless_affine_exact", worst_obj <= 1e-9, fmt(worst_obj));
    }

    // --- breakdown robustness ----------------------------------------------
    {
        SplitMix64 rng(cfg.seed + 7);
        bool all_equal = true;
        for (int trial = 0; trial < 20; ++trial) {
            int n = 40 + int(rng.uniform_index(200));
            std::vector<double> src(n), dst(n), w(n);
            double s = rng.uniform(0.8, 2.5);
            for (int i = 0; i < n; ++i) {
                src[i] = rng.uniform(0.5, 8.0);
                dst[i] = s * src[i] * (1.0 + 0.02 * rng.normal());
                w[i] = rng.uniform(0.2, 1.0);
            }
            // Corrupt a subset holding under half the breakpoint weight.
            double total = 0.0;
            for (int i = 0; i < n; ++i) total += w[i] * src[i];
            double budget = 0.4 * total, used = 0.0;
            std::vector<double> mag1 = dst, mag2 = dst;
            for (int i = 0; i < n && used < budget; ++i) {
                double wt = w[i] * src[i];
                if (used + wt >= budget) break;
                used += wt;
                mag1[i] = dst[i] * 1e3;
                mag2[i] = dst[i] * 1e9;
            }
            AffineAlignment a1 = solve_depth_scale_l1(src, mag1, w);
            AffineAlignment a2 = solve_depth_scale_l1(src, mag2, w);
            if (a1.scale != a2.scale) all_equal = false;
        }
        c.check("align.scale.breakdown_invariance", all_equal);
    }

    // --- scale equivariance -------------------------------------------------
    {
        SplitMix64 rng(cfg.seed + 8);
        int n = 200;
        std::vector<double> src(n), dst(n), dst3(n), w(n);
        for (int i = 0; i < n; ++i) {
            src[i] = rng.uniform(0.5, 8.0);
            dst[i] = 1.6 * src[i] + 0.05 * rng.normal();
            dst3[i] = 3.0 * dst[i];
            w[i] = 1.0 / src[i];
        }
        AffineAlignment a1 = solve_depth_scale_l1(src, dst, w);
        AffineAlignment a3 = solve_depth_scale_l1(src, dst3, w);
        double err = std::fabs(a3.scale - 3.0 * a1.scale) / (3.0 * a1.scale);
        c.check("align.scale.gt_scaling_equivariance", err <= 1e-12, fmt(err));
    }

    // --- fast path vs reference bisection -----------------------------------
    {
        SplitMix64 rng(cfg.seed + 9);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            PointInstance inst = random_point_instance(rng, 300, true, 0.3);
            AffineAlignment fast = solve_scale_shift_l1(inst.src, inst.dst, inst.w, aopts);
            AlignOptions ref = aopts;
            ref.use_candidates = false;
            AffineAlignment slow = solve_scale_shift_l1(inst.src, inst.dst, inst.w, ref);
            worst = std::max(worst, rel_err(fast.scale, slow.scale));
        }
        c.check("align.scale_shift.fastpath_matches_reference", worst <= 1e-5, fmt(worst));
    }

    // --- losses -------------------------------------------------------------
    {
        SceneSpec spec = desk_scene(cfg.seed);
        RenderResult scene = render(spec);
        SplitMix64 rng(cfg.seed + 10);

        PointMap corrupted = scene.points;
        double s = 1.8;
        Vec3 t{0.4, -0.2, 0.9};
        for (auto& p : corrupted.points) p = (p - t) / s;  // gt = s*corrupted + t
        LossReport g = loss_global(corrupted, scene.points, scene.mask, aopts);
        c.check("losses.global.affine_invariance_zero", g.value <= 1e-9, fmt(g.value));

        // single full-mask region reduces to the global loss
        std::vector<int> center_candidates;
        for (int i = 0; i < scene.mask.size(); ++i)
            if (scene.mask.at(i)) center_candidates.push_back(i);
        int center = center_candidates[center_candidates.size() / 2];
        double radius = 2.0 * bounding_sphere_radius(scene.points, scene.mask) + 1.0;
        std::vector<RegionSeed> seeds{RegionSeed{center, radius}};
        std::vector<SphereRegion> regions =
            sample_sphere_regions(scene.points, scene.mask, seeds);
        PointMap noisy = scene.points;
        for (auto& p : noisy.points) {
            p.x += 0.01 * rng.normal();
            p.y += 0.01 * rng.normal();
            p.z += 0.01 * rng.normal();
        }
        LossReport full = loss_multiscale(noisy, scene.points, scene.mask, regions, aopts);
        LossReport glob = loss_global(noisy, scene.points, scene.mask, aopts);
        double diff = std::fabs(full.value - glob.value) / std::max(1e-12, glob.value);
        c.check("losses.multiscale.full_region_equals_global", diff <= 1e-12, fmt(diff));

        LossReport ls = loss_scale(std::log(glob.alignment.scale), noisy, scene.points,
                                   scene.mask, aopts);
        c.check("losses.scale.zero_at_target", ls.value <= 1e-20, fmt(ls.value));
    }

    // --- poisson completion --------------------------------------------------
    {
        int w = 48, h = 48;
        DepthMap truth(w, h);
        for (int v = 0; v < h; ++v)
            for (int u = 0; u < w; ++u)
                truth.values[v * w + u] = 2.0 * std::exp(0.03 * u + 0.02 * v);

        ValidMask known(w, h, true);
        for (int v = 12; v < 34; ++v)
            for (int u = 10; u < 36; ++u) known.set(v * w + u, false);

        CompletionProblem prob;
        prob.known = truth;
        prob.known_mask = known;
        prob.guide = truth;  // compatible gradients
        PoissonOptions popts;
        popts.cg_tol = cfg.cg_tol;
        popts.max_iter_factor = cfg.cg_max_iter_factor;
        CompletionResult res = poisson_complete(prob, popts);
        double worst = 0.0;
        for (int i = 0; i < w * h; ++i)
            worst = std::max(worst,
                             std::fabs(res.depth.values[i] - truth.values[i]) / truth.values[i]);
        c.check("refine.poisson.compatible_gradient_exact", worst <= 1e-8, fmt(worst));

        // scaled guide: a global factor is invisible to log-gradients
        DepthMap guide2 = truth;
        for (auto& v : guide2.values) v *= 3.7;
        prob.guide = guide2;
        CompletionResult res2 = poisson_complete(prob, popts);
        worst = 0.0;
        for (int i = 0; i < w * h; ++i)
            worst = std::max(worst,
                             std::fabs(res2.depth.values[i] - truth.values[i]) / truth.values[i]);
        c.check("refine.poisson.guide_scale_invariance", worst <= 1e-8, fmt(worst));

        // constant guide: harmonic fill obeys the maximum principle
        DepthMap flat(w, h, 5.0);
        prob.guide = flat;
        CompletionResult res3 = poisson_complete(prob, popts);
        double bmin = std::numeric_limits<double>::infinity(), bmax = 0.0;
        for (int v = 0; v < h; ++v) {
            for (int u = 0; u < w; ++u) {
                int i = v * w + u;
                if (!known.at(i)) continue;
                bool ring = false;
                if (u > 0 && !known.at(i - 1)) ring = true;
                if (u + 1 < w && !known.at(i + 1)) ring = true;
                if (v > 0 && !known.at(i - w)) ring = true;
                if (v + 1 < h && !known.at(i + w)) ring = true;
                if (ring) {
                    bmin = std::min(bmin, truth.values[i]);
                    bmax = std::max(bmax, truth.values[i]);
                }
            }
        }
        bool inside = true;
        for (int i = 0; i < w * h; ++i)
            if (!known.at(i)) {
                double z = res3.depth.values[i];
                if (z < bmin * (1 - 1e-9) || z > bmax * (1 + 1e-9)) inside = false;
            }
        c.check("refine.poisson.maximum_principle", inside);

        // idempotence
        CompletionProblem again;
        again.known = res.depth;
        again.known_mask = known;
        again.guide = truth;
        CompletionResult res4 = poisson_complete(again, popts);
        worst = 0.0;
        for (int i = 0; i < w * h; ++i)
            worst = std::max(worst, std::fabs(std::log(res4.depth.values[i]) -
                                              std::log(res.depth.values[i])));
        c.check("refine.poisson.idempotent", worst <= 1e-8, fmt(worst));
    }

    // --- local vs global mismatch filtering ----------------------------------
    {
        SceneSpec spec = boxes_scene(cfg.seed + 11);
        RenderResult scene = render(spec);

        ArtifactSpec art;
        art.kind = ArtifactSpec::Kind::boundary_shift;
        art.shift_px = 3;
        art.shift_dir_u = 1;
        art.shift_dir_v = 0;
        InjectResult injected = inject(scene.depth, scene.mask, art);

        PredictorSim sim;
        sim.scale = 2.0;
        sim.log_bias_amplitude = 0.12;
        sim.bias_period_px = 48.0;
        PointMap pred = simulate_prediction(scene.depth, scene.mask, scene.cam, sim);

        RunConfig rcfg = cfg;
        std::vector<RegionSeed> seeds = make_refine_region_seeds(pred, injected.mask, rcfg);
        std::vector<SphereRegion> regions = sample_pred_regions(pred, injected.mask, seeds);
        PointMap real_points = depth_to_points(injected.depth, injected.mask, scene.cam);

        DetectOptions dloc;
        dloc.align = aopts;
        OutlierReport local = detect_outliers(pred, real_points, injected.mask, regions, dloc);
        DetectOptions dglob = dloc;
        dglob.global_alignment = true;
        OutlierReport global = detect_outliers(pred, real_points, injected.mask, regions, dglob);

        int art_total = 0, art_hit = 0, clean_total = 0, clean_hit_local = 0,
            clean_hit_global = 0;
        for (int i = 0; i < injected.mask.size(); ++i) {
            if (!injected.mask.at(i)) continue;
            if (injected.footprint.at(i)) {
                ++art_total;
                if (local.union_mask.at(i)) ++art_hit;
            } else {
                ++clean_total;
                if (local.union_mask.at(i)) ++clean_hit_local;
                if (global.union_mask.at(i)) ++clean_hit_global;
            }
        }
        double recall = art_total ? double(art_hit) / art_total : 0.0;
        double fpr_local = clean_total ? double(clean_hit_local) / clean_total : 0.0;
        double fpr_global = clean_total ? double(clean_hit_global) / clean_total : 0.0;
        c.check("refine.filter.local_recall_and_fpr", recall >= 0.95 && fpr_local <= 0.02,
                "recall " + fmt(recall) + " fpr " + fmt(fpr_local));
        c.check("refine.filter.global_ablation_contrast",
                fpr_global > 10.0 * std::max(fpr_local, 1e-4) && fpr_global > 0.02,
                "global fpr " + fmt(fpr_global) + " local fpr " + fmt(fpr_local));
    }

    // --- metric harness -------------------------------------------------------
    {
        SceneSpec spec = desk_scene(cfg.seed + 12);
        RenderResult scene = render(spec);
        EvalOptions eopts;
        eopts.z_max = cfg.z_max;
        eopts.align = aopts;

        bool ident_ok = true;
        for (Protocol p : {Protocol::scale_inv_point, Protocol::affine_inv_point,
                           Protocol::metric_point}) {
            MetricBundle b = evaluate_points(scene.points, scene.points, scene.mask, p, eopts);
            if (!(b.rel <= 1e-9 && b.delta1 == 100.0)) ident_ok = false;
        }
        RunConfig rc = cfg;
        std::vector<RegionSeed> seeds = make_loss_region_seeds(scene.points, scene.mask, rc);
        std::vector<SphereRegion> regions =
            sample_sphere_regions(scene.points, scene.mask, seeds);
        EvalOptions local_opts = eopts;
        local_opts.regions = regions;
        MetricBundle lb = evaluate_points(scene.points, scene.points, scene.mask,
                                          Protocol::local_point, local_opts);
        if (!(lb.rel <= 1e-9 && lb.delta1 == 100.0)) ident_ok = false;
        for (Protocol p : {Protocol::scale_inv_depth, Protocol::affine_inv_depth,
                           Protocol::metric_depth, Protocol::metric_depth_gt_cam}) {
            MetricBundle b = evaluate_depth(scene.depth, scene.depth, scene.mask, p, eopts);
            if (!(b.rel <= 1e-9 && b.delta1 == 100.0)) ident_ok = false;
        }
        DisparityMap disp(scene.depth.width, scene.depth.height);
        for (int i = 0; i < scene.depth.size(); ++i)
            if (scene.mask.at(i)) disp.values[i] = 1.0 / scene.depth.values[i];
        MetricBundle db = evaluate_disparity(disp, scene.depth, scene.mask, eopts);
        if (!(db.rel <= 1e-9 && db.delta1 == 100.0)) ident_ok = false;
        c.check("metrics.identity_on_equal_inputs", ident_ok);

        DepthMap scaled = scene.depth;
        for (auto& v : scaled.values) v *= 1.3;
        MetricBundle md = evaluate_depth(scaled, scene.depth, scene.mask,
                                         Protocol::metric_depth, eopts);
        c.check("metrics.metric_depth_ratio_1p3_delta_zero", md.delta1 == 0.0, fmt(md.delta1));

        // protocol family monotonicity on scale-dominated corruptions
        bool mono = true;
        for (int trial = 0; trial < 5; ++trial) {
            SplitMix64 rng(cfg.seed + 100 + trial);
            RenderResult sc = render(desk_scene(cfg.seed + 200 + trial));
            double s = rng.uniform(2.2, 3.0);
            Vec3 t{rng.uniform(0.1, 0.3), rng.uniform(-0.3, -0.1), rng.uniform(0.1, 0.3)};
            PointMap pred = sc.points;
            for (int i = 0; i < pred.size(); ++i) {
                if (!sc.mask.at(i)) continue;
                Vec3 noise{0.01 * rng.normal(), 0.01 * rng.normal(), 0.01 * rng.normal()};
                pred.points[i] = (sc.points.points[i] - t) / s + noise;
            }
            double rel_affine = evaluate_points(pred, sc.points, sc.mask,
                                                Protocol::affine_inv_point, eopts).rel;
            double rel_scale = evaluate_points(pred, sc.points, sc.mask,
                                               Protocol::scale_inv_point, eopts).rel;
            double rel_shift = evaluate_points(pred, sc.points, sc.mask,
                                               Protocol::metric_point, eopts).rel;
            if (!(rel_affine <= rel_scale + 1e-12 && rel_scale <= rel_shift + 1e-12))
                mono = false;
        }
        c.check("metrics.protocol_family_monotonicity", mono);

        double f1 = boundary_f1(scene.depth, scene.depth, scene.mask,
                                cfg.boundary_f1_thresholds);
        c.check("metrics.boundary_f1_self_is_100", f1 == 100.0, fmt(f1));
    }

    // --- camera recovery --------------------------------------------------------
    {
        bool ok = true;
        std::string detail;
        for (double f : {200.0, 500.0, 1200.0}) {
            SceneSpec spec = desk_scene(cfg.seed + 13);
            spec.width = 96;
            spec.height = 96;
            spec.focal_px = f;
            RenderResult scene = render(spec);
            RecoveredCamera rec = recover_focal_shift(scene.points, scene.mask);
            std::vector<double> zs;
            for (int i = 0; i < scene.mask.size(); ++i)
                if (scene.mask.at(i)) zs.push_back(scene.depth.values[i]);
            std::sort(zs.begin(), zs.end());
            double med = zs[zs.size() / 2];
            double f_err = std::fabs(rec.cam.fx - f) / f;
            double t_err = std::fabs(rec.cam.z_shift.value_or(0.0)) / med;
            if (f_err > 1e-3 || t_err > 1e-3) {
                ok = false;
                detail += "f=" + fmt(f) + " ferr=" + fmt(f_err) + " terr=" + fmt(t_err) + " ";
            }
        }
        c.check("camera.recover.noiseless_roundtrip", ok, detail);

        SceneSpec flat;
        flat.width = 32;
        flat.height = 32;
        flat.focal_px = 32.0;
        flat.background_depth = 5.0;
        RenderResult plane = render(flat);
        bool raised = false;
        try {
            recover_focal_shift(plane.points, plane.mask);
        } catch (const Error& e) {
            raised = e.kind() == ErrorKind::solver;
        }
        c.check("camera.recover.ambiguity_error_on_single_depth", raised);
    }

    // --- synth determinism --------------------------------------------------------
    {
        SceneSpec spec = desk_scene(cfg.seed + 14);
        RenderResult a = render(spec);
        RenderResult b = render(spec);
        bool same = a.depth.values == b.depth.values && a.mask == b.mask;
        ArtifactSpec art;
        art.kind = ArtifactSpec::Kind::noise;
        art.sigma_rel = 0.05;
        art.noise_seed = cfg.seed;
        InjectResult i1 = inject(a.depth, a.mask, art);
        InjectResult i2 = inject(b.depth, b.mask, art);
        same = same && i1.depth.values == i2.depth.values;
        c.check("synth.render_and_inject_deterministic", same);
    }

    return c.result;
}

}  // namespace pmgeo
