#include "pmgeo/refine.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "pmgeo/random.hpp"

namespace pmgeo {

namespace {

struct RegionGather {
    std::vector<Vec3> real, pred;
    std::vector<double> w;
};

RegionGather gather_region(const PointMap& pred, const PointMap& real_points,
                           std::span<const int> members, std::span<const double> weights) {
    RegionGather g;
    g.real.reserve(members.size());
    g.pred.reserve(members.size());
    g.w.reserve(members.size());
    for (int idx : members) {
        g.real.push_back(real_points.points[idx]);
        g.pred.push_back(pred.points[idx]);
        g.w.push_back(weights.empty() ? 1.0 : weights[idx]);
    }
    return g;
}

}  // namespace

std::vector<SphereRegion> sample_pred_regions(const PointMap& pred, const ValidMask& mask,
                                              std::span<const RegionSeed> seeds) {
    return sample_sphere_regions(pred, mask, seeds);
}

OutlierReport detect_outliers(const PointMap& pred, const PointMap& real_points,
                              const ValidMask& mask, std::span<const SphereRegion> regions,
                              const DetectOptions& opts) {
    require_same_shape(pred.width, pred.height, real_points.width, real_points.height,
                       "pred vs real");
    OutlierReport report;
    report.union_mask = ValidMask(pred.width, pred.height, false);

    AffineAlignment global;
    if (opts.global_alignment) {
        std::vector<int> all;
        for (int i = 0; i < mask.size(); ++i)
            if (mask.at(i)) all.push_back(i);
        RegionGather g = gather_region(pred, real_points, all, opts.weights);
        global = solve_scale_shift_l1(g.real, g.pred, g.w, opts.align);
    }

    for (const SphereRegion& region : regions) {
        OutlierReport::Region rr;
        rr.center_index = region.center_index;
        rr.radius = region.radius;
        if (region.members.size() < 2) {
            rr.skipped = true;
            ++report.skipped_regions;
            report.regions.push_back(std::move(rr));
            continue;
        }
        RegionGather g = gather_region(pred, real_points, region.members, opts.weights);
        AffineAlignment align;
        if (opts.global_alignment) {
            align = global;
        } else {
            try {
                align = solve_scale_shift_l1(g.real, g.pred, g.w, opts.align);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::solver) throw;
                rr.skipped = true;
                ++report.skipped_regions;
                report.regions.push_back(std::move(rr));
                continue;
            }
        }
        rr.alignment = align;
        Vec3 t{align.shift[0], align.shift[1], align.shift[2]};
        for (size_t k = 0; k < region.members.size(); ++k) {
            Vec3 residual = align.scale * g.real[k] + t - g.pred[k];
            if (residual.norm() > region.radius) {  // strict: Eq. boundary stays inlier
                rr.outliers.push_back(region.members[k]);
                report.union_mask.set(region.members[k], true);
            }
        }
        report.regions.push_back(std::move(rr));
    }

    report.outlier_count = report.union_mask.count();
    return report;
}

ValidMask filter_mask(const ValidMask& mask, const OutlierReport& report) {
    ValidMask out = mask;
    for (int i = 0; i < out.size(); ++i)
        if (report.union_mask.size() > i && report.union_mask.at(i)) out.set(i, false);
    return out;
}

namespace {

// Connected components (4-connectivity) of the unknown set.
std::vector<int> label_components(const ValidMask& known, int& n_components) {
    int w = known.width(), h = known.height();
    std::vector<int> label(size_t(w) * h, -1);
    n_components = 0;
    for (int start = 0; start < w * h; ++start) {
        if (known.at(start) || label[start] >= 0) continue;
        int id = n_components++;
        std::queue<int> q;
        q.push(start);
        label[start] = id;
        while (!q.empty()) {
            int i = q.front();
            q.pop();
            int u = i % w, v = i / w;
            const int du[4] = {1, -1, 0, 0};
            const int dv[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                int uu = u + du[k], vv = v + dv[k];
                if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                int j = vv * w + uu;
                if (known.at(j) || label[j] >= 0) continue;
                label[j] = id;
                q.push(j);
            }
        }
    }
    return label;
}

}  // namespace

CompletionResult poisson_complete(const CompletionProblem& problem, const PoissonOptions& opts) {
    const DepthMap& known = problem.known;
    const ValidMask& kmask = problem.known_mask;
    const DepthMap& guide = problem.guide;
    int w = known.width, h = known.height;
    require_same_shape(w, h, kmask.width(), kmask.height(), "known vs mask");
    require_same_shape(w, h, guide.width, guide.height, "known vs guide");

    CompletionResult result;
    result.depth = DepthMap(w, h);
    result.mask = ValidMask(w, h, true);

    std::vector<double> log_known(size_t(w) * h, 0.0);
    for (int i = 0; i < w * h; ++i) {
        if (kmask.at(i)) {
            double z = known.values[i];
            if (!(z > 0.0) || !std::isfinite(z))
                throw_data("poisson_complete: nonpositive known depth");
            result.depth.values[i] = z;
            log_known[i] = std::log(z);
        }
    }

    auto guide_log_at = [&](int i) -> double {
        double g = guide.values[i];
        if (!(g > 0.0) || !std::isfinite(g))
            throw_data("poisson_complete: nonpositive guide depth where needed");
        return std::log(g);
    };

    int n_components = 0;
    std::vector<int> label = label_components(kmask, n_components);
    if (n_components == 0) {
        result.cg_residual = 0.0;
        return result;
    }

    // Group unknown pixels per component.
    std::vector<std::vector<int>> comp_pixels(n_components);
    for (int i = 0; i < w * h; ++i)
        if (label[i] >= 0) comp_pixels[label[i]].push_back(i);

    const int du[4] = {1, -1, 0, 0};
    const int dv[4] = {0, 0, 1, -1};

    for (int c = 0; c < n_components; ++c) {
        const std::vector<int>& pixels = comp_pixels[c];
        int n = static_cast<int>(pixels.size());
        std::vector<int> local(size_t(w) * h, -1);
        for (int k = 0; k < n; ++k) local[pixels[k]] = k;

        // Assemble L x = rhs: diagonal = in-grid degree, off-diagonal -1 for
        // unknown neighbors; rhs carries the guide log-gradient divergence
        // plus Dirichlet contributions from known neighbors.
        std::vector<double> diag(n, 0.0), rhs(n, 0.0);
        std::vector<std::array<int, 4>> nbr(n, {-1, -1, -1, -1});
        bool has_boundary = false;
        for (int k = 0; k < n; ++k) {
            int i = pixels[k];
            int u = i % w, v = i / w;
            double gi = guide_log_at(i);
            for (int d = 0; d < 4; ++d) {
                int uu = u + du[d], vv = v + dv[d];
                if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                int j = vv * w + uu;
                diag[k] += 1.0;
                rhs[k] += gi - guide_log_at(j);
                if (kmask.at(j)) {
                    rhs[k] += log_known[j];
                    has_boundary = true;
                } else {
                    nbr[k][d] = local[j];
                }
            }
        }

        if (!has_boundary) {
            // Free-floating: gradient integration of the guide is the guide
            // itself up to a constant, pinned at the guide's own median.
            for (int i : pixels) result.depth.values[i] = guide.values[i];
            for (int i : pixels) result.mask.set(i, false);
            ++result.free_components;
            result.free_component_pixels += n;
            continue;
        }

        // Jacobi-preconditioned CG.
        std::vector<double> x(n, 0.0), r(n), z(n), p(n), Ap(n);
        for (int k = 0; k < n; ++k) {
            int i = pixels[k];
            x[k] = guide_log_at(i);  // warm start
        }
        auto apply = [&](const std::vector<double>& in, std::vector<double>& out) {
            for (int k = 0; k < n; ++k) {
                double s = diag[k] * in[k];
                for (int d = 0; d < 4; ++d)
                    if (nbr[k][d] >= 0) s -= in[nbr[k][d]];
                out[k] = s;
            }
        };
        apply(x, Ap);
        double rhs_norm2 = 0.0;
        for (int k = 0; k < n; ++k) {
            r[k] = rhs[k] - Ap[k];
            rhs_norm2 += rhs[k] * rhs[k];
        }
        double rhs_norm = std::sqrt(rhs_norm2);
        if (rhs_norm == 0.0) rhs_norm = 1.0;

        double rz = 0.0;
        for (int k = 0; k < n; ++k) {
            z[k] = r[k] / diag[k];
            p[k] = z[k];
            rz += r[k] * z[k];
        }

        int max_iter = std::max(32, opts.max_iter_factor * n);
        double res = 0.0;
        int it = 0;
        for (; it < max_iter; ++it) {
            double r_norm2 = 0.0;
            for (int k = 0; k < n; ++k) r_norm2 += r[k] * r[k];
            res = std::sqrt(r_norm2) / rhs_norm;
            if (res <= opts.cg_tol) break;

            apply(p, Ap);
            double pAp = 0.0;
            for (int k = 0; k < n; ++k) pAp += p[k] * Ap[k];
            if (!(pAp > 0.0))
                throw_solver("poisson_complete: non-SPD system encountered");
            double alpha = rz / pAp;
            for (int k = 0; k < n; ++k) {
                x[k] += alpha * p[k];
                r[k] -= alpha * Ap[k];
            }
            double rz_new = 0.0;
            for (int k = 0; k < n; ++k) {
                z[k] = r[k] / diag[k];
                rz_new += r[k] * z[k];
            }
            double beta = rz_new / rz;
            rz = rz_new;
            for (int k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
        }
        if (res > opts.cg_tol)
            throw_solver("poisson_complete: CG did not converge, relative residual " +
                         std::to_string(res));

        result.cg_iterations += it;
        result.cg_residual = std::max(result.cg_residual, res);
        for (int k = 0; k < n; ++k) result.depth.values[pixels[k]] = std::exp(x[k]);
    }

    return result;
}

std::vector<RegionSeed> make_refine_region_seeds(const PointMap& pred, const ValidMask& mask,
                                                 const RunConfig& cfg) {
    std::vector<int> idx;
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) idx.push_back(i);
    if (idx.empty()) throw_data("make_refine_region_seeds: empty mask");

    double radius = bounding_sphere_radius(pred, mask);
    if (!(radius > 0.0)) radius = 1e-12;

    SplitMix64 rng(cfg.seed);
    std::vector<RegionSeed> seeds;
    seeds.reserve(size_t(cfg.refine_centers_per_radius) * cfg.refine_radius_fractions.size());
    for (double f : cfg.refine_radius_fractions) {
        for (int k = 0; k < cfg.refine_centers_per_radius; ++k) {
            int c = idx[rng.uniform_index(idx.size())];
            seeds.push_back(RegionSeed{c, f * radius});
        }
    }
    return seeds;
}

RefineResult refine_pipeline(const DepthMap& real_depth, const ValidMask& real_mask,
                             const PointMap& pred, const CameraModel& cam,
                             const RunConfig& cfg) {
    require_same_shape(real_depth.width, real_depth.height, pred.width, pred.height,
                       "real depth vs pred");

    PointMap real_points;
    try {
        real_points = depth_to_points(real_depth, real_mask, cam);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("refine[unproject]: ") + e.what());
    }

    RefineResult out;
    try {
        out.seeds = make_refine_region_seeds(pred, real_mask, cfg);
        std::vector<SphereRegion> regions = sample_pred_regions(pred, real_mask, out.seeds);

        DetectOptions d;
        d.align.seed = cfg.seed;
        d.align.pair_samples = cfg.align_pair_samples;
        d.align.rel_tol = cfg.align_rel_tol;
        Weights wreal;
        if (cfg.refine_inverse_depth_weights) {
            wreal = inverse_depth_weights(real_depth, real_mask);
            d.weights = wreal.values;
        }
        out.report = detect_outliers(pred, real_points, real_mask, regions, d);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("refine[filter]: ") + e.what());
    }

    out.filtered_mask = filter_mask(real_mask, out.report);

    try {
        CompletionProblem cp;
        cp.known = real_depth;
        cp.known_mask = out.filtered_mask;
        cp.guide = points_to_depth(pred);
        PoissonOptions popts;
        popts.cg_tol = cfg.cg_tol;
        popts.max_iter_factor = cfg.cg_max_iter_factor;
        out.completion = poisson_complete(cp, popts);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("refine[complete]: ") + e.what());
    }

    out.depth = out.completion.depth;
    out.mask = out.completion.mask;
    return out;
}

}  // namespace pmgeo
