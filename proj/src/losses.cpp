#include "pmgeo/losses.hpp"

#include <algorithm>
#include <cmath>

#include "pmgeo/random.hpp"

namespace pmgeo {

namespace {

struct GatheredPoints {
    std::vector<Vec3> pred, gt;
    std::vector<double> w;  // 1/z of ground truth
};

GatheredPoints gather(const PointMap& pred, const PointMap& gt, std::span<const int> indices) {
    GatheredPoints g;
    g.pred.reserve(indices.size());
    g.gt.reserve(indices.size());
    g.w.reserve(indices.size());
    for (int idx : indices) {
        const Vec3& q = gt.points[idx];
        if (!(q.z > 0.0))
            throw_data("loss: nonpositive ground-truth depth on valid pixel");
        g.pred.push_back(pred.points[idx]);
        g.gt.push_back(q);
        g.w.push_back(1.0 / q.z);
    }
    return g;
}

std::vector<int> mask_indices(const ValidMask& mask) {
    std::vector<int> idx;
    idx.reserve(mask.count());
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) idx.push_back(i);
    return idx;
}

}  // namespace

double bounding_sphere_radius(const PointMap& pm, const ValidMask& mask) {
    Vec3 centroid{0, 0, 0};
    int n = 0;
    for (int i = 0; i < pm.size(); ++i) {
        if (!mask.at(i)) continue;
        centroid = centroid + pm.points[i];
        ++n;
    }
    if (n == 0) throw_data("bounding_sphere_radius: empty mask");
    centroid = centroid / double(n);
    double r2 = 0.0;
    for (int i = 0; i < pm.size(); ++i) {
        if (!mask.at(i)) continue;
        r2 = std::max(r2, (pm.points[i] - centroid).norm2());
    }
    return std::sqrt(r2);
}

LossReport loss_global(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                       const AlignOptions& opts) {
    require_same_shape(pred.width, pred.height, gt.width, gt.height, "pred vs gt");
    require_same_shape(pred.width, pred.height, mask.width(), mask.height(), "points vs mask");
    std::vector<int> idx = mask_indices(mask);
    if (idx.empty()) throw_data("loss_global: empty mask");

    GatheredPoints g = gather(pred, gt, idx);
    LossReport report;
    report.alignment = solve_scale_shift_l1(g.pred, g.gt, g.w, opts);
    report.value = report.alignment.objective;
    report.region_count = 1;
    return report;
}

std::vector<SphereRegion> sample_sphere_regions(const PointMap& gt, const ValidMask& mask,
                                                std::span<const RegionSeed> seeds) {
    require_same_shape(gt.width, gt.height, mask.width(), mask.height(), "points vs mask");
    std::vector<int> idx = mask_indices(mask);

    std::vector<SphereRegion> regions;
    regions.reserve(seeds.size());
    for (const RegionSeed& seed : seeds) {
        if (seed.center_index < 0 || seed.center_index >= gt.size() ||
            !mask.at(seed.center_index))
            throw_data("sample_sphere_regions: center outside mask");
        if (!(seed.radius > 0.0)) throw_data("sample_sphere_regions: radius must be positive");

        SphereRegion r;
        r.center_index = seed.center_index;
        r.radius = seed.radius;
        const Vec3& c = gt.points[seed.center_index];
        double r2 = seed.radius * seed.radius;
        for (int i : idx)
            if ((gt.points[i] - c).norm2() <= r2) r.members.push_back(i);
        regions.push_back(std::move(r));
    }
    return regions;
}

LossReport loss_multiscale(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                           std::span<const SphereRegion> regions, const AlignOptions& opts) {
    require_same_shape(pred.width, pred.height, mask.width(), mask.height(), "points vs mask");
    if (regions.empty()) throw_data("loss_multiscale: no regions");

    LossReport report;
    std::vector<double> values;
    values.reserve(regions.size());
    for (const SphereRegion& region : regions) {
        if (region.members.size() < 2) {
            ++report.skipped_regions;
            continue;
        }
        GatheredPoints g = gather(pred, gt, region.members);
        try {
            AffineAlignment a = solve_scale_shift_l1(g.pred, g.gt, g.w, opts);
            values.push_back(a.objective);
            report.alignment = a;
            ++report.region_count;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::solver) throw;
            ++report.skipped_regions;
        }
    }
    report.value = pairwise_sum(values);
    return report;
}

LossReport loss_scale(double pred_log_scale, const PointMap& pred, const PointMap& gt,
                      const ValidMask& mask, const AlignOptions& opts) {
    LossReport report = loss_global(pred, gt, mask, opts);
    double log_target = std::log(report.alignment.scale);
    double d = pred_log_scale - log_target;
    report.value = d * d;
    return report;
}

std::vector<RegionSeed> make_loss_region_seeds(const PointMap& gt, const ValidMask& mask,
                                               const RunConfig& cfg) {
    std::vector<int> idx;
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) idx.push_back(i);
    if (idx.empty()) throw_data("make_loss_region_seeds: empty mask");

    double radius = bounding_sphere_radius(gt, mask);
    if (!(radius > 0.0)) radius = 1e-12;

    SplitMix64 rng(cfg.seed);
    std::vector<int> centers(cfg.loss_region_centers);
    for (int& c : centers) c = idx[rng.uniform_index(idx.size())];

    std::vector<RegionSeed> seeds;
    seeds.reserve(centers.size() * cfg.loss_radius_fractions.size());
    for (int c : centers)
        for (double f : cfg.loss_radius_fractions)
            seeds.push_back(RegionSeed{c, f * radius});
    return seeds;
}

}  // namespace pmgeo
