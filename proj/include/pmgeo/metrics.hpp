#pragma once

#include <optional>
#include <span>
#include <string>

#include "pmgeo/align.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/losses.hpp"

namespace pmgeo {

// Evaluation protocols. Each binds exactly one alignment rule; metric_depth
// and metric_depth_gt_cam bind none.
enum class Protocol {
    scale_inv_point,
    affine_inv_point,
    local_point,
    scale_inv_depth,
    affine_inv_depth,
    affine_inv_disparity,
    metric_point,
    metric_depth,
    metric_depth_gt_cam,
};

const char* protocol_name(Protocol p);
Protocol protocol_from_name(const std::string& name);

struct MetricBundle {
    double rel = 0.0;     // mean relative error, percent
    double delta1 = 0.0;  // inlier percentage
    int n_valid = 0;      // pixels measured
    int n_excluded = 0;   // guarded pixels (zero gt norm / nonpositive depth)
    Protocol protocol = Protocol::metric_depth;
    std::optional<AffineAlignment> alignment;
    int regions_used = 0;  // local_point only
};

// Rel^p = mean ||pred - gt||_2 / ||gt||_2 * 100; delta1^p = percent of
// pixels with ratio < 0.25. Alignment is the caller's responsibility.
MetricBundle rel_delta_point(const PointMap& pred, const PointMap& gt, const ValidMask& mask);

// Rel^d = mean |pred - gt| / gt * 100; delta1^d = percent of pixels with
// max(pred/gt, gt/pred) < 1.25.
MetricBundle rel_delta_depth(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask);

struct EvalOptions {
    double z_max = 1000.0;
    std::span<const SphereRegion> regions{};  // local_point
    AlignOptions align;
};

// Protocol drivers: apply the protocol's alignment, then measure.
MetricBundle evaluate_points(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                             Protocol protocol, const EvalOptions& opts = {});
MetricBundle evaluate_depth(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                            Protocol protocol, const EvalOptions& opts = {});
// Disparity protocol: least-squares alignment in disparity space against
// 1/gt_depth, truncation at 1/z_max, inversion, then depth metrics.
MetricBundle evaluate_disparity(const DisparityMap& pred, const DepthMap& gt_depth,
                                const ValidMask& mask, const EvalOptions& opts = {});

// Boundary sharpness score. Edges are pixels with a strictly nearer depth
// than a 4-neighbor by ratio > 1 + t/100 (the nearer pixel is marked);
// F1 of predicted vs ground-truth edge sets is averaged over the thresholds.
double boundary_f1(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                   std::span<const double> thresholds_percent);

}  // namespace pmgeo
