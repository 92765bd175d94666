#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pmgeo/geometry.hpp"

namespace pmgeo {

// Result of an affine alignment solve. `shift` holds one component per
// aligned axis (three for point problems, one for scalar problems).
// `objective` is always recomputed from (scale, shift) on the full input.
// `scale_clamped` is set when the unconstrained optimum had scale <= 0 and
// the solver clamped it to the smallest positive breakpoint.
struct AffineAlignment {
    double scale = 1.0;
    std::array<double, 3> shift{0.0, 0.0, 0.0};
    int shift_dims = 0;  // 0: scale-only, 1: scalar shift, 3: vector shift
    double objective = 0.0;
    bool scale_clamped = false;
};

enum class AlignVariant { scale_only, scale_shift, shift_only, lsq_affine };

struct AlignOptions {
    uint64_t seed = 20240901;
    int pair_samples = 4096;   // candidate slope pairs for scale_shift
    double rel_tol = 1e-9;     // bisection bracket width, relative to |a|
    bool use_candidates = true;  // false: pure bisection reference path
};

// One scalar axis of an alignment problem: minimize sum w |a*src + b - dst|.
struct AxisSeries {
    std::span<const double> src;
    std::span<const double> dst;
    std::span<const double> w;
};

// Exact global minimizer of f(a) = sum_axes sum_i w_i |a*src_i - dst_i|.
// f is convex piecewise-linear; the minimum is a weighted median of the
// breakpoints dst/src with weights w*|src| (lower median on ties).
AffineAlignment solve_scale_l1(std::span<const AxisSeries> axes);

// Minimizes g(a) = sum_axes min_b sum_i w_i |a*src_i + b - dst_i| over a,
// with the per-axis inner optimum b the weighted median of (dst - a*src).
// g is convex in a; the solver brackets the optimum with sampled pair slopes
// and bisects on the exact interval subgradient.
AffineAlignment solve_scale_shift_l1(std::span<const AxisSeries> axes,
                                     const AlignOptions& opts = {});

// Scale fixed at 1; per-axis shift is the weighted median of (dst - src).
AffineAlignment solve_shift_l1(std::span<const AxisSeries> axes);

// Point-cloud wrappers. Weights are per point and apply to all coordinates.
AffineAlignment solve_scale_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                               std::span<const double> w);
AffineAlignment solve_scale_shift_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                                     std::span<const double> w, const AlignOptions& opts = {});
AffineAlignment solve_shift_l1(std::span<const Vec3> src, std::span<const Vec3> dst,
                               std::span<const double> w);

// Scalar (depth) specializations.
AffineAlignment solve_depth_scale_l1(std::span<const double> src, std::span<const double> dst,
                                     std::span<const double> w);
AffineAlignment solve_depth_scale_shift_l1(std::span<const double> src,
                                           std::span<const double> dst,
                                           std::span<const double> w,
                                           const AlignOptions& opts = {});
AffineAlignment solve_depth_shift_l1(std::span<const double> src, std::span<const double> dst,
                                     std::span<const double> w);

// Closed-form unweighted least squares (a, b) = argmin sum (a*src + b - dst)^2
// with mean-centering. Degenerate when src has zero variance.
AffineAlignment solve_disparity_affine_lsq(std::span<const double> src,
                                           std::span<const double> dst);

// Per-pixel z = 1 / max(a*d + b, 1/z_max); output is <= z_max everywhere.
// Validity is copied from the mask.
DepthMap apply_disparity_alignment(const DisparityMap& pred, const ValidMask& mask,
                                   const AffineAlignment& align, double z_max);

// Lower weighted median: smallest value whose cumulative weight reaches half
// the total. Values are ordered (value, index) so ties are deterministic.
double weighted_median_lower(std::span<const double> values, std::span<const double> weights);

}  // namespace pmgeo
