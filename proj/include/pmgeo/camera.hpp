#pragma once

#include "pmgeo/geometry.hpp"

namespace pmgeo {

struct RecoveredCamera {
    CameraModel cam;       // fx == fy, principal point at image center
    double rms_residual_px = 0.0;
};

struct RecoverOptions {
    int coarse_samples = 256;   // scan of the 1D z-shift residual
    double rel_tol = 1e-6;      // golden-section stop, relative to median z
    double domain_factor = 64.0;  // upper bound: domain_factor * median z
    double min_depth_spread = 1e-6;  // relative spread below which the
                                     // focal-distance ambiguity is reported
};

// Recovers the single focal f and the z-shift t_z of an affine point map by
// minimizing the mean squared reprojection error
//   sum_i || f*(x_i, y_i)/(z_i + t_z) - (u_i, v_i) ||^2
// over pixel centers (u, v) relative to the image center. For fixed t_z the
// optimal f is the ratio of cross- to auto-correlation; the outer 1D problem
// is scanned coarsely and refined by golden section over
// t_z in (-min z + eps, domain_factor * median z].
//
// A fronto-parallel single-depth input has no unique solution (focal-distance
// ambiguity) and raises a solver error.
RecoveredCamera recover_focal_shift(const PointMap& pm, const ValidMask& mask,
                                    const RecoverOptions& opts = {});

// Scales every point by `scale` and retags the frame as metric.
PointMap assemble_metric(const PointMap& pm, double scale);

}  // namespace pmgeo
