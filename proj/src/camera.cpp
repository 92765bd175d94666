#include "pmgeo/camera.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace pmgeo {

namespace {

struct Sample {
    double x, y, z;  // point
    double u, v;     // pixel center relative to image center
};

// Mean squared reprojection residual with the closed-form optimal focal.
// Returns the residual and the focal through `f_out`.
double residual_at(const std::vector<Sample>& samples, double t_z, double* f_out) {
    double cross = 0.0, self = 0.0, uu = 0.0;
    for (const auto& s : samples) {
        double iz = 1.0 / (s.z + t_z);
        double gx = s.x * iz, gy = s.y * iz;
        cross += gx * s.u + gy * s.v;
        self += gx * gx + gy * gy;
        uu += s.u * s.u + s.v * s.v;
    }
    if (!(self > 0.0)) {
        if (f_out) *f_out = 0.0;
        return std::numeric_limits<double>::infinity();
    }
    double f = cross / self;
    if (f_out) *f_out = f;
    double n = static_cast<double>(samples.size());
    return (uu - cross * cross / self) / n;
}

}  // namespace

RecoveredCamera recover_focal_shift(const PointMap& pm, const ValidMask& mask,
                                    const RecoverOptions& opts) {
    require_same_shape(pm.width, pm.height, mask.width(), mask.height(), "points vs mask");

    std::vector<Sample> samples;
    std::vector<double> zs;
    double ccx = pm.width * 0.5, ccy = pm.height * 0.5;
    for (int v = 0; v < pm.height; ++v) {
        for (int u = 0; u < pm.width; ++u) {
            int idx = v * pm.width + u;
            if (!mask.at(idx)) continue;
            const Vec3& p = pm.points[idx];
            samples.push_back(Sample{p.x, p.y, p.z, u + 0.5 - ccx, v + 0.5 - ccy});
            zs.push_back(p.z);
        }
    }
    if (samples.size() < 8)
        throw_data("recover_focal_shift: need at least 8 valid points");

    std::sort(zs.begin(), zs.end());
    double min_z = zs.front();
    double median_z = zs[zs.size() / 2];
    if (!(median_z > 0.0))
        throw_data("recover_focal_shift: nonpositive depths");

    // Focal-distance ambiguity: a single-depth (fronto-parallel) scene is
    // explained equally well by any (f, t_z) on a curve.
    if ((zs.back() - zs.front()) < opts.min_depth_spread * median_z)
        throw_solver("recover_focal_shift: single-depth scene, focal-distance ambiguity");

    double eps = 1e-6 * median_z;
    double lo = -min_z + eps;
    double hi = opts.domain_factor * median_z;
    if (!(hi > lo))
        throw_solver("recover_focal_shift: empty search domain");

    // Coarse scan to bracket the global minimum of the 1D residual.
    int ns = std::max(8, opts.coarse_samples);
    double best_t = lo;
    double best_r = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= ns; ++k) {
        double t = lo + (hi - lo) * (double(k) / ns);
        double r = residual_at(samples, t, nullptr);
        if (r < best_r) {
            best_r = r;
            best_t = t;
        }
    }
    double step = (hi - lo) / ns;
    double a = std::max(lo, best_t - step);
    double b = std::min(hi, best_t + step);

    // Golden-section refinement.
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double tol = opts.rel_tol * median_z;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double r1 = residual_at(samples, x1, nullptr);
    double r2 = residual_at(samples, x2, nullptr);
    int guard = 0;
    while (b - a > tol && guard++ < 400) {
        if (r1 <= r2) {
            b = x2;
            x2 = x1;
            r2 = r1;
            x1 = b - inv_phi * (b - a);
            r1 = residual_at(samples, x1, nullptr);
        } else {
            a = x1;
            x1 = x2;
            r1 = r2;
            x2 = a + inv_phi * (b - a);
            r2 = residual_at(samples, x2, nullptr);
        }
    }
    double t_z = 0.5 * (a + b);
    double f = 0.0;
    double res = residual_at(samples, t_z, &f);
    if (!(f > 0.0) || !std::isfinite(res))
        throw_solver("recover_focal_shift: recovery failed (nonpositive focal)");

    RecoveredCamera out;
    out.cam = CameraModel{f, f, ccx, ccy, t_z};
    out.rms_residual_px = std::sqrt(std::max(0.0, res));
    return out;
}

PointMap assemble_metric(const PointMap& pm, double scale) {
    if (!(scale > 0.0)) throw_data("assemble_metric: scale must be positive");
    PointMap out = pm;
    for (auto& p : out.points) p = p * scale;
    out.frame = Frame::metric;
    return out;
}

}  // namespace pmgeo
