#pragma once

#include <span>
#include <vector>

#include "pmgeo/align.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/geometry.hpp"

namespace pmgeo {

// A local spherical region: pixels whose 3D points lie within `radius` of
// the point at `center_index`.
struct SphereRegion {
    int center_index = -1;
    double radius = 0.0;
    std::vector<int> members;
};

struct RegionSeed {
    int center_index = -1;
    double radius = 0.0;
};

struct LossReport {
    double value = 0.0;
    AffineAlignment alignment;    // the global alignment (or the last solved)
    int region_count = 0;
    int skipped_regions = 0;      // degenerate regions (< 2 members or no slope)
};

// Global robust loss: solves (s*, t*) with inverse ground-truth-depth
// weights, then evaluates sum_{i in M} (1/z_i) * ||s* pred_i + t* - gt_i||_1.
LossReport loss_global(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                       const AlignOptions& opts = {});

// Exact 3D Euclidean ball membership around ground-truth center points.
std::vector<SphereRegion> sample_sphere_regions(const PointMap& gt, const ValidMask& mask,
                                                std::span<const RegionSeed> seeds);

// Sum of the global robust loss restricted to each region, each with its own
// alignment. Regions that cannot support a scale+shift solve are skipped and
// counted.
LossReport loss_multiscale(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                           std::span<const SphereRegion> regions, const AlignOptions& opts = {});

// Decoupled log-scale objective: (pred_log_scale - log s*)^2 where s* is the
// optimal scale solved online between pred and gt. s* is a constant target;
// the report carries it in `alignment`.
LossReport loss_scale(double pred_log_scale, const PointMap& pred, const PointMap& gt,
                      const ValidMask& mask, const AlignOptions& opts = {});

// Default schedule: `cfg.loss_region_centers` seeded random mask pixels,
// each paired with every radius fraction of the valid points'
// bounding-sphere radius (max distance from the valid centroid).
std::vector<RegionSeed> make_loss_region_seeds(const PointMap& gt, const ValidMask& mask,
                                               const RunConfig& cfg);

// Bounding-sphere radius about the centroid of the valid points.
double bounding_sphere_radius(const PointMap& pm, const ValidMask& mask);

}  // namespace pmgeo
