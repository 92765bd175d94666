#pragma once

#include <span>
#include <vector>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/losses.hpp"

namespace pmgeo {

// Per-region outlier detection result. `union_mask` marks every pixel that
// any region flagged; it is always a subset of the input mask.
struct OutlierReport {
    struct Region {
        int center_index = -1;
        double radius = 0.0;
        AffineAlignment alignment;   // real -> predicted
        std::vector<int> outliers;
        bool skipped = false;
    };
    std::vector<Region> regions;
    ValidMask union_mask;
    int outlier_count = 0;
    int skipped_regions = 0;
};

struct DetectOptions {
    AlignOptions align;
    // Real depth may weight the local alignments (inverse depth); default is
    // unweighted.
    std::span<const double> weights{};
    // Ablation: one whole-mask alignment instead of per-region alignments,
    // thresholds unchanged.
    bool global_alignment = false;
};

// Region membership measured in predicted point space.
std::vector<SphereRegion> sample_pred_regions(const PointMap& pred, const ValidMask& mask,
                                              std::span<const RegionSeed> seeds);

// For each region, aligns the real points to the predictions (direction
// real -> pred) and flags members whose aligned Euclidean deviation strictly
// exceeds the region radius.
OutlierReport detect_outliers(const PointMap& pred, const PointMap& real_points,
                              const ValidMask& mask, std::span<const SphereRegion> regions,
                              const DetectOptions& opts = {});

// mask minus the union of per-region outlier sets.
ValidMask filter_mask(const ValidMask& mask, const OutlierReport& report);

// Poisson completion problem: reconstruct depth on the complement of
// `known_mask` by matching log-depth gradients of `guide`, with the known
// depths as Dirichlet boundary.
struct CompletionProblem {
    DepthMap known;       // valid on known_mask
    ValidMask known_mask;
    DepthMap guide;       // dense prediction over the full grid
};

struct PoissonOptions {
    double cg_tol = 1e-10;
    int max_iter_factor = 10;
};

struct CompletionResult {
    DepthMap depth;    // known pixels pass through unchanged
    ValidMask mask;    // full rectangle minus free-floating components
    int cg_iterations = 0;
    double cg_residual = 0.0;
    int free_components = 0;      // unknown components with no known boundary
    int free_component_pixels = 0;
};

// Minimizes sum over the unknown region of |grad log d - grad log guide|^2
// subject to d = known on the boundary ring (known pixels 4-adjacent to
// unknown ones). 4-neighbor forward differences; edges that straddle the
// boundary keep the known endpoint fixed. Solved per connected component by
// Jacobi-preconditioned conjugate gradients on the graph Laplacian.
// Components with no known boundary are filled with the guide itself
// (gradient integration pinned at the guide's own median) and excluded from
// the output mask.
CompletionResult poisson_complete(const CompletionProblem& problem,
                                  const PoissonOptions& opts = {});

struct RefineResult {
    DepthMap depth;
    ValidMask mask;           // completion mask (full grid minus free areas)
    ValidMask filtered_mask;  // input mask minus detected outliers
    OutlierReport report;
    CompletionResult completion;
    std::vector<RegionSeed> seeds;
};

// Full pipeline: unproject real depth, sample regions in predicted space,
// detect and remove mismatches, Poisson-complete the removed area from the
// predicted depth.
RefineResult refine_pipeline(const DepthMap& real_depth, const ValidMask& real_mask,
                             const PointMap& pred, const CameraModel& cam,
                             const RunConfig& cfg);

// Schedule used by refine_pipeline: fresh seeded centers for every radius
// fraction of the predicted cloud's bounding-sphere radius.
std::vector<RegionSeed> make_refine_region_seeds(const PointMap& pred, const ValidMask& mask,
                                                 const RunConfig& cfg);

}  // namespace pmgeo
