#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pmgeo {

// Every tunable that the algorithms leave open, with documented defaults.
// Serialized to/from JSON losslessly.
struct RunConfig {
    uint64_t seed = 20240901;

    // Multi-scale supervision region schedule: `loss_region_centers` random
    // mask pixels, each combined with every radius fraction (of the valid
    // points' bounding-sphere radius).
    int loss_region_centers = 64;
    std::vector<double> loss_radius_fractions{1.0 / 16.0, 0.25, 1.0};

    // Mismatch-filtering schedule: fresh centers per radius fraction, radii
    // as fractions of the predicted cloud's bounding-sphere radius.
    int refine_centers_per_radius = 128;
    std::vector<double> refine_radius_fractions{0.05, 0.15, 0.5};
    // Local alignments inside filtering are unweighted unless this is set,
    // in which case inverse real depth is used.
    bool refine_inverse_depth_weights = false;

    int align_pair_samples = 4096;
    double align_rel_tol = 1e-9;

    double cg_tol = 1e-10;
    int cg_max_iter_factor = 10;  // iterations allowed: factor * unknowns

    double z_max = 1000.0;  // disparity truncation depth

    std::vector<double> boundary_f1_thresholds{5.0, 10.0, 15.0, 20.0, 25.0};

    std::string aggregation = "image";  // "image" or "pixel"

    std::string to_json_string() const;
    static RunConfig from_json_string(const std::string& text);
    static RunConfig load(const std::string& path);
};

}  // namespace pmgeo
