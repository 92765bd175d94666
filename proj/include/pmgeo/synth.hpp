#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmgeo/geometry.hpp"

namespace pmgeo {

// Analytic scene primitives. Everything is ray-cast in closed form at pixel
// centers so ground truth is exact; no sampling noise anywhere.
struct Primitive {
    enum class Kind { plane, sphere, box } kind = Kind::sphere;
    Vec3 center{0, 0, 5};   // sphere/box center; a point on the plane
    Vec3 normal{0, 0, -1};  // plane only
    Vec3 size{1, 1, 1};     // box extents
    double radius = 1.0;    // sphere radius; plane disk bound (0 = unbounded)
};

struct SceneSpec {
    uint64_t seed = 1;
    int width = 64, height = 64;
    double focal_px = 64.0;
    double background_depth = 8.0;  // fronto-parallel plane; 0 = none
    std::vector<Primitive> primitives;

    static SceneSpec from_json_string(const std::string& text);
    std::string to_json_string() const;
};

struct RenderResult {
    DepthMap depth;
    PointMap points;
    ValidMask mask;
    CameraModel cam;
};

// Exact nearest-hit raycast through pixel centers.
RenderResult render(const SceneSpec& spec);

// Label artifacts modeled after common capture failures: depth values
// translated across occluding contours (sensor asynchrony), missing regions
// (incomplete reconstruction), blended phantom surfaces, and multiplicative
// noise. The exact footprint of changed/invalidated pixels is returned so
// tests can score filtering against it.
struct ArtifactSpec {
    enum class Kind { boundary_shift, hole, ghost_surface, noise } kind = Kind::hole;

    // boundary_shift
    int shift_px = 0;
    int shift_dir_u = 1, shift_dir_v = 0;
    double contour_ratio = 1.2;  // edge detection for the contour band

    // hole
    int center_u = 0, center_v = 0;
    int pixel_count = 0;

    // ghost_surface
    double ghost_radius_px = 0.0;
    double ghost_depth = 0.0;
    double blend_alpha = 0.0;

    // noise
    double sigma_rel = 0.0;
    uint64_t noise_seed = 7;

    static ArtifactSpec from_json_string(const std::string& text);
};

struct InjectResult {
    DepthMap depth;
    ValidMask mask;
    ValidMask footprint;  // exactly the pixels that differ from the input
};

InjectResult inject(const DepthMap& depth, const ValidMask& mask, const ArtifactSpec& art);

// Simulates the systematic error profile of a synthetic-data-trained
// predictor: a global scale plus a smooth non-affine log-depth bias. Local
// relative structure is preserved while the absolute depth is biased, which
// is what local alignment tolerates and global alignment does not.
struct PredictorSim {
    double scale = 2.0;
    double log_bias_amplitude = 0.0;  // peak of the smooth log-depth bias
    double bias_period_px = 48.0;     // horizontal period of the bias field
};

PointMap simulate_prediction(const DepthMap& gt_depth, const ValidMask& mask,
                             const CameraModel& cam, const PredictorSim& sim);

}  // namespace pmgeo
