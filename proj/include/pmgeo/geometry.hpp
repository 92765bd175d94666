#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pmgeo/error.hpp"

namespace pmgeo {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    double norm_l1() const { return std::fabs(x) + std::fabs(y) + std::fabs(z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Coordinate frame of a point map. Affine maps are defined up to an unknown
// global positive scale and 3D translation; metric maps are in meters.
enum class Frame { affine, metric };

// Per-pixel validity. Row-major, top-left origin, like every grid type here.
class ValidMask {
public:
    ValidMask() = default;
    ValidMask(int width, int height, bool value = false)
        : width_(width), height_(height), bits_(size_t(width) * height, value ? 1 : 0) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int size() const { return width_ * height_; }

    bool at(int idx) const { return bits_[idx] != 0; }
    bool at(int u, int v) const { return bits_[size_t(v) * width_ + u] != 0; }
    void set(int idx, bool value) { bits_[idx] = value ? 1 : 0; }

    int count() const {
        int n = 0;
        for (uint8_t b : bits_) n += b;
        return n;
    }

    bool same_shape(int w, int h) const { return width_ == w && height_ == h; }

    bool operator==(const ValidMask&) const = default;

private:
    int width_ = 0, height_ = 0;
    std::vector<uint8_t> bits_;
};

// H x W grid of 3D points in camera space (camera looks down +z).
struct PointMap {
    int width = 0, height = 0;
    std::vector<Vec3> points;
    Frame frame = Frame::affine;

    PointMap() = default;
    PointMap(int w, int h, Frame f = Frame::affine)
        : width(w), height(h), points(size_t(w) * h), frame(f) {}

    int size() const { return width * height; }
    const Vec3& at(int idx) const { return points[idx]; }
    Vec3& at(int idx) { return points[idx]; }
};

// H x W scalar grid. Meters when metric, arbitrary positive units otherwise.
struct DepthMap {
    int width = 0, height = 0;
    std::vector<double> values;

    DepthMap() = default;
    DepthMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(size_t(w) * h, fill) {}

    int size() const { return width * height; }
    double at(int idx) const { return values[idx]; }
    double& at(int idx) { return values[idx]; }
};

// Inverse depth (1/length), same grid conventions as DepthMap.
struct DisparityMap {
    int width = 0, height = 0;
    std::vector<double> values;

    DisparityMap() = default;
    DisparityMap(int w, int h, double fill = 0.0)
        : width(w), height(h), values(size_t(w) * h, fill) {}

    int size() const { return width * height; }
    double at(int idx) const { return values[idx]; }
};

// Per-pixel nonnegative weights.
struct Weights {
    int width = 0, height = 0;
    std::vector<double> values;

    Weights() = default;
    Weights(int w, int h, double fill = 0.0)
        : width(w), height(h), values(size_t(w) * h, fill) {}

    double at(int idx) const { return values[idx]; }
};

// Pinhole camera. Pixel centers sit at (u + 0.5, v + 0.5) in image
// coordinates; that convention is used everywhere in this library.
struct CameraModel {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    std::optional<double> z_shift;

    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) throw_data("camera focal lengths must be positive");
    }
};

inline CameraModel centered_camera(double focal_px, int width, int height) {
    return CameraModel{focal_px, focal_px, width * 0.5, height * 0.5, std::nullopt};
}

// Pinhole unprojection: pixel (u,v) with depth z maps to
// ((u+0.5-cx)/fx*z, (v+0.5-cy)/fy*z, z). Invalid depth leaves the point at
// the origin; validity is tracked by the mask.
PointMap depth_to_points(const DepthMap& depth, const ValidMask& mask, const CameraModel& cam);

// z-channel extraction; validity propagates unchanged.
DepthMap points_to_depth(const PointMap& pm);

// w_i = 1/z_i on the mask, 0 elsewhere. Nonpositive depth on the mask is a
// data error.
Weights inverse_depth_weights(const DepthMap& gt_depth, const ValidMask& mask);

Weights uniform_weights(const ValidMask& mask);

inline void require_same_shape(int w1, int h1, int w2, int h2, const char* what) {
    if (w1 != w2 || h1 != h2)
        throw_data(std::string("dimension mismatch: ") + what);
}

}  // namespace pmgeo
