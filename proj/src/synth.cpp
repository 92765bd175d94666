#include "pmgeo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmgeo/random.hpp"

#include <json.hpp>

namespace pmgeo {

namespace {

using nlohmann::json;

Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw_data("synth: expected a 3-element array");
    return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Smallest positive hit parameter along ray t*dir (dir.z == 1, so the
// parameter is the depth itself). Returns +inf when missed.
double hit_plane(const Vec3& dir, const Vec3& point, const Vec3& normal, double bound_radius) {
    double denom = normal.dot(dir);
    if (denom == 0.0) return std::numeric_limits<double>::infinity();
    double t = normal.dot(point) / denom;
    if (!(t > 0.0)) return std::numeric_limits<double>::infinity();
    if (bound_radius > 0.0 && (dir * t - point).norm() > bound_radius)
        return std::numeric_limits<double>::infinity();
    return t;
}

double hit_sphere(const Vec3& dir, const Vec3& center, double radius) {
    double a = dir.norm2();
    double b = -2.0 * dir.dot(center);
    double c = center.norm2() - radius * radius;
    double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::numeric_limits<double>::infinity();
    double s = std::sqrt(disc);
    double t0 = (-b - s) / (2.0 * a);
    double t1 = (-b + s) / (2.0 * a);
    if (t0 > 0.0) return t0;
    if (t1 > 0.0) return t1;
    return std::numeric_limits<double>::infinity();
}

double hit_box(const Vec3& dir, const Vec3& center, const Vec3& size) {
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    const double d[3] = {dir.x, dir.y, dir.z};
    const double c[3] = {center.x, center.y, center.z};
    const double s[3] = {size.x * 0.5, size.y * 0.5, size.z * 0.5};
    for (int k = 0; k < 3; ++k) {
        double lo = c[k] - s[k], hi = c[k] + s[k];
        if (d[k] == 0.0) {
            if (0.0 < lo || 0.0 > hi) return std::numeric_limits<double>::infinity();
            continue;
        }
        double t0 = lo / d[k], t1 = hi / d[k];
        if (t0 > t1) std::swap(t0, t1);
        t_enter = std::max(t_enter, t0);
        t_exit = std::min(t_exit, t1);
    }
    if (t_enter > t_exit || !(t_enter > 0.0)) return std::numeric_limits<double>::infinity();
    return t_enter;
}

}  // namespace

SceneSpec SceneSpec::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw_data(std::string("scene spec: invalid JSON: ") + e.what());
    }
    SceneSpec spec;
    spec.seed = j.value("seed", uint64_t(1));
    spec.width = j.value("width", 64);
    spec.height = j.value("height", 64);
    spec.focal_px = j.value("focal_px", double(spec.width));
    spec.background_depth = j.value("background_depth", 0.0);
    if (j.contains("primitives")) {
        for (const auto& pj : j["primitives"]) {
            Primitive p;
            std::string kind = pj.value("kind", "sphere");
            if (kind == "plane")
                p.kind = Primitive::Kind::plane;
            else if (kind == "sphere")
                p.kind = Primitive::Kind::sphere;
            else if (kind == "box")
                p.kind = Primitive::Kind::box;
            else
                throw_data("scene spec: unknown primitive kind " + kind);
            if (pj.contains("center")) p.center = vec3_from_json(pj["center"]);
            if (pj.contains("point")) p.center = vec3_from_json(pj["point"]);
            if (pj.contains("normal")) p.normal = vec3_from_json(pj["normal"]);
            if (pj.contains("size")) p.size = vec3_from_json(pj["size"]);
            p.radius = pj.value("radius", p.kind == Primitive::Kind::plane ? 0.0 : 1.0);
            spec.primitives.push_back(p);
        }
    }
    return spec;
}

std::string SceneSpec::to_json_string() const {
    json j;
    j["seed"] = seed;
    j["width"] = width;
    j["height"] = height;
    j["focal_px"] = focal_px;
    j["background_depth"] = background_depth;
    j["primitives"] = json::array();
    for (const Primitive& p : primitives) {
        json pj;
        switch (p.kind) {
            case Primitive::Kind::plane: pj["kind"] = "plane"; break;
            case Primitive::Kind::sphere: pj["kind"] = "sphere"; break;
            case Primitive::Kind::box: pj["kind"] = "box"; break;
        }
        pj["center"] = {p.center.x, p.center.y, p.center.z};
        pj["normal"] = {p.normal.x, p.normal.y, p.normal.z};
        pj["size"] = {p.size.x, p.size.y, p.size.z};
        pj["radius"] = p.radius;
        j["primitives"].push_back(pj);
    }
    return j.dump(2);
}

RenderResult render(const SceneSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw_data("render: empty image");
    if (!(spec.focal_px > 0.0)) throw_data("render: focal must be positive");
    for (const Primitive& p : spec.primitives)
        if (!(p.center.z > 0.0))
            throw_data("render: primitive behind camera");
    if (spec.background_depth != 0.0 && !(spec.background_depth > 0.0))
        throw_data("render: background depth must be positive");

    RenderResult out;
    out.cam = centered_camera(spec.focal_px, spec.width, spec.height);
    out.depth = DepthMap(spec.width, spec.height);
    out.mask = ValidMask(spec.width, spec.height, false);
    out.points = PointMap(spec.width, spec.height, Frame::metric);

    for (int v = 0; v < spec.height; ++v) {
        for (int u = 0; u < spec.width; ++u) {
            int idx = v * spec.width + u;
            Vec3 dir{(u + 0.5 - out.cam.cx) / out.cam.fx,
                     (v + 0.5 - out.cam.cy) / out.cam.fy, 1.0};
            double best = std::numeric_limits<double>::infinity();
            for (const Primitive& p : spec.primitives) {
                double t = std::numeric_limits<double>::infinity();
                switch (p.kind) {
                    case Primitive::Kind::plane:
                        t = hit_plane(dir, p.center, p.normal, p.radius);
                        break;
                    case Primitive::Kind::sphere:
                        t = hit_sphere(dir, p.center, p.radius);
                        break;
                    case Primitive::Kind::box:
                        t = hit_box(dir, p.center, p.size);
                        break;
                }
                best = std::min(best, t);
            }
            if (spec.background_depth > 0.0) best = std::min(best, spec.background_depth);
            if (std::isfinite(best)) {
                out.depth.values[idx] = best;
                out.mask.set(idx, true);
                out.points.points[idx] = dir * best;
            }
        }
    }
    return out;
}

ArtifactSpec ArtifactSpec::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw_data(std::string("artifact spec: invalid JSON: ") + e.what());
    }
    ArtifactSpec a;
    std::string kind = j.value("kind", "hole");
    if (kind == "boundary_shift")
        a.kind = Kind::boundary_shift;
    else if (kind == "hole")
        a.kind = Kind::hole;
    else if (kind == "ghost_surface")
        a.kind = Kind::ghost_surface;
    else if (kind == "noise")
        a.kind = Kind::noise;
    else
        throw_data("artifact spec: unknown kind " + kind);
    a.shift_px = j.value("shift_px", 0);
    a.shift_dir_u = j.value("shift_dir_u", 1);
    a.shift_dir_v = j.value("shift_dir_v", 0);
    a.contour_ratio = j.value("contour_ratio", 1.2);
    a.center_u = j.value("center_u", 0);
    a.center_v = j.value("center_v", 0);
    a.pixel_count = j.value("pixel_count", 0);
    a.ghost_radius_px = j.value("ghost_radius_px", 0.0);
    a.ghost_depth = j.value("ghost_depth", 0.0);
    a.blend_alpha = j.value("blend_alpha", 0.0);
    a.sigma_rel = j.value("sigma_rel", 0.0);
    a.noise_seed = j.value("noise_seed", uint64_t(7));
    return a;
}

namespace {

// Pixels with a 4-neighbor whose depth ratio exceeds `ratio` (either side of
// the contour is marked, so the band straddles the edge).
std::vector<uint8_t> contour_pixels(const DepthMap& d, const ValidMask& mask, double ratio) {
    int w = d.width, h = d.height;
    std::vector<uint8_t> c(size_t(w) * h, 0);
    const int du[4] = {1, -1, 0, 0};
    const int dv[4] = {0, 0, 1, -1};
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            int i = v * w + u;
            if (!mask.at(i) || !(d.values[i] > 0.0)) continue;
            for (int k = 0; k < 4; ++k) {
                int uu = u + du[k], vv = v + dv[k];
                if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                int j = vv * w + uu;
                if (!mask.at(j) || !(d.values[j] > 0.0)) continue;
                double r = std::max(d.values[i] / d.values[j], d.values[j] / d.values[i]);
                if (r > ratio) {
                    c[i] = 1;
                    break;
                }
            }
        }
    }
    return c;
}

std::vector<uint8_t> dilate(const std::vector<uint8_t>& in, int w, int h, int iterations) {
    std::vector<uint8_t> cur = in;
    for (int it = 0; it < iterations; ++it) {
        std::vector<uint8_t> next = cur;
        for (int v = 0; v < h; ++v) {
            for (int u = 0; u < w; ++u) {
                if (cur[v * w + u]) continue;
                for (int dv = -1; dv <= 1; ++dv) {
                    for (int du = -1; du <= 1; ++du) {
                        int uu = u + du, vv = v + dv;
                        if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                        if (cur[vv * w + uu]) {
                            next[v * w + u] = 1;
                            goto done;
                        }
                    }
                }
            done:;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

InjectResult inject(const DepthMap& depth, const ValidMask& mask, const ArtifactSpec& art) {
    int w = depth.width, h = depth.height;
    require_same_shape(w, h, mask.width(), mask.height(), "depth vs mask");

    InjectResult out;
    out.depth = depth;
    out.mask = mask;
    out.footprint = ValidMask(w, h, false);

    switch (art.kind) {
        case ArtifactSpec::Kind::boundary_shift: {
            if (art.shift_px <= 0) break;
            std::vector<uint8_t> band =
                dilate(contour_pixels(depth, mask, art.contour_ratio), w, h, art.shift_px);
            for (int v = 0; v < h; ++v) {
                for (int u = 0; u < w; ++u) {
                    int i = v * w + u;
                    if (!band[i] || !mask.at(i)) continue;
                    int su = u - art.shift_dir_u * art.shift_px;
                    int sv = v - art.shift_dir_v * art.shift_px;
                    if (su < 0 || su >= w || sv < 0 || sv >= h) continue;
                    int j = sv * w + su;
                    if (!mask.at(j)) continue;
                    out.depth.values[i] = depth.values[j];
                }
            }
            break;
        }
        case ArtifactSpec::Kind::hole: {
            if (art.pixel_count <= 0) break;
            // The pixel_count nearest pixels to the center, ties by index.
            std::vector<std::pair<long, int>> order;
            order.reserve(size_t(w) * h);
            for (int v = 0; v < h; ++v) {
                for (int u = 0; u < w; ++u) {
                    long d2 = long(u - art.center_u) * (u - art.center_u) +
                              long(v - art.center_v) * (v - art.center_v);
                    order.emplace_back(d2, v * w + u);
                }
            }
            std::sort(order.begin(), order.end());
            int taken = 0;
            for (const auto& [d2, i] : order) {
                if (taken >= art.pixel_count) break;
                out.mask.set(i, false);
                out.footprint.set(i, true);
                ++taken;
            }
            break;
        }
        case ArtifactSpec::Kind::ghost_surface: {
            if (!(art.ghost_radius_px > 0.0) || art.blend_alpha == 0.0) break;
            if (!(art.ghost_depth > 0.0)) throw_data("inject: ghost_depth must be positive");
            double r2 = art.ghost_radius_px * art.ghost_radius_px;
            for (int v = 0; v < h; ++v) {
                for (int u = 0; u < w; ++u) {
                    int i = v * w + u;
                    if (!mask.at(i)) continue;
                    double d2 = double(u - art.center_u) * (u - art.center_u) +
                                double(v - art.center_v) * (v - art.center_v);
                    if (d2 > r2) continue;
                    out.depth.values[i] = (1.0 - art.blend_alpha) * depth.values[i] +
                                          art.blend_alpha * art.ghost_depth;
                }
            }
            break;
        }
        case ArtifactSpec::Kind::noise: {
            if (art.sigma_rel == 0.0) break;
            for (int i = 0; i < w * h; ++i) {
                if (!mask.at(i)) continue;
                SplitMix64 rng(hash_combine(art.noise_seed, uint64_t(i)));
                out.depth.values[i] = depth.values[i] * std::exp(art.sigma_rel * rng.normal());
            }
            break;
        }
    }

    for (int i = 0; i < w * h; ++i) {
        bool changed = out.depth.values[i] != depth.values[i] || out.mask.at(i) != mask.at(i);
        if (changed) out.footprint.set(i, true);
    }
    return out;
}

PointMap simulate_prediction(const DepthMap& gt_depth, const ValidMask& mask,
                             const CameraModel& cam, const PredictorSim& sim) {
    if (!(sim.scale > 0.0)) throw_data("simulate_prediction: scale must be positive");
    DepthMap biased(gt_depth.width, gt_depth.height);
    for (int v = 0; v < gt_depth.height; ++v) {
        for (int u = 0; u < gt_depth.width; ++u) {
            int i = v * gt_depth.width + u;
            if (!mask.at(i)) continue;
            double bias = 0.0;
            if (sim.log_bias_amplitude != 0.0) {
                double phase = 2.0 * M_PI * (u + 0.5) / sim.bias_period_px;
                double phase_v = 2.0 * M_PI * (v + 0.5) / (sim.bias_period_px * 1.7);
                bias = sim.log_bias_amplitude * 0.5 * (std::sin(phase) + std::cos(phase_v));
            }
            biased.values[i] = sim.scale * gt_depth.values[i] * std::exp(bias);
        }
    }
    return depth_to_points(biased, mask, cam);
}

}  // namespace pmgeo
