#include "pmgeo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmgeo/random.hpp"

namespace pmgeo {

const char* protocol_name(Protocol p) {
    switch (p) {
        case Protocol::scale_inv_point: return "scale_inv_point";
        case Protocol::affine_inv_point: return "affine_inv_point";
        case Protocol::local_point: return "local_point";
        case Protocol::scale_inv_depth: return "scale_inv_depth";
        case Protocol::affine_inv_depth: return "affine_inv_depth";
        case Protocol::affine_inv_disparity: return "affine_inv_disparity";
        case Protocol::metric_point: return "metric_point";
        case Protocol::metric_depth: return "metric_depth";
        case Protocol::metric_depth_gt_cam: return "metric_depth_gt_cam";
    }
    return "unknown";
}

Protocol protocol_from_name(const std::string& name) {
    for (Protocol p : {Protocol::scale_inv_point, Protocol::affine_inv_point,
                       Protocol::local_point, Protocol::scale_inv_depth,
                       Protocol::affine_inv_depth, Protocol::affine_inv_disparity,
                       Protocol::metric_point, Protocol::metric_depth,
                       Protocol::metric_depth_gt_cam})
        if (name == protocol_name(p)) return p;
    throw_usage("unknown protocol: " + name);
}

namespace {

constexpr double kPointInlierRatio = 0.25;  // ||dp||/||p|| threshold
constexpr double kDepthInlierRatio = 1.25;  // max(z1/z2, z2/z1) threshold

struct PointLists {
    std::vector<Vec3> pred, gt;
    std::vector<double> w;  // 1/z of gt
    std::vector<int> indices;
};

PointLists gather_points(const PointMap& pred, const PointMap& gt, std::span<const int> idx) {
    PointLists out;
    for (int i : idx) {
        double z = gt.points[i].z;
        if (!(z > 0.0)) throw_data("evaluate: nonpositive ground-truth depth on mask");
        out.pred.push_back(pred.points[i]);
        out.gt.push_back(gt.points[i]);
        out.w.push_back(1.0 / z);
        out.indices.push_back(i);
    }
    return out;
}

std::vector<int> mask_indices(const ValidMask& mask) {
    std::vector<int> idx;
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) idx.push_back(i);
    return idx;
}

MetricBundle bundle_from_point_lists(std::span<const Vec3> pred, std::span<const Vec3> gt) {
    MetricBundle b;
    std::vector<double> ratios;
    ratios.reserve(pred.size());
    int inliers = 0;
    for (size_t k = 0; k < pred.size(); ++k) {
        double n = gt[k].norm();
        if (!(n > 0.0)) {
            ++b.n_excluded;
            continue;
        }
        double ratio = (pred[k] - gt[k]).norm() / n;
        ratios.push_back(ratio);
        if (ratio < kPointInlierRatio) ++inliers;
    }
    b.n_valid = static_cast<int>(ratios.size());
    if (b.n_valid > 0) {
        b.rel = pairwise_sum(ratios) / b.n_valid * 100.0;
        b.delta1 = 100.0 * inliers / b.n_valid;
    }
    return b;
}

MetricBundle bundle_from_depth_lists(std::span<const double> pred, std::span<const double> gt) {
    MetricBundle b;
    std::vector<double> rels;
    rels.reserve(pred.size());
    int inliers = 0;
    for (size_t k = 0; k < pred.size(); ++k) {
        double z = gt[k];
        if (!(z > 0.0)) {
            ++b.n_excluded;
            continue;
        }
        double zh = pred[k];
        rels.push_back(std::fabs(zh - z) / z);
        double ratio = zh > 0.0 ? std::max(zh / z, z / zh)
                                : std::numeric_limits<double>::infinity();
        if (ratio < kDepthInlierRatio) ++inliers;
    }
    b.n_valid = static_cast<int>(rels.size());
    if (b.n_valid > 0) {
        b.rel = pairwise_sum(rels) / b.n_valid * 100.0;
        b.delta1 = 100.0 * inliers / b.n_valid;
    }
    return b;
}

Vec3 shift_vec(const AffineAlignment& a) { return Vec3{a.shift[0], a.shift[1], a.shift[2]}; }

}  // namespace

MetricBundle rel_delta_point(const PointMap& pred, const PointMap& gt, const ValidMask& mask) {
    require_same_shape(pred.width, pred.height, gt.width, gt.height, "pred vs gt");
    std::vector<int> idx = mask_indices(mask);
    std::vector<Vec3> p, g;
    for (int i : idx) {
        p.push_back(pred.points[i]);
        g.push_back(gt.points[i]);
    }
    MetricBundle b = bundle_from_point_lists(p, g);
    b.protocol = Protocol::metric_point;
    return b;
}

MetricBundle rel_delta_depth(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask) {
    require_same_shape(pred.width, pred.height, gt.width, gt.height, "pred vs gt");
    std::vector<int> idx = mask_indices(mask);
    std::vector<double> p, g;
    for (int i : idx) {
        p.push_back(pred.values[i]);
        g.push_back(gt.values[i]);
    }
    MetricBundle b = bundle_from_depth_lists(p, g);
    b.protocol = Protocol::metric_depth;
    return b;
}

MetricBundle evaluate_points(const PointMap& pred, const PointMap& gt, const ValidMask& mask,
                             Protocol protocol, const EvalOptions& opts) {
    std::vector<int> idx = mask_indices(mask);
    if (idx.empty()) throw_data("evaluate: empty mask");

    if (protocol == Protocol::local_point) {
        if (opts.regions.empty()) throw_data("evaluate: local_point requires regions");
        std::vector<double> rels, deltas;
        MetricBundle out;
        out.protocol = protocol;
        for (const SphereRegion& region : opts.regions) {
            if (region.members.size() < 2) continue;
            PointLists lists = gather_points(pred, gt, region.members);
            AffineAlignment a;
            try {
                a = solve_scale_shift_l1(lists.pred, lists.gt, lists.w, opts.align);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::solver) throw;
                continue;
            }
            std::vector<Vec3> aligned(lists.pred.size());
            for (size_t k = 0; k < lists.pred.size(); ++k)
                aligned[k] = a.scale * lists.pred[k] + shift_vec(a);
            MetricBundle rb = bundle_from_point_lists(aligned, lists.gt);
            if (rb.n_valid == 0) continue;
            rels.push_back(rb.rel);
            deltas.push_back(rb.delta1);
            out.n_valid += rb.n_valid;
            out.n_excluded += rb.n_excluded;
            ++out.regions_used;
        }
        if (out.regions_used == 0) throw_solver("evaluate: no usable local regions");
        out.rel = pairwise_sum(rels) / out.regions_used;
        out.delta1 = pairwise_sum(deltas) / out.regions_used;
        return out;
    }

    PointLists lists = gather_points(pred, gt, idx);
    AffineAlignment a;
    switch (protocol) {
        case Protocol::scale_inv_point:
            a = solve_scale_l1(lists.pred, lists.gt, lists.w);
            break;
        case Protocol::affine_inv_point:
            a = solve_scale_shift_l1(lists.pred, lists.gt, lists.w, opts.align);
            break;
        case Protocol::metric_point:
            a = solve_shift_l1(lists.pred, lists.gt, lists.w);
            break;
        default:
            throw_usage(std::string("evaluate: protocol ") + protocol_name(protocol) +
                        " does not take point maps");
    }
    std::vector<Vec3> aligned(lists.pred.size());
    for (size_t k = 0; k < lists.pred.size(); ++k)
        aligned[k] = a.scale * lists.pred[k] + shift_vec(a);
    MetricBundle b = bundle_from_point_lists(aligned, lists.gt);
    b.protocol = protocol;
    b.alignment = a;
    return b;
}

MetricBundle evaluate_depth(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                            Protocol protocol, const EvalOptions& opts) {
    std::vector<int> idx = mask_indices(mask);
    if (idx.empty()) throw_data("evaluate: empty mask");

    std::vector<double> p, g, w;
    for (int i : idx) {
        double z = gt.values[i];
        if (!(z > 0.0)) throw_data("evaluate: nonpositive ground-truth depth on mask");
        p.push_back(pred.values[i]);
        g.push_back(z);
        w.push_back(1.0 / z);
    }

    MetricBundle b;
    switch (protocol) {
        case Protocol::scale_inv_depth: {
            AffineAlignment a = solve_depth_scale_l1(p, g, w);
            for (double& v : p) v = a.scale * v;
            b = bundle_from_depth_lists(p, g);
            b.alignment = a;
            break;
        }
        case Protocol::affine_inv_depth: {
            AffineAlignment a = solve_depth_scale_shift_l1(p, g, w, opts.align);
            for (double& v : p) v = a.scale * v + a.shift[0];
            b = bundle_from_depth_lists(p, g);
            b.alignment = a;
            break;
        }
        case Protocol::metric_depth:
        case Protocol::metric_depth_gt_cam:
            b = bundle_from_depth_lists(p, g);
            break;
        default:
            throw_usage(std::string("evaluate: protocol ") + protocol_name(protocol) +
                        " does not take depth maps");
    }
    b.protocol = protocol;
    return b;
}

MetricBundle evaluate_disparity(const DisparityMap& pred, const DepthMap& gt_depth,
                                const ValidMask& mask, const EvalOptions& opts) {
    require_same_shape(pred.width, pred.height, gt_depth.width, gt_depth.height,
                       "pred vs gt");
    std::vector<int> idx = mask_indices(mask);
    if (idx.empty()) throw_data("evaluate: empty mask");

    std::vector<double> d_pred, d_gt, z_gt;
    int excluded = 0;
    for (int i : idx) {
        double z = gt_depth.values[i];
        if (!(z > 0.0)) {
            ++excluded;
            continue;
        }
        d_pred.push_back(pred.values[i]);
        d_gt.push_back(1.0 / z);
        z_gt.push_back(z);
    }
    if (d_pred.size() < 2) throw_data("evaluate: not enough valid disparity pixels");

    AffineAlignment a = solve_disparity_affine_lsq(d_pred, d_gt);
    double floor = 1.0 / opts.z_max;
    std::vector<double> z_pred(d_pred.size());
    for (size_t k = 0; k < d_pred.size(); ++k)
        z_pred[k] = 1.0 / std::max(a.scale * d_pred[k] + a.shift[0], floor);

    MetricBundle b = bundle_from_depth_lists(z_pred, z_gt);
    b.n_excluded += excluded;
    b.protocol = Protocol::affine_inv_disparity;
    b.alignment = a;
    return b;
}

namespace {

std::vector<uint8_t> edge_map(const DepthMap& d, const ValidMask& mask, double ratio) {
    int w = d.width, h = d.height;
    std::vector<uint8_t> edges(size_t(w) * h, 0);
    const int du[4] = {1, -1, 0, 0};
    const int dv[4] = {0, 0, 1, -1};
    for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
            int i = v * w + u;
            if (!mask.at(i)) continue;
            double zi = d.values[i];
            if (!(zi > 0.0)) continue;
            for (int k = 0; k < 4; ++k) {
                int uu = u + du[k], vv = v + dv[k];
                if (uu < 0 || uu >= w || vv < 0 || vv >= h) continue;
                int j = vv * w + uu;
                if (!mask.at(j)) continue;
                double zj = d.values[j];
                if (!(zj > 0.0)) continue;
                if (zj / zi > ratio) {  // i is the nearer, occluding side
                    edges[i] = 1;
                    break;
                }
            }
        }
    }
    return edges;
}

}  // namespace

double boundary_f1(const DepthMap& pred, const DepthMap& gt, const ValidMask& mask,
                   std::span<const double> thresholds_percent) {
    require_same_shape(pred.width, pred.height, gt.width, gt.height, "pred vs gt");
    if (thresholds_percent.empty()) throw_usage("boundary_f1: no thresholds");

    std::vector<double> f1s;
    for (double t : thresholds_percent) {
        double ratio = 1.0 + t / 100.0;
        std::vector<uint8_t> ep = edge_map(pred, mask, ratio);
        std::vector<uint8_t> eg = edge_map(gt, mask, ratio);
        long np = 0, ng = 0, both = 0;
        for (size_t i = 0; i < ep.size(); ++i) {
            np += ep[i];
            ng += eg[i];
            both += ep[i] & eg[i];
        }
        if (ng == 0)
            throw_data("boundary_f1: ground truth has no edges at threshold " +
                       std::to_string(t));
        double precision = np > 0 ? double(both) / np : 0.0;
        double recall = double(both) / ng;
        double f1 = (precision + recall) > 0.0
                        ? 2.0 * precision * recall / (precision + recall)
                        : 0.0;
        f1s.push_back(f1);
    }
    return pairwise_sum(f1s) / f1s.size() * 100.0;
}

}  // namespace pmgeo
