#include "pmgeo/geometry.hpp"

namespace pmgeo {

PointMap depth_to_points(const DepthMap& depth, const ValidMask& mask, const CameraModel& cam) {
    cam.validate();
    require_same_shape(depth.width, depth.height, mask.width(), mask.height(), "depth vs mask");

    PointMap pm(depth.width, depth.height, Frame::affine);
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            int idx = v * depth.width + u;
            if (!mask.at(idx)) continue;
            double z = depth.values[idx];
            if (!(z > 0.0) || !std::isfinite(z))
                throw_data("depth_to_points: nonpositive or non-finite depth on valid pixel");
            pm.points[idx] = Vec3{(u + 0.5 - cam.cx) / cam.fx * z,
                                  (v + 0.5 - cam.cy) / cam.fy * z,
                                  z};
        }
    }
    return pm;
}

DepthMap points_to_depth(const PointMap& pm) {
    DepthMap d(pm.width, pm.height);
    for (int i = 0; i < pm.size(); ++i) d.values[i] = pm.points[i].z;
    return d;
}

Weights inverse_depth_weights(const DepthMap& gt_depth, const ValidMask& mask) {
    require_same_shape(gt_depth.width, gt_depth.height, mask.width(), mask.height(),
                       "depth vs mask");
    Weights w(gt_depth.width, gt_depth.height, 0.0);
    for (int i = 0; i < gt_depth.size(); ++i) {
        if (!mask.at(i)) continue;
        double z = gt_depth.values[i];
        if (!(z > 0.0) || !std::isfinite(z))
            throw_data("inverse_depth_weights: nonpositive depth on valid pixel");
        w.values[i] = 1.0 / z;
    }
    return w;
}

Weights uniform_weights(const ValidMask& mask) {
    Weights w(mask.width(), mask.height(), 0.0);
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) w.values[i] = 1.0;
    return w;
}

}  // namespace pmgeo
