#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/metrics.hpp"
#include "pmgeo/refine.hpp"
#include "pmgeo/selftest.hpp"
#include "pmgeo/synth.hpp"

#include <sstream>

namespace py = pybind11;
using namespace pmgeo;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BArray = py::array_t<bool, py::array::c_style | py::array::forcecast>;

DepthMap depth_from_numpy(const DArray& a) {
    if (a.ndim() != 2) throw_data("expected a (H, W) float array");
    DepthMap d(int(a.shape(1)), int(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), d.values.begin());
    return d;
}

ValidMask mask_from_numpy(const BArray& a) {
    if (a.ndim() != 2) throw_data("expected a (H, W) bool array");
    ValidMask m(int(a.shape(1)), int(a.shape(0)));
    for (int i = 0; i < m.size(); ++i) m.set(i, a.data()[i]);
    return m;
}

PointMap points_from_numpy(const DArray& a, Frame frame = Frame::affine) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw_data("expected a (H, W, 3) float array");
    PointMap pm(int(a.shape(1)), int(a.shape(0)), frame);
    const double* p = a.data();
    for (int i = 0; i < pm.size(); ++i)
        pm.points[i] = Vec3{p[i * 3], p[i * 3 + 1], p[i * 3 + 2]};
    return pm;
}

py::array depth_to_numpy(const DepthMap& d) {
    py::array_t<double> out({d.height, d.width});
    std::copy(d.values.begin(), d.values.end(), out.mutable_data());
    return out;
}

py::array mask_to_numpy(const ValidMask& m) {
    py::array_t<bool> out({m.height(), m.width()});
    for (int i = 0; i < m.size(); ++i) out.mutable_data()[i] = m.at(i);
    return out;
}

py::array points_to_numpy(const PointMap& pm) {
    py::array_t<double> out({pm.height, pm.width, 3});
    double* p = out.mutable_data();
    for (int i = 0; i < pm.size(); ++i) {
        p[i * 3] = pm.points[i].x;
        p[i * 3 + 1] = pm.points[i].y;
        p[i * 3 + 2] = pm.points[i].z;
    }
    return out;
}

std::vector<Vec3> vec3_list(const DArray& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw_data("expected a (N, 3) float array");
    std::vector<Vec3> out(a.shape(0));
    const double* p = a.data();
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = Vec3{p[i * 3], p[i * 3 + 1], p[i * 3 + 2]};
    return out;
}

std::vector<double> dbl_list(const DArray& a) {
    if (a.ndim() != 1) throw_data("expected a 1-D float array");
    return std::vector<double>(a.data(), a.data() + a.size());
}

py::dict alignment_dict(const AffineAlignment& a) {
    py::dict d;
    d["scale"] = a.scale;
    py::list shift;
    for (int k = 0; k < a.shift_dims; ++k) shift.append(a.shift[k]);
    d["shift"] = shift;
    d["objective"] = a.objective;
    d["scale_clamped"] = a.scale_clamped;
    return d;
}

py::dict bundle_dict(const MetricBundle& b) {
    py::dict d;
    d["protocol"] = protocol_name(b.protocol);
    d["rel"] = b.rel;
    d["delta1"] = b.delta1;
    d["n_valid"] = b.n_valid;
    d["n_excluded"] = b.n_excluded;
    if (b.alignment) d["alignment"] = alignment_dict(*b.alignment);
    return d;
}

RunConfig config_from_json(const std::string& text) {
    return text.empty() ? RunConfig{} : RunConfig::from_json_string(text);
}

CameraModel camera_args(double fx, double fy, double cx, double cy) {
    CameraModel cam{fx, fy, cx, cy, std::nullopt};
    cam.validate();
    return cam;
}

}  // namespace

PYBIND11_MODULE(_pmgeo, m) {
    m.doc() = "point-map alignment, refinement, and evaluation core";

    py::register_exception<Error>(m, "PmgeoError");

    // geometry
    m.def(
        "depth_to_points",
        [](const DArray& depth, const BArray& mask, double fx, double fy, double cx,
           double cy) {
            return points_to_numpy(
                depth_to_points(depth_from_numpy(depth), mask_from_numpy(mask),
                                camera_args(fx, fy, cx, cy)));
        },
        py::arg("depth"), py::arg("mask"), py::arg("fx"), py::arg("fy"), py::arg("cx"),
        py::arg("cy"));
    m.def("points_to_depth", [](const DArray& points) {
        return depth_to_numpy(points_to_depth(points_from_numpy(points)));
    });

    // alignment solvers
    m.def(
        "solve_scale_l1",
        [](const DArray& src, const DArray& dst, const DArray& w) {
            if (src.ndim() == 2)
                return alignment_dict(solve_scale_l1(vec3_list(src), vec3_list(dst),
                                                     dbl_list(w)));
            return alignment_dict(solve_depth_scale_l1(dbl_list(src), dbl_list(dst),
                                                       dbl_list(w)));
        },
        py::arg("src"), py::arg("dst"), py::arg("weights"));
    m.def(
        "solve_scale_shift_l1",
        [](const DArray& src, const DArray& dst, const DArray& w, uint64_t seed,
           int pair_samples) {
            AlignOptions opts;
            opts.seed = seed;
            opts.pair_samples = pair_samples;
            if (src.ndim() == 2)
                return alignment_dict(solve_scale_shift_l1(vec3_list(src), vec3_list(dst),
                                                           dbl_list(w), opts));
            return alignment_dict(solve_depth_scale_shift_l1(dbl_list(src), dbl_list(dst),
                                                             dbl_list(w), opts));
        },
        py::arg("src"), py::arg("dst"), py::arg("weights"), py::arg("seed") = 20240901,
        py::arg("pair_samples") = 4096);
    m.def(
        "solve_shift_l1",
        [](const DArray& src, const DArray& dst, const DArray& w) {
            if (src.ndim() == 2)
                return alignment_dict(solve_shift_l1(vec3_list(src), vec3_list(dst),
                                                     dbl_list(w)));
            return alignment_dict(solve_depth_shift_l1(dbl_list(src), dbl_list(dst),
                                                       dbl_list(w)));
        },
        py::arg("src"), py::arg("dst"), py::arg("weights"));
    m.def(
        "solve_disparity_affine_lsq",
        [](const DArray& src, const DArray& dst) {
            return alignment_dict(solve_disparity_affine_lsq(dbl_list(src), dbl_list(dst)));
        },
        py::arg("src"), py::arg("dst"));
    m.def(
        "apply_disparity_alignment",
        [](const DArray& disp, const BArray& mask, double scale, double shift, double z_max) {
            DisparityMap d(int(disp.shape(1)), int(disp.shape(0)));
            std::copy(disp.data(), disp.data() + disp.size(), d.values.begin());
            AffineAlignment a;
            a.scale = scale;
            a.shift[0] = shift;
            a.shift_dims = 1;
            return depth_to_numpy(apply_disparity_alignment(d, mask_from_numpy(mask), a, z_max));
        },
        py::arg("disparity"), py::arg("mask"), py::arg("scale"), py::arg("shift"),
        py::arg("z_max"));

    // losses
    m.def(
        "loss_global",
        [](const DArray& pred, const DArray& gt, const BArray& mask) {
            LossReport r = loss_global(points_from_numpy(pred), points_from_numpy(gt),
                                       mask_from_numpy(mask));
            py::dict d;
            d["value"] = r.value;
            d["alignment"] = alignment_dict(r.alignment);
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("mask"));
    m.def(
        "loss_multiscale",
        [](const DArray& pred, const DArray& gt, const BArray& mask,
           const std::string& config_json) {
            RunConfig cfg = config_from_json(config_json);
            PointMap g = points_from_numpy(gt);
            ValidMask msk = mask_from_numpy(mask);
            auto seeds = make_loss_region_seeds(g, msk, cfg);
            auto regions = sample_sphere_regions(g, msk, seeds);
            LossReport r = loss_multiscale(points_from_numpy(pred), g, msk, regions);
            py::dict d;
            d["value"] = r.value;
            d["region_count"] = r.region_count;
            d["skipped_regions"] = r.skipped_regions;
            return d;
        },
        py::arg("pred"), py::arg("gt"), py::arg("mask"), py::arg("config_json") = "");
    m.def(
        "loss_scale",
        [](double pred_log_scale, const DArray& pred, const DArray& gt, const BArray& mask) {
            LossReport r = loss_scale(pred_log_scale, points_from_numpy(pred),
                                      points_from_numpy(gt), mask_from_numpy(mask));
            py::dict d;
            d["value"] = r.value;
            d["scale_target"] = r.alignment.scale;
            return d;
        },
        py::arg("pred_log_scale"), py::arg("pred"), py::arg("gt"), py::arg("mask"));

    // camera
    m.def(
        "recover_focal_shift",
        [](const DArray& points, const BArray& mask) {
            RecoveredCamera rec =
                recover_focal_shift(points_from_numpy(points), mask_from_numpy(mask));
            py::dict d;
            d["fx"] = rec.cam.fx;
            d["fy"] = rec.cam.fy;
            d["cx"] = rec.cam.cx;
            d["cy"] = rec.cam.cy;
            d["z_shift"] = rec.cam.z_shift.value_or(0.0);
            d["rms_residual_px"] = rec.rms_residual_px;
            return d;
        },
        py::arg("points"), py::arg("mask"));
    m.def(
        "assemble_metric",
        [](const DArray& points, double scale) {
            return points_to_numpy(assemble_metric(points_from_numpy(points), scale));
        },
        py::arg("points"), py::arg("scale"));

    // refinement
    m.def(
        "poisson_complete",
        [](const DArray& known, const BArray& known_mask, const DArray& guide) {
            CompletionProblem prob{depth_from_numpy(known), mask_from_numpy(known_mask),
                                   depth_from_numpy(guide)};
            CompletionResult res = poisson_complete(prob);
            return py::make_tuple(depth_to_numpy(res.depth), mask_to_numpy(res.mask));
        },
        py::arg("known_depth"), py::arg("known_mask"), py::arg("guide"));
    m.def(
        "refine_pipeline",
        [](const DArray& real_depth, const BArray& mask, const DArray& pred_points, double fx,
           double fy, double cx, double cy, const std::string& config_json) {
            RunConfig cfg = config_from_json(config_json);
            RefineResult res =
                refine_pipeline(depth_from_numpy(real_depth), mask_from_numpy(mask),
                                points_from_numpy(pred_points), camera_args(fx, fy, cx, cy),
                                cfg);
            py::dict report;
            report["outlier_count"] = res.report.outlier_count;
            report["skipped_regions"] = res.report.skipped_regions;
            report["free_components"] = res.completion.free_components;
            report["cg_residual"] = res.completion.cg_residual;
            return py::make_tuple(depth_to_numpy(res.depth), mask_to_numpy(res.mask),
                                  mask_to_numpy(res.filtered_mask), report);
        },
        py::arg("real_depth"), py::arg("mask"), py::arg("pred_points"), py::arg("fx"),
        py::arg("fy"), py::arg("cx"), py::arg("cy"), py::arg("config_json") = "");

    // metrics
    m.def(
        "evaluate",
        [](const std::string& protocol, const DArray& pred, const DArray& gt,
           const BArray& mask, double z_max) {
            Protocol p = protocol_from_name(protocol);
            ValidMask msk = mask_from_numpy(mask);
            EvalOptions opts;
            opts.z_max = z_max;
            if (pred.ndim() == 3) {
                PointMap pp = points_from_numpy(pred);
                PointMap gg = points_from_numpy(gt);
                if (p == Protocol::local_point) {
                    RunConfig cfg;
                    auto seeds = make_loss_region_seeds(gg, msk, cfg);
                    auto regions = sample_sphere_regions(gg, msk, seeds);
                    opts.regions = regions;
                    return bundle_dict(evaluate_points(pp, gg, msk, p, opts));
                }
                return bundle_dict(evaluate_points(pp, gg, msk, p, opts));
            }
            DepthMap pd = depth_from_numpy(pred);
            DepthMap gd = depth_from_numpy(gt);
            if (p == Protocol::affine_inv_disparity) {
                DisparityMap disp(pd.width, pd.height);
                for (int i = 0; i < pd.size(); ++i)
                    if (msk.at(i)) disp.values[i] = 1.0 / pd.values[i];
                return bundle_dict(evaluate_disparity(disp, gd, msk, opts));
            }
            return bundle_dict(evaluate_depth(pd, gd, msk, p, opts));
        },
        py::arg("protocol"), py::arg("pred"), py::arg("gt"), py::arg("mask"),
        py::arg("z_max") = 1000.0);
    m.def(
        "boundary_f1",
        [](const DArray& pred, const DArray& gt, const BArray& mask,
           const std::vector<double>& thresholds) {
            return boundary_f1(depth_from_numpy(pred), depth_from_numpy(gt),
                               mask_from_numpy(mask), thresholds);
        },
        py::arg("pred"), py::arg("gt"), py::arg("mask"),
        py::arg("thresholds") = std::vector<double>{5, 10, 15, 20, 25});

    // synthetic scenes
    m.def(
        "render_scene",
        [](const std::string& spec_json) {
            RenderResult r = render(SceneSpec::from_json_string(spec_json));
            py::dict d;
            d["depth"] = depth_to_numpy(r.depth);
            d["points"] = points_to_numpy(r.points);
            d["mask"] = mask_to_numpy(r.mask);
            d["fx"] = r.cam.fx;
            d["fy"] = r.cam.fy;
            d["cx"] = r.cam.cx;
            d["cy"] = r.cam.cy;
            return d;
        },
        py::arg("spec_json"));
    m.def(
        "inject_artifact",
        [](const DArray& depth, const BArray& mask, const std::string& artifact_json) {
            InjectResult r = inject(depth_from_numpy(depth), mask_from_numpy(mask),
                                    ArtifactSpec::from_json_string(artifact_json));
            return py::make_tuple(depth_to_numpy(r.depth), mask_to_numpy(r.mask),
                                  mask_to_numpy(r.footprint));
        },
        py::arg("depth"), py::arg("mask"), py::arg("artifact_json"));
    m.def(
        "simulate_prediction",
        [](const DArray& gt_depth, const BArray& mask, double fx, double fy, double cx,
           double cy, double scale, double log_bias_amplitude, double bias_period_px) {
            PredictorSim sim;
            sim.scale = scale;
            sim.log_bias_amplitude = log_bias_amplitude;
            sim.bias_period_px = bias_period_px;
            return points_to_numpy(simulate_prediction(depth_from_numpy(gt_depth),
                                                       mask_from_numpy(mask),
                                                       camera_args(fx, fy, cx, cy), sim));
        },
        py::arg("gt_depth"), py::arg("mask"), py::arg("fx"), py::arg("fy"), py::arg("cx"),
        py::arg("cy"), py::arg("scale") = 1.0, py::arg("log_bias_amplitude") = 0.0,
        py::arg("bias_period_px") = 48.0);

    m.def("run_selftest", [](const std::string& config_json) {
        RunConfig cfg = config_from_json(config_json);
        std::ostringstream out;
        SelftestResult r = run_selftest(cfg, out);
        return py::make_tuple(r.ok(), out.str());
    },
    py::arg("config_json") = "");
}
