// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: pmgeo_acceptance --cli /path/to/pmgeo

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/io.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/metrics.hpp"
#include "pmgeo/random.hpp"
#include "pmgeo/refine.hpp"
#include "pmgeo/synth.hpp"

namespace fs = std::filesystem;
using namespace pmgeo;

namespace {

struct Gate {
    int index = 0;
    int failures = 0;

    void report(const std::string& name, bool ok, const std::string& detail) {
        ++index;
        std::printf("[%d/9] %s ... %s%s\n", index, name.c_str(), ok ? "PASS" : "FAIL",
                    detail.empty() ? "" : ("  (" + detail + ")").c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

// --- seeded instance generators --------------------------------------------

struct PointInstance {
    std::vector<Vec3> src, dst;
    std::vector<double> w;
    std::array<std::vector<double>, 3> sx, sy;
    std::vector<AxisSeries> axes;

    void build_axes() {
        axes.clear();
        for (int k = 0; k < 3; ++k) {
            sx[k].clear();
            sy[k].clear();
            for (size_t i = 0; i < src.size(); ++i) {
                sx[k].push_back(src[i][k]);
                sy[k].push_back(dst[i][k]);
            }
            axes.push_back(AxisSeries{sx[k], sy[k], w});
        }
    }
};

PointInstance point_instance(SplitMix64& rng, int n, bool with_shift, double outlier_frac) {
    PointInstance inst;
    double s = rng.uniform(0.5, 3.0);
    Vec3 t = with_shift ? Vec3{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)}
                        : Vec3{0, 0, 0};
    for (int i = 0; i < n; ++i) {
        Vec3 p{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.5, 9.0)};
        Vec3 q = s * p + t;
        q.x += 0.05 * rng.normal();
        q.y += 0.05 * rng.normal();
        q.z += 0.05 * rng.normal();
        if (rng.uniform() < outlier_frac)
            q = q * rng.uniform(3.0, 8.0) +
                Vec3{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0, 5)};
        inst.src.push_back(p);
        inst.dst.push_back(q);
        inst.w.push_back(1.0 / std::max(0.1, std::fabs(q.z)));
    }
    inst.build_axes();
    return inst;
}

struct ScalarInstance {
    std::vector<double> src, dst, w;
};

ScalarInstance scalar_instance(SplitMix64& rng, int n, bool with_shift, double outlier_frac) {
    ScalarInstance inst;
    double s = rng.uniform(0.5, 3.0);
    double b = with_shift ? rng.uniform(-1.5, 1.5) : 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.uniform(0.5, 9.0);
        double y = s * z + b + 0.03 * rng.normal();
        if (rng.uniform() < outlier_frac) y *= rng.uniform(3.0, 10.0);
        inst.src.push_back(z);
        inst.dst.push_back(std::max(0.05, y));
        inst.w.push_back(1.0 / z);
    }
    return inst;
}

SceneSpec boxes_scene() {
    SceneSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.focal_px = 64.0;
    spec.background_depth = 8.0;
    Primitive near_box;
    near_box.kind = Primitive::Kind::box;
    near_box.center = Vec3{-0.9, 0.4, 3.2};
    near_box.size = Vec3{1.4, 1.6, 0.6};
    Primitive far_box;
    far_box.kind = Primitive::Kind::box;
    far_box.center = Vec3{1.2, -0.7, 5.0};
    far_box.size = Vec3{1.6, 1.2, 0.5};
    spec.primitives = {near_box, far_box};
    return spec;
}

SceneSpec varied_scene(uint64_t seed, double focal, int size) {
    SceneSpec spec;
    spec.seed = seed;
    spec.width = size;
    spec.height = size;
    spec.focal_px = focal;
    spec.background_depth = 8.0 + (seed % 5) * 0.35;
    Primitive s;
    s.kind = Primitive::Kind::sphere;
    s.center = Vec3{-0.8 + 0.05 * double(seed % 7), 0.3, 4.2};
    s.radius = 1.1;
    Primitive b;
    b.kind = Primitive::Kind::box;
    b.center = Vec3{1.2, -0.6, 5.5};
    b.size = Vec3{1.3, 1.6, 0.9};
    Primitive p;
    p.kind = Primitive::Kind::plane;
    p.center = Vec3{0.0, 1.6, 6.5};
    p.normal = Vec3{0.15, 0.4, -1.0};
    p.radius = 2.0;
    spec.primitives = {s, b, p};
    return spec;
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool same_bytes(const fs::path& a, const fs::path& b) { return read_file(a) == read_file(b); }

int run_cmd(const std::string& cmd) { return std::system(cmd.c_str()); }

}  // namespace

int main(int argc, char** argv) {
    std::string cli;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--cli") cli = argv[i + 1];

    Gate gate;
    auto t_total = std::chrono::steady_clock::now();

    // ------------------------------------------------------------------ 1
    {
        auto t0 = std::chrono::steady_clock::now();
        double worst_param = 0.0, worst_obj = 0.0;
        bool clamped = false;
        SplitMix64 rng(101);
        for (int trial = 0; trial < 100; ++trial) {
            int n = 10 + int(rng.uniform_index(991));

            PointInstance sc = point_instance(rng, n, false, 0.25);
            AffineAlignment a1 = solve_scale_l1(sc.src, sc.dst, sc.w);
            double o1 = oracles::scale_only(sc.axes);
            worst_param = std::max(worst_param, rel_err(a1.scale, o1));
            double obj1 = oracles::objective_l1(sc.axes, o1, {});
            worst_obj = std::max(worst_obj, std::fabs(a1.objective - obj1) /
                                                std::max(1e-12, obj1));
            clamped |= a1.scale_clamped;

            PointInstance ss = point_instance(rng, n, true, 0.3);
            AffineAlignment a2 = solve_scale_shift_l1(ss.src, ss.dst, ss.w);
            std::vector<double> b2(3);
            double o2 = oracles::scale_shift(ss.axes, &b2);
            worst_param = std::max(worst_param, rel_err(a2.scale, o2));
            double obj2 = oracles::objective_l1(ss.axes, o2, b2);
            worst_obj = std::max(worst_obj, std::fabs(a2.objective - obj2) /
                                                std::max(1e-12, obj2));
            clamped |= a2.scale_clamped;

            PointInstance sh = point_instance(rng, n, true, 0.2);
            AffineAlignment a3 = solve_shift_l1(sh.src, sh.dst, sh.w);
            std::vector<double> o3 = oracles::shift_only(sh.axes);
            for (int k = 0; k < 3; ++k)
                worst_param = std::max(worst_param, rel_err(a3.shift[k], o3[k]));

            ScalarInstance d1 = scalar_instance(rng, n, false, 0.2);
            AxisSeries dax1{d1.src, d1.dst, d1.w};
            AffineAlignment a4 = solve_depth_scale_l1(d1.src, d1.dst, d1.w);
            double o4 = oracles::scale_only(std::span<const AxisSeries>(&dax1, 1));
            worst_param = std::max(worst_param, rel_err(a4.scale, o4));

            ScalarInstance d2 = scalar_instance(rng, n, true, 0.2);
            AxisSeries dax2{d2.src, d2.dst, d2.w};
            AffineAlignment a5 = solve_depth_scale_shift_l1(d2.src, d2.dst, d2.w);
            std::vector<double> b5(1);
            double o5 = oracles::scale_shift(std::span<const AxisSeries>(&dax2, 1), &b5);
            worst_param = std::max(worst_param, rel_err(a5.scale, o5));
            worst_param = std::max(worst_param, rel_err(a5.shift[0], b5[0]));
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = worst_param <= 1e-6 && worst_obj <= 1e-8 && !clamped && secs < 30.0;
        gate.report("solver-oracle equivalence (100 instances, all L1 variants)", ok,
                    "param " + fmt(worst_param) + ", obj " + fmt(worst_obj) + ", " +
                        fmt(secs) + " s");
    }

    // ------------------------------------------------------------------ 2
    {
        SplitMix64 rng(202);
        double worst_solver = 0.0, worst_loss = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            int n = 64;
            PointMap pred(n, n), gt(n, n);
            ValidMask mask(n, n, true);
            double s = rng.uniform(0.5, 4.0);
            Vec3 t{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0, 3)};
            for (int i = 0; i < n * n; ++i) {
                Vec3 p{rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0.5, 9)};
                pred.points[i] = p;
                gt.points[i] = s * p + t;
                if (!(gt.points[i].z > 0.0)) gt.points[i].z = 0.5;
            }
            std::vector<double> w;
            std::vector<Vec3> ps, gs;
            for (int i = 0; i < n * n; ++i) {
                ps.push_back(pred.points[i]);
                gs.push_back(gt.points[i]);
                w.push_back(1.0 / gt.points[i].z);
            }
            AffineAlignment a = solve_scale_shift_l1(ps, gs, w);
            worst_solver = std::max(worst_solver, a.objective);
            worst_loss = std::max(worst_loss, loss_global(pred, gt, mask).value);
        }
        bool ok = worst_solver <= 1e-9 && worst_loss <= 1e-9;
        gate.report("exact affine recovery (solver and global loss)", ok,
                    "solver " + fmt(worst_solver) + ", loss " + fmt(worst_loss));
    }

    // ------------------------------------------------------------------ 3
    {
        SplitMix64 rng(303);
        bool all_equal = true;
        for (int trial = 0; trial < 20; ++trial) {
            int n = 50 + int(rng.uniform_index(400));
            std::vector<double> src(n), dst(n), w(n);
            double s = rng.uniform(0.8, 2.5);
            for (int i = 0; i < n; ++i) {
                src[i] = rng.uniform(0.5, 8.0);
                dst[i] = s * src[i] * (1.0 + 0.02 * rng.normal());
                w[i] = rng.uniform(0.2, 1.0);
            }
            double total = 0.0;
            for (int i = 0; i < n; ++i) total += w[i] * src[i];
            std::vector<double> m1 = dst, m2 = dst;
            double used = 0.0;
            for (int i = 0; i < n && used + w[i] * src[i] < 0.45 * total; ++i) {
                used += w[i] * src[i];
                m1[i] = dst[i] * 1e3;
                m2[i] = dst[i] * 1e9;
            }
            AffineAlignment a1 = solve_depth_scale_l1(src, m1, w);
            AffineAlignment a2 = solve_depth_scale_l1(src, m2, w);
            if (a1.scale != a2.scale) all_equal = false;
        }
        gate.report("breakdown robustness (exact equality, 20 trials)", all_equal, "");
    }

    // ------------------------------------------------------------------ 4
    {
        double worst_oracle = 0.0, worst_cg = 0.0;
        bool max_principle = true;
        SplitMix64 rng(404);
        for (int trial = 0; trial < 3; ++trial) {
            int n = trial == 2 ? 48 : 64;
            DepthMap truth(n, n);
            double alpha = 0.02 + 0.01 * trial, beta = 0.03 - 0.005 * trial;
            for (int v = 0; v < n; ++v)
                for (int u = 0; u < n; ++u)
                    truth.values[v * n + u] = 2.0 * std::exp(alpha * u + beta * v);

            ValidMask known(n, n, true);
            if (trial == 0) {
                int cu = 30, cv = 28, r2 = 16 * 16;
                for (int v = 0; v < n; ++v)
                    for (int u = 0; u < n; ++u)
                        if ((u - cu) * (u - cu) + (v - cv) * (v - cv) <= r2)
                            known.set(v * n + u, false);
            } else if (trial == 1) {
                for (int v = 20; v < 40; ++v)
                    for (int u = 14; u < 44; ++u) known.set(v * n + u, false);
            } else {
                for (int v = 8; v < 24; ++v)
                    for (int u = 6; u < 22; ++u) known.set(v * n + u, false);
                for (int v = 28; v < 42; ++v)
                    for (int u = 26; u < 44; ++u) known.set(v * n + u, false);
            }

            DepthMap guide = truth;
            for (auto& z : guide.values) z *= 2.5;  // lambda != 1 is invisible to grad log

            CompletionProblem prob{truth, known, guide};
            CompletionResult res = poisson_complete(prob);
            DepthMap dense = oracles::poisson_dense(truth, known, guide);
            for (int i = 0; i < n * n; ++i)
                worst_oracle = std::max(worst_oracle,
                                        std::fabs(res.depth.values[i] - dense.values[i]) /
                                            dense.values[i]);
            worst_cg = std::max(worst_cg, res.cg_residual);

            // constant guide: harmonic fill within the boundary-ring range
            DepthMap flat(n, n, 1.0);
            DepthMap noisy_known = truth;
            for (int i = 0; i < n * n; ++i)
                if (known.at(i)) noisy_known.values[i] *= std::exp(0.1 * rng.normal());
            CompletionProblem p2{noisy_known, known, flat};
            CompletionResult r2 = poisson_complete(p2);
            double bmin = 1e300, bmax = 0.0;
            for (int v = 0; v < n; ++v) {
                for (int u = 0; u < n; ++u) {
                    int i = v * n + u;
                    if (!known.at(i)) continue;
                    bool ring = (u > 0 && !known.at(i - 1)) || (u + 1 < n && !known.at(i + 1)) ||
                                (v > 0 && !known.at(i - n)) || (v + 1 < n && !known.at(i + n));
                    if (ring) {
                        bmin = std::min(bmin, noisy_known.values[i]);
                        bmax = std::max(bmax, noisy_known.values[i]);
                    }
                }
            }
            for (int i = 0; i < n * n; ++i)
                if (!known.at(i)) {
                    double z = r2.depth.values[i];
                    if (z < bmin * (1 - 1e-9) || z > bmax * (1 + 1e-9)) max_principle = false;
                }
        }
        bool ok = worst_oracle <= 1e-8 && worst_cg <= 1e-10 && max_principle;
        gate.report("poisson completion vs dense direct solve", ok,
                    "err " + fmt(worst_oracle) + ", cg " + fmt(worst_cg) +
                        (max_principle ? "" : ", max principle violated"));
    }

    // ------------------------------------------------------------------ 5
    {
        RenderResult scene = render(boxes_scene());
        ArtifactSpec art;
        art.kind = ArtifactSpec::Kind::boundary_shift;
        art.shift_px = 3;
        InjectResult injected = inject(scene.depth, scene.mask, art);

        // Predictions carry a global scale plus a smooth non-affine absolute
        // bias, the error profile local alignment must tolerate and a single
        // global alignment cannot.
        PredictorSim sim;
        sim.scale = 2.0;
        sim.log_bias_amplitude = 0.12;
        sim.bias_period_px = 48.0;
        PointMap pred = simulate_prediction(scene.depth, scene.mask, scene.cam, sim);

        RunConfig cfg;
        auto seeds = make_refine_region_seeds(pred, injected.mask, cfg);
        auto regions = sample_pred_regions(pred, injected.mask, seeds);
        PointMap real_points = depth_to_points(injected.depth, injected.mask, scene.cam);

        DetectOptions local_opts;
        OutlierReport local = detect_outliers(pred, real_points, injected.mask, regions,
                                              local_opts);
        DetectOptions global_opts;
        global_opts.global_alignment = true;
        OutlierReport global = detect_outliers(pred, real_points, injected.mask, regions,
                                               global_opts);

        int art_total = 0, art_hit = 0, clean_total = 0, clean_local = 0, clean_global = 0;
        for (int i = 0; i < injected.mask.size(); ++i) {
            if (!injected.mask.at(i)) continue;
            if (injected.footprint.at(i)) {
                ++art_total;
                if (local.union_mask.at(i)) ++art_hit;
            } else {
                ++clean_total;
                if (local.union_mask.at(i)) ++clean_local;
                if (global.union_mask.at(i)) ++clean_global;
            }
        }
        double recall = double(art_hit) / art_total;
        double fpr = double(clean_local) / clean_total;
        double fpr_global = double(clean_global) / clean_total;
        bool ok = recall >= 0.95 && fpr <= 0.05 && fpr_global > 10.0 * std::max(fpr, 1e-4);
        gate.report("refinement efficacy and local-vs-global contrast", ok,
                    "recall " + fmt(recall) + ", fpr " + fmt(fpr) + ", global fpr " +
                        fmt(fpr_global));
    }

    // ------------------------------------------------------------------ 6
    {
        RenderResult scene = render(varied_scene(606, 64.0, 64));
        EvalOptions opts;
        bool ok = true;
        std::string detail;

        for (Protocol p : {Protocol::scale_inv_point, Protocol::affine_inv_point,
                           Protocol::metric_point}) {
            MetricBundle b = evaluate_points(scene.points, scene.points, scene.mask, p, opts);
            if (!(b.rel <= 1e-9 && b.delta1 == 100.0)) ok = false;
        }
        RunConfig cfg;
        auto seeds = make_loss_region_seeds(scene.points, scene.mask, cfg);
        auto regions = sample_sphere_regions(scene.points, scene.mask, seeds);
        EvalOptions lopts;
        lopts.regions = regions;
        MetricBundle lb = evaluate_points(scene.points, scene.points, scene.mask,
                                          Protocol::local_point, lopts);
        if (!(lb.rel <= 1e-9 && lb.delta1 == 100.0)) ok = false;
        for (Protocol p : {Protocol::scale_inv_depth, Protocol::affine_inv_depth,
                           Protocol::metric_depth, Protocol::metric_depth_gt_cam}) {
            MetricBundle b = evaluate_depth(scene.depth, scene.depth, scene.mask, p, opts);
            if (!(b.rel <= 1e-9 && b.delta1 == 100.0)) ok = false;
        }
        DisparityMap disp(scene.depth.width, scene.depth.height);
        for (int i = 0; i < scene.depth.size(); ++i)
            if (scene.mask.at(i)) disp.values[i] = 1.0 / scene.depth.values[i];
        MetricBundle db = evaluate_disparity(disp, scene.depth, scene.mask, opts);
        if (!(db.rel <= 1e-9 && db.delta1 == 100.0)) ok = false;
        if (!ok) detail += "identity failed; ";

        DepthMap scaled = scene.depth;
        for (auto& z : scaled.values) z *= 1.3;
        MetricBundle md = evaluate_depth(scaled, scene.depth, scene.mask,
                                         Protocol::metric_depth, opts);
        if (md.delta1 != 0.0) {
            ok = false;
            detail += "1.3x delta1 != 0; ";
        }

        // Scale-dominated corruptions: the scale-only family then strictly
        // beats translation-only, and affine beats both.
        int mono_fail = 0;
        for (int trial = 0; trial < 20; ++trial) {
            SplitMix64 rng(6100 + trial);
            RenderResult sc = render(varied_scene(6200 + trial, 64.0, 48));
            double s = rng.uniform(2.2, 3.0);
            Vec3 t{rng.uniform(0.1, 0.3), rng.uniform(-0.3, -0.1), rng.uniform(0.1, 0.3)};
            PointMap pred = sc.points;
            for (int i = 0; i < pred.size(); ++i) {
                if (!sc.mask.at(i)) continue;
                Vec3 noise{0.01 * rng.normal(), 0.01 * rng.normal(), 0.01 * rng.normal()};
                pred.points[i] = (sc.points.points[i] - t) / s + noise;
            }
            double rel_affine = evaluate_points(pred, sc.points, sc.mask,
                                                Protocol::affine_inv_point, opts).rel;
            double rel_scale = evaluate_points(pred, sc.points, sc.mask,
                                               Protocol::scale_inv_point, opts).rel;
            double rel_shift = evaluate_points(pred, sc.points, sc.mask,
                                               Protocol::metric_point, opts).rel;
            if (!(rel_affine <= rel_scale + 1e-12 && rel_scale <= rel_shift + 1e-12))
                ++mono_fail;
        }
        if (mono_fail) {
            ok = false;
            detail += "monotonicity failed on " + std::to_string(mono_fail) + " scenes";
        }
        gate.report("metric-harness identities and protocol monotonicity", ok, detail);
    }

    // ------------------------------------------------------------------ 7
    {
        bool ok = true;
        std::string detail;
        for (double f : {200.0, 500.0, 1200.0}) {
            RenderResult scene = render(varied_scene(707, f, 96));
            RecoveredCamera rec = recover_focal_shift(scene.points, scene.mask);
            std::vector<double> zs;
            for (int i = 0; i < scene.mask.size(); ++i)
                if (scene.mask.at(i)) zs.push_back(scene.depth.values[i]);
            std::sort(zs.begin(), zs.end());
            double med = zs[zs.size() / 2];
            double f_err = std::fabs(rec.cam.fx - f) / f;
            double t_err = std::fabs(rec.cam.z_shift.value_or(0.0)) / med;
            if (f_err > 1e-3 || t_err > 1e-3) {
                ok = false;
                detail += "f=" + fmt(f) + ": ferr " + fmt(f_err) + " terr " + fmt(t_err) + "; ";
            }
        }
        bool raised = false;
        SceneSpec flat;
        flat.width = 32;
        flat.height = 32;
        flat.focal_px = 32.0;
        flat.background_depth = 5.0;
        RenderResult plane = render(flat);
        try {
            recover_focal_shift(plane.points, plane.mask);
        } catch (const Error& e) {
            raised = e.kind() == ErrorKind::solver;
        }
        if (!raised) {
            ok = false;
            detail += "ambiguity error not raised";
        }
        gate.report("camera recovery round-trip and ambiguity detection", ok, detail);
    }

    // -------------------------------------------------------------- 8 and 9
    double selftest_secs = -1.0;
    {
        bool ok = true;
        std::string detail;
        if (cli.empty() || !fs::exists(cli)) {
            ok = false;
            detail = "CLI binary not provided (--cli)";
            gate.report("CLI determinism across runs and worker counts", ok, detail);
            gate.report("selftest runtime bound", false, detail);
        } else {
            fs::path tmp = fs::temp_directory_path() /
                           ("pmgeo_acc_" + std::to_string(uint64_t(::getpid())));
            fs::remove_all(tmp);
            fs::create_directories(tmp);
            auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };

            // scene spec + artifact spec
            SceneSpec spec = boxes_scene();
            write_text_file((tmp / "scene.json").string(), spec.to_json_string());
            write_text_file((tmp / "artifact.json").string(),
                            "{\"kind\": \"boundary_shift\", \"shift_px\": 3}\n");

            // synth twice -> byte-identical bundles
            for (const char* d : {"s1", "s2"})
                if (run_cmd("\"" + cli + "\" synth --spec " + q(tmp / "scene.json") +
                            " --artifact " + q(tmp / "artifact.json") + " --out-dir " +
                            q(tmp / d) + " --prefix a > " + q(tmp / (std::string(d) + ".log"))))
                    ok = false;
            for (const char* f :
                 {"a_depth.pfm", "a_mask.pgm", "a_points.f32", "a_points.json",
                  "a_camera.json", "a_injected_depth.pfm", "a_footprint.pgm"})
                if (!same_bytes(tmp / "s1" / f, tmp / "s2" / f)) {
                    ok = false;
                    detail += std::string("synth differs: ") + f + "; ";
                }

            // align + eval JSON repeatability
            for (const char* run : {"e1.json", "e2.json"})
                if (run_cmd("\"" + cli + "\" eval --suite --pred " +
                            q(tmp / "s1" / "a_points.f32") + " --gt " +
                            q(tmp / "s2" / "a_points.f32") + " --out " + q(tmp / run) +
                            " > /dev/null"))
                    ok = false;
            if (!same_bytes(tmp / "e1.json", tmp / "e2.json")) {
                ok = false;
                detail += "eval differs; ";
            }

            // batch refine: workers 1 vs 4 byte-identical
            fs::create_directories(tmp / "batch_in");
            for (int k = 0; k < 3; ++k) {
                SceneSpec sk = boxes_scene();
                sk.seed = 900 + k;
                sk.background_depth += 0.2 * k;
                RenderResult scene = render(sk);
                ArtifactSpec art;
                art.kind = ArtifactSpec::Kind::boundary_shift;
                art.shift_px = 3;
                InjectResult injected = inject(scene.depth, scene.mask, art);
                PredictorSim sim;
                sim.scale = 2.0;
                sim.log_bias_amplitude = 0.12;
                sim.bias_period_px = 48.0;
                PointMap pred = simulate_prediction(scene.depth, scene.mask, scene.cam, sim);
                std::string name = "b" + std::to_string(k);
                write_depth_pfm((tmp / "batch_in" / (name + "_depth.pfm")).string(),
                                injected.depth, injected.mask);
                write_mask_pgm((tmp / "batch_in" / (name + "_mask.pgm")).string(),
                               injected.mask);
                write_pointmap((tmp / "batch_in" / (name + "_points.f32")).string(), pred,
                               scene.mask);
                write_camera_json((tmp / "batch_in" / (name + "_camera.json")).string(),
                                  scene.cam);
                write_mask_pgm((tmp / "batch_in" / (name + "_footprint.pgm")).string(),
                               injected.footprint);
            }
            for (const char* out : {"batch_w1", "batch_w4"})
                if (run_cmd("\"" + cli + "\" refine --input-dir " + q(tmp / "batch_in") +
                            " --output-dir " + q(tmp / out) + " --workers " +
                            (out[7] == '1' ? "1" : "4") + " > /dev/null 2>&1"))
                    ok = false;
            for (int k = 0; k < 3; ++k) {
                std::string name = "b" + std::to_string(k);
                for (const char* suffix :
                     {"_refined_depth.pfm", "_refined_mask.pgm", "_report.json"})
                    if (!same_bytes(tmp / "batch_w1" / (name + suffix),
                                    tmp / "batch_w4" / (name + suffix))) {
                        ok = false;
                        detail += name + std::string(suffix) + " differs; ";
                    }
            }

            // refine report carries footprint recall >= 0.95 (synthgen oracle)
            {
                std::string report = read_file(tmp / "batch_w1" / "b0_report.json");
                auto pos = report.find("\"footprint_recall\": ");
                double recall = pos == std::string::npos
                                    ? -1.0
                                    : std::atof(report.c_str() + pos + 20);
                if (recall < 0.95) {
                    ok = false;
                    detail += "footprint recall " + fmt(recall) + "; ";
                }
            }

            // selftest byte-identical and timed (criterion 9)
            auto t0 = std::chrono::steady_clock::now();
            int rc1 = run_cmd("\"" + cli + "\" selftest > " + q(tmp / "st1.txt"));
            selftest_secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            int rc2 = run_cmd("\"" + cli + "\" selftest > " + q(tmp / "st2.txt"));
            if (rc1 || rc2) {
                ok = false;
                detail += "selftest exit nonzero; ";
            }
            if (!same_bytes(tmp / "st1.txt", tmp / "st2.txt")) {
                ok = false;
                detail += "selftest output differs; ";
            }

            gate.report("CLI determinism across runs and worker counts", ok, detail);

            bool runtime_ok = selftest_secs >= 0.0 && selftest_secs < 300.0;
            gate.report("selftest runtime bound (< 5 min)", runtime_ok,
                        fmt(selftest_secs) + " s");

            fs::remove_all(tmp);
        }
    }

    double total_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_total).count();
    std::printf("%s: %d/9 criteria passed (%.1f s total)\n",
                gate.failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", 9 - gate.failures,
                total_secs);
    return gate.failures == 0 ? 0 : 1;
}
