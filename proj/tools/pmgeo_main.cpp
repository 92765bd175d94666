#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pmgeo/align.hpp"
#include "pmgeo/camera.hpp"
#include "pmgeo/config.hpp"
#include "pmgeo/io.hpp"
#include "pmgeo/jsonout.hpp"
#include "pmgeo/losses.hpp"
#include "pmgeo/metrics.hpp"
#include "pmgeo/refine.hpp"
#include "pmgeo/selftest.hpp"
#include "pmgeo/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmgeo;

namespace {

json alignment_to_json(const AffineAlignment& a) {
    json j;
    j["scale"] = a.scale;
    json shift = json::array();
    for (int k = 0; k < a.shift_dims; ++k) shift.push_back(a.shift[k]);
    j["shift"] = shift;
    j["objective"] = a.objective;
    j["scale_clamped"] = a.scale_clamped;
    return j;
}

json bundle_to_json(const MetricBundle& b) {
    json j;
    j["protocol"] = protocol_name(b.protocol);
    j["rel"] = b.rel;
    j["delta1"] = b.delta1;
    j["n_valid"] = b.n_valid;
    j["n_excluded"] = b.n_excluded;
    if (b.alignment) j["alignment"] = alignment_to_json(*b.alignment);
    if (b.protocol == Protocol::local_point) j["regions_used"] = b.regions_used;
    return j;
}

ValidMask conjunction(const ValidMask& a, const ValidMask& b) {
    ValidMask out = a;
    for (int i = 0; i < out.size(); ++i) out.set(i, a.at(i) && b.at(i));
    return out;
}

ValidMask load_extra_mask(const std::string& path, const ValidMask& implied) {
    if (path.empty()) return implied;
    ValidMask file_mask = read_mask_pgm(path);
    require_same_shape(file_mask.width(), file_mask.height(), implied.width(), implied.height(),
                       "mask file vs data");
    return conjunction(implied, file_mask);
}

AlignOptions align_options(const RunConfig& cfg) {
    AlignOptions o;
    o.seed = cfg.seed;
    o.pair_samples = cfg.align_pair_samples;
    o.rel_tol = cfg.align_rel_tol;
    return o;
}

void emit(const json& j, const std::string& out_path) {
    std::string text = dump_json(j);
    std::cout << text;
    if (!out_path.empty()) write_text_file(out_path, text);
}

// ---------------------------------------------------------------------------

int run_synth(const std::string& spec_path, const std::string& artifact_path,
              const std::string& out_dir, const std::string& prefix) {
    SceneSpec spec = SceneSpec::from_json_string(read_text_file(spec_path));
    RenderResult r = render(spec);
    fs::create_directories(out_dir);
    auto p = [&](const std::string& suffix) {
        return (fs::path(out_dir) / (prefix + suffix)).string();
    };

    write_depth_pfm(p("_depth.pfm"), r.depth, r.mask);
    write_mask_pgm(p("_mask.pgm"), r.mask);
    write_pointmap(p("_points.f32"), r.points, r.mask);
    write_camera_json(p("_camera.json"), r.cam);

    json summary;
    summary["width"] = r.depth.width;
    summary["height"] = r.depth.height;
    summary["valid_pixels"] = r.mask.count();

    if (!artifact_path.empty()) {
        ArtifactSpec art = ArtifactSpec::from_json_string(read_text_file(artifact_path));
        InjectResult injected = inject(r.depth, r.mask, art);
        write_depth_pfm(p("_injected_depth.pfm"), injected.depth, injected.mask);
        write_mask_pgm(p("_injected_mask.pgm"), injected.mask);
        write_mask_pgm(p("_footprint.pgm"), injected.footprint);
        summary["artifact_footprint_pixels"] = injected.footprint.count();
    }
    emit(summary, "");
    return 0;
}

struct LoadedMap {
    bool is_points = false;
    PointMap points;
    DepthMap depth;
    ValidMask mask;
};

LoadedMap load_map(const std::string& path) {
    LoadedMap m;
    if (fs::path(path).extension() == ".f32") {
        auto [pm, mask] = read_pointmap(path);
        m.is_points = true;
        m.points = std::move(pm);
        m.mask = std::move(mask);
    } else {
        auto [d, mask] = read_depth_pfm(path);
        m.depth = std::move(d);
        m.mask = std::move(mask);
    }
    return m;
}

int run_align(const std::string& variant, const std::string& pred_path,
              const std::string& gt_path, const std::string& mask_path,
              const std::string& weights_path, bool inv_depth_weights, const RunConfig& cfg,
              const std::string& out_path) {
    LoadedMap pred = load_map(pred_path);
    LoadedMap gt = load_map(gt_path);
    if (pred.is_points != gt.is_points)
        throw_data("align: pred and gt must both be point maps or both scalar maps");

    ValidMask mask = conjunction(pred.mask, gt.mask);
    mask = load_extra_mask(mask_path, mask);
    if (mask.count() == 0) throw_data("align: no overlapping valid pixels");

    std::optional<PfmImage> wfile;
    if (!weights_path.empty()) wfile = read_pfm(weights_path);

    std::vector<int> idx;
    for (int i = 0; i < mask.size(); ++i)
        if (mask.at(i)) idx.push_back(i);

    std::vector<double> w;
    for (int i : idx) {
        if (wfile) {
            w.push_back(double(wfile->values[i]));
        } else if (inv_depth_weights) {
            double z = gt.is_points ? gt.points.points[i].z : gt.depth.values[i];
            if (!(z > 0.0)) throw_data("align: nonpositive gt depth under --inv-depth-weights");
            w.push_back(1.0 / z);
        } else {
            w.push_back(1.0);
        }
    }

    AffineAlignment a;
    AlignOptions opts = align_options(cfg);
    if (pred.is_points) {
        std::vector<Vec3> ps, gs;
        for (int i : idx) {
            ps.push_back(pred.points.points[i]);
            gs.push_back(gt.points.points[i]);
        }
        if (variant == "scale")
            a = solve_scale_l1(ps, gs, w);
        else if (variant == "scale_shift")
            a = solve_scale_shift_l1(ps, gs, w, opts);
        else if (variant == "shift")
            a = solve_shift_l1(ps, gs, w);
        else
            throw_usage("align: variant " + variant + " needs scalar inputs");
    } else {
        std::vector<double> ps, gs;
        for (int i : idx) {
            ps.push_back(pred.depth.values[i]);
            gs.push_back(gt.depth.values[i]);
        }
        if (variant == "scale")
            a = solve_depth_scale_l1(ps, gs, w);
        else if (variant == "scale_shift")
            a = solve_depth_scale_shift_l1(ps, gs, w, opts);
        else if (variant == "shift")
            a = solve_depth_shift_l1(ps, gs, w);
        else if (variant == "lsq_affine")
            a = solve_disparity_affine_lsq(ps, gs);
        else
            throw_usage("align: unknown variant " + variant);
    }

    json j = alignment_to_json(a);
    j["variant"] = variant;
    j["n_pixels"] = int(idx.size());
    emit(j, out_path);
    return 0;
}

int run_loss(const std::string& kind, const std::string& pred_path, const std::string& gt_path,
             const std::string& mask_path, double pred_log_scale, const RunConfig& cfg,
             const std::string& out_path) {
    auto [pred, pred_mask] = read_pointmap(pred_path);
    auto [gt, gt_mask] = read_pointmap(gt_path);
    ValidMask mask = conjunction(pred_mask, gt_mask);
    mask = load_extra_mask(mask_path, mask);

    AlignOptions opts = align_options(cfg);
    LossReport report;
    if (kind == "global") {
        report = loss_global(pred, gt, mask, opts);
    } else if (kind == "multiscale") {
        auto seeds = make_loss_region_seeds(gt, mask, cfg);
        auto regions = sample_sphere_regions(gt, mask, seeds);
        report = loss_multiscale(pred, gt, mask, regions, opts);
    } else if (kind == "scale") {
        report = loss_scale(pred_log_scale, pred, gt, mask, opts);
    } else {
        throw_usage("loss: unknown kind " + kind);
    }

    json j;
    j["kind"] = kind;
    j["value"] = report.value;
    j["alignment"] = alignment_to_json(report.alignment);
    j["region_count"] = report.region_count;
    j["skipped_regions"] = report.skipped_regions;
    emit(j, out_path);
    return 0;
}

int run_camera_recover(const std::string& points_path, const std::string& mask_path,
                       const std::string& out_path) {
    auto [pm, implied] = read_pointmap(points_path);
    ValidMask mask = load_extra_mask(mask_path, implied);
    RecoveredCamera rec = recover_focal_shift(pm, mask);

    json j;
    j["fx"] = rec.cam.fx;
    j["fy"] = rec.cam.fy;
    j["cx"] = rec.cam.cx;
    j["cy"] = rec.cam.cy;
    j["z_shift"] = rec.cam.z_shift.value_or(0.0);
    j["rms_residual_px"] = rec.rms_residual_px;
    std::cout << dump_json(j);
    if (!out_path.empty()) write_camera_json(out_path, rec.cam);
    return 0;
}

MetricBundle eval_one(Protocol protocol, const LoadedMap& pred, const LoadedMap& gt,
                      const ValidMask& mask, const RunConfig& cfg) {
    EvalOptions opts;
    opts.z_max = cfg.z_max;
    opts.align = align_options(cfg);

    switch (protocol) {
        case Protocol::scale_inv_point:
        case Protocol::affine_inv_point:
        case Protocol::metric_point:
            if (!pred.is_points || !gt.is_points)
                throw_usage("eval: point protocol requires point-map inputs");
            return evaluate_points(pred.points, gt.points, mask, protocol, opts);
        case Protocol::local_point: {
            if (!pred.is_points || !gt.is_points)
                throw_usage("eval: point protocol requires point-map inputs");
            auto seeds = make_loss_region_seeds(gt.points, mask, cfg);
            auto regions = sample_sphere_regions(gt.points, mask, seeds);
            opts.regions = regions;
            return evaluate_points(pred.points, gt.points, mask, protocol, opts);
        }
        case Protocol::scale_inv_depth:
        case Protocol::affine_inv_depth:
        case Protocol::metric_depth:
        case Protocol::metric_depth_gt_cam: {
            DepthMap pd = pred.is_points ? points_to_depth(pred.points) : pred.depth;
            DepthMap gd = gt.is_points ? points_to_depth(gt.points) : gt.depth;
            return evaluate_depth(pd, gd, mask, protocol, opts);
        }
        case Protocol::affine_inv_disparity: {
            // prediction interpreted in disparity space (1/z of its depth)
            DepthMap pd = pred.is_points ? points_to_depth(pred.points) : pred.depth;
            DepthMap gd = gt.is_points ? points_to_depth(gt.points) : gt.depth;
            DisparityMap disp(pd.width, pd.height);
            for (int i = 0; i < pd.size(); ++i)
                if (mask.at(i)) {
                    if (!(pd.values[i] > 0.0))
                        throw_data("eval: nonpositive predicted depth for disparity protocol");
                    disp.values[i] = 1.0 / pd.values[i];
                }
            return evaluate_disparity(disp, gd, mask, opts);
        }
    }
    throw_usage("eval: unhandled protocol");
}

int run_eval(const std::string& protocol_str, bool suite, const std::string& pred_path,
             const std::string& gt_path, const std::string& mask_path, const RunConfig& cfg,
             const std::string& out_path, const std::string& csv_path) {
    LoadedMap pred = load_map(pred_path);
    LoadedMap gt = load_map(gt_path);
    ValidMask mask = conjunction(pred.mask, gt.mask);
    mask = load_extra_mask(mask_path, mask);
    if (mask.count() == 0) throw_data("eval: no overlapping valid pixels");

    if (suite) {
        std::vector<Protocol> protocols;
        if (pred.is_points && gt.is_points)
            protocols = {Protocol::scale_inv_point, Protocol::affine_inv_point,
                         Protocol::local_point, Protocol::scale_inv_depth,
                         Protocol::affine_inv_depth, Protocol::affine_inv_disparity};
        else
            protocols = {Protocol::scale_inv_depth, Protocol::affine_inv_depth,
                         Protocol::affine_inv_disparity};

        json j;
        std::ostringstream header, row;
        header << "image";
        row << fs::path(pred_path).stem().string();
        char buf[64];
        for (Protocol p : protocols) {
            MetricBundle b = eval_one(p, pred, gt, mask, cfg);
            j[protocol_name(p)] = bundle_to_json(b);
            header << "," << protocol_name(p) << "_rel," << protocol_name(p) << "_delta1";
            std::snprintf(buf, sizeof(buf), "%.17g", b.rel);
            row << "," << buf;
            std::snprintf(buf, sizeof(buf), "%.17g", b.delta1);
            row << "," << buf;
        }
        DepthMap pd = pred.is_points ? points_to_depth(pred.points) : pred.depth;
        DepthMap gd = gt.is_points ? points_to_depth(gt.points) : gt.depth;
        double f1 = boundary_f1(pd, gd, mask, cfg.boundary_f1_thresholds);
        j["boundary_f1"] = f1;
        header << ",boundary_f1";
        std::snprintf(buf, sizeof(buf), "%.17g", f1);
        row << "," << buf;

        emit(j, out_path);
        if (!csv_path.empty())
            write_text_file(csv_path, header.str() + "\n" + row.str() + "\n");
        return 0;
    }

    if (protocol_str == "boundary_f1") {
        DepthMap pd = pred.is_points ? points_to_depth(pred.points) : pred.depth;
        DepthMap gd = gt.is_points ? points_to_depth(gt.points) : gt.depth;
        json j;
        j["protocol"] = "boundary_f1";
        j["f1"] = boundary_f1(pd, gd, mask, cfg.boundary_f1_thresholds);
        emit(j, out_path);
        return 0;
    }

    MetricBundle b = eval_one(protocol_from_name(protocol_str), pred, gt, mask, cfg);
    emit(bundle_to_json(b), out_path);
    return 0;
}

json refine_report_json(const RefineResult& res, const ValidMask& input_mask,
                        const ValidMask* footprint) {
    json j;
    j["outlier_count"] = res.report.outlier_count;
    j["skipped_regions"] = res.report.skipped_regions;
    j["region_count"] = int(res.report.regions.size());
    j["input_valid_pixels"] = input_mask.count();
    j["filtered_valid_pixels"] = res.filtered_mask.count();
    j["output_valid_pixels"] = res.mask.count();
    j["cg_iterations"] = res.completion.cg_iterations;
    j["cg_residual"] = res.completion.cg_residual;
    j["free_components"] = res.completion.free_components;
    j["free_component_pixels"] = res.completion.free_component_pixels;
    if (footprint) {
        int art_total = 0, art_removed = 0, clean_total = 0, clean_removed = 0;
        for (int i = 0; i < input_mask.size(); ++i) {
            if (!input_mask.at(i)) continue;
            bool removed = !res.filtered_mask.at(i);
            if (footprint->at(i)) {
                ++art_total;
                if (removed) ++art_removed;
            } else {
                ++clean_total;
                if (removed) ++clean_removed;
            }
        }
        j["footprint_pixels"] = art_total;
        j["footprint_recall"] = art_total ? double(art_removed) / art_total : 0.0;
        j["clean_false_positive_rate"] =
            clean_total ? double(clean_removed) / clean_total : 0.0;
    }
    return j;
}

void refine_one(const std::string& depth_path, const std::string& mask_path,
                const std::string& points_path, const std::string& pred_depth_path,
                const std::string& camera_path, const std::string& footprint_path,
                const RunConfig& cfg, const std::string& out_depth,
                const std::string& out_mask, const std::string& out_report, bool quiet) {
    auto [real_depth, implied] = read_depth_pfm(depth_path);
    ValidMask mask = load_extra_mask(mask_path, implied);
    CameraModel cam = read_camera_json(camera_path);

    PointMap pred;
    if (!points_path.empty()) {
        auto [pm, pm_mask] = read_pointmap(points_path);
        require_same_shape(pm.width, pm.height, real_depth.width, real_depth.height,
                           "pred points vs real depth");
        pred = std::move(pm);
    } else if (!pred_depth_path.empty()) {
        auto [pd, pd_mask] = read_depth_pfm(pred_depth_path);
        pred = depth_to_points(pd, pd_mask, cam);
    } else {
        throw_usage("refine: provide --pred-points or --pred-depth");
    }

    RefineResult res = refine_pipeline(real_depth, mask, pred, cam, cfg);

    write_depth_pfm(out_depth, res.depth, res.mask);
    write_mask_pgm(out_mask, res.mask);

    std::optional<ValidMask> footprint;
    if (!footprint_path.empty()) footprint = read_mask_pgm(footprint_path);
    json report = refine_report_json(res, mask, footprint ? &*footprint : nullptr);
    std::string text = dump_json(report);
    write_text_file(out_report, text);
    if (!quiet) std::cout << text;
}

int run_refine_batch(const std::string& input_dir, const std::string& output_dir, int workers,
                     const RunConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(input_dir)) {
        std::string fn = entry.path().filename().string();
        const std::string suffix = "_depth.pfm";
        if (fn.size() > suffix.size() && fn.ends_with(suffix))
            names.push_back(fn.substr(0, fn.size() - suffix.size()));
    }
    std::sort(names.begin(), names.end());
    fs::create_directories(output_dir);

    std::atomic<size_t> next{0};
    std::atomic<int> done{0}, skipped{0}, failed{0};
    auto worker = [&]() {
        for (;;) {
            size_t k = next.fetch_add(1);
            if (k >= names.size()) return;
            const std::string& name = names[k];
            auto in = [&](const std::string& s) {
                return (fs::path(input_dir) / (name + s)).string();
            };
            auto out = [&](const std::string& s) {
                return (fs::path(output_dir) / (name + s)).string();
            };
            std::string out_depth = out("_refined_depth.pfm");
            std::string out_mask = out("_refined_mask.pgm");
            std::string out_report = out("_report.json");
            if (fs::exists(out_depth) && fs::exists(out_mask) && fs::exists(out_report)) {
                ++skipped;
                continue;
            }
            try {
                std::string mask_path = fs::exists(in("_mask.pgm")) ? in("_mask.pgm") : "";
                std::string footprint =
                    fs::exists(in("_footprint.pgm")) ? in("_footprint.pgm") : "";
                refine_one(in("_depth.pfm"), mask_path, in("_points.f32"), "",
                           in("_camera.json"), footprint, cfg, out_depth, out_mask, out_report,
                           /*quiet=*/true);
                ++done;
            } catch (const std::exception& e) {
                ++failed;
                std::cerr << "{\"error\": {\"file\": " << json(name).dump()
                          << ", \"message\": " << json(e.what()).dump() << "}}\n";
            }
        }
    };

    int n = std::max(1, workers);
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    json j;
    j["processed"] = int(done);
    j["skipped_existing"] = int(skipped);
    j["failed"] = int(failed);
    j["total"] = int(names.size());
    emit(j, "");
    return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"point-map alignment, refinement, and evaluation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "RunConfig JSON file")->expected(1);

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "render a synthetic scene bundle");
    std::string spec_path, artifact_path, out_dir, prefix = "scene";
    synth_cmd->add_option("--spec", spec_path, "scene spec JSON")->required();
    synth_cmd->add_option("--artifact", artifact_path, "artifact spec JSON");
    synth_cmd->add_option("--out-dir", out_dir, "output directory")->required();
    synth_cmd->add_option("--prefix", prefix, "output file prefix");

    // align
    auto* align_cmd = app.add_subcommand("align", "solve an alignment between two maps");
    std::string variant = "scale_shift", pred_path, gt_path, mask_path, weights_path, out_path;
    bool inv_depth_weights = false;
    align_cmd->add_option("--variant", variant, "scale|scale_shift|shift|lsq_affine");
    align_cmd->add_option("--pred", pred_path, "prediction (.pfm or .f32)")->required();
    align_cmd->add_option("--gt", gt_path, "ground truth (.pfm or .f32)")->required();
    align_cmd->add_option("--mask", mask_path, "extra validity mask (PGM)");
    align_cmd->add_option("--weights", weights_path, "per-pixel weights (PFM)");
    align_cmd->add_flag("--inv-depth-weights", inv_depth_weights, "weight by 1/gt depth");
    align_cmd->add_option("--out", out_path, "also write the JSON result here");

    // loss
    auto* loss_cmd = app.add_subcommand("loss", "evaluate a training objective");
    std::string loss_kind = "global";
    double pred_log_scale = 0.0;
    loss_cmd->add_option("--kind", loss_kind, "global|multiscale|scale");
    loss_cmd->add_option("--pred", pred_path, "predicted point map (.f32)")->required();
    loss_cmd->add_option("--gt", gt_path, "ground-truth point map (.f32)")->required();
    loss_cmd->add_option("--mask", mask_path, "extra validity mask (PGM)");
    loss_cmd->add_option("--pred-log-scale", pred_log_scale, "predicted log scale");
    loss_cmd->add_option("--out", out_path, "also write the JSON result here");

    // camera
    auto* camera_cmd = app.add_subcommand("camera", "camera operations");
    camera_cmd->require_subcommand(1);
    auto* recover_cmd = camera_cmd->add_subcommand("recover", "recover focal and z-shift");
    std::string points_path, camera_out;
    recover_cmd->add_option("--points", points_path, "affine point map (.f32)")->required();
    recover_cmd->add_option("--mask", mask_path, "extra validity mask (PGM)");
    recover_cmd->add_option("--out", camera_out, "camera JSON output path");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluation metrics");
    std::string protocol = "affine_inv_point", csv_path;
    bool suite = false;
    eval_cmd->add_option("--protocol", protocol,
                         "protocol name or boundary_f1 (ignored with --suite)");
    eval_cmd->add_flag("--suite", suite, "run every applicable protocol");
    eval_cmd->add_option("--pred", pred_path, "prediction (.pfm or .f32)")->required();
    eval_cmd->add_option("--gt", gt_path, "ground truth (.pfm or .f32)")->required();
    eval_cmd->add_option("--mask", mask_path, "extra validity mask (PGM)");
    eval_cmd->add_option("--csv", csv_path, "suite CSV output path");
    eval_cmd->add_option("--out", out_path, "also write the JSON result here");
    double z_max_flag = 0.0;
    eval_cmd->add_option("--z-max", z_max_flag, "disparity truncation depth");

    // refine
    auto* refine_cmd = app.add_subcommand("refine", "filter and complete a captured depth map");
    std::string real_depth_path, pred_points_path, pred_depth_path, camera_path, footprint_path;
    std::string out_depth, out_mask, out_report, input_dir, output_dir;
    int workers = 1;
    refine_cmd->add_option("--real-depth", real_depth_path, "captured depth (PFM)");
    refine_cmd->add_option("--mask", mask_path, "captured validity mask (PGM)");
    refine_cmd->add_option("--pred-points", pred_points_path, "predicted point map (.f32)");
    refine_cmd->add_option("--pred-depth", pred_depth_path, "predicted depth (PFM)");
    refine_cmd->add_option("--camera", camera_path, "camera JSON");
    refine_cmd->add_option("--footprint", footprint_path,
                           "known artifact footprint (PGM) for report scoring");
    refine_cmd->add_option("--out-depth", out_depth, "refined depth output (PFM)");
    refine_cmd->add_option("--out-mask", out_mask, "refined mask output (PGM)");
    refine_cmd->add_option("--out-report", out_report, "report JSON output");
    refine_cmd->add_option("--input-dir", input_dir, "batch input directory");
    refine_cmd->add_option("--output-dir", output_dir, "batch output directory");
    refine_cmd->add_option("--workers", workers, "batch worker threads");

    // selftest
    auto* selftest_cmd = app.add_subcommand("selftest", "run the built-in invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        if (code != 0) {
            json err;
            err["error"] = {{"kind", "usage"}, {"message", e.what()}};
            std::cerr << dump_json(err);
            return 1;
        }
        return 0;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::load(config_path);
        if (eval_cmd->parsed() && z_max_flag > 0.0) cfg.z_max = z_max_flag;

        if (synth_cmd->parsed())
            return run_synth(spec_path, artifact_path, out_dir, prefix);
        if (align_cmd->parsed())
            return run_align(variant, pred_path, gt_path, mask_path, weights_path,
                             inv_depth_weights, cfg, out_path);
        if (loss_cmd->parsed())
            return run_loss(loss_kind, pred_path, gt_path, mask_path, pred_log_scale, cfg,
                            out_path);
        if (camera_cmd->parsed() && recover_cmd->parsed())
            return run_camera_recover(points_path, mask_path, camera_out);
        if (eval_cmd->parsed())
            return run_eval(protocol, suite, pred_path, gt_path, mask_path, cfg, out_path,
                            csv_path);
        if (refine_cmd->parsed()) {
            if (!input_dir.empty() || !output_dir.empty()) {
                if (input_dir.empty() || output_dir.empty())
                    throw_usage("refine: batch mode needs both --input-dir and --output-dir");
                return run_refine_batch(input_dir, output_dir, workers, cfg);
            }
            if (real_depth_path.empty() || camera_path.empty() || out_depth.empty() ||
                out_mask.empty() || out_report.empty())
                throw_usage(
                    "refine: need --real-depth, --camera, --out-depth, --out-mask, --out-report");
            refine_one(real_depth_path, mask_path, pred_points_path, pred_depth_path,
                       camera_path, footprint_path, cfg, out_depth, out_mask, out_report,
                       false);
            return 0;
        }
        if (selftest_cmd->parsed()) {
            SelftestResult result = run_selftest(cfg, std::cout);
            std::cout << (result.ok() ? "OK" : "FAILED") << " " << result.passed << " passed, "
                      << result.failed << " failed\n";
            return result.ok() ? 0 : 3;
        }
        throw_usage("no subcommand");
    } catch (const Error& e) {
        json err;
        err["error"] = {{"kind", e.kind_name()}, {"message", e.what()}};
        std::cerr << dump_json(err);
        switch (e.kind()) {
            case ErrorKind::usage: return 1;
            case ErrorKind::data: return 2;
            case ErrorKind::solver: return 3;
        }
        return 2;
    } catch (const std::exception& e) {
        json err;
        err["error"] = {{"kind", "data"}, {"message", e.what()}};
        std::cerr << dump_json(err);
        return 2;
    }
}
