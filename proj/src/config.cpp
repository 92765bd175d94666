#include "pmgeo/config.hpp"

#include "pmgeo/error.hpp"
#include "pmgeo/io.hpp"
#include "pmgeo/jsonout.hpp"

namespace pmgeo {

using nlohmann::json;

std::string RunConfig::to_json_string() const {
    json j;
    j["seed"] = seed;
    j["loss_region_centers"] = loss_region_centers;
    j["loss_radius_fractions"] = loss_radius_fractions;
    j["refine_centers_per_radius"] = refine_centers_per_radius;
    j["refine_radius_fractions"] = refine_radius_fractions;
    j["refine_inverse_depth_weights"] = refine_inverse_depth_weights;
    j["align_pair_samples"] = align_pair_samples;
    j["align_rel_tol"] = align_rel_tol;
    j["cg_tol"] = cg_tol;
    j["cg_max_iter_factor"] = cg_max_iter_factor;
    j["z_max"] = z_max;
    j["boundary_f1_thresholds"] = boundary_f1_thresholds;
    j["aggregation"] = aggregation;
    return dump_json(j);
}

RunConfig RunConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw_data(std::string("config: invalid JSON: ") + e.what());
    }
    RunConfig c;
    c.seed = j.value("seed", c.seed);
    c.loss_region_centers = j.value("loss_region_centers", c.loss_region_centers);
    if (j.contains("loss_radius_fractions"))
        c.loss_radius_fractions = j["loss_radius_fractions"].get<std::vector<double>>();
    c.refine_centers_per_radius = j.value("refine_centers_per_radius", c.refine_centers_per_radius);
    if (j.contains("refine_radius_fractions"))
        c.refine_radius_fractions = j["refine_radius_fractions"].get<std::vector<double>>();
    c.refine_inverse_depth_weights =
        j.value("refine_inverse_depth_weights", c.refine_inverse_depth_weights);
    c.align_pair_samples = j.value("align_pair_samples", c.align_pair_samples);
    c.align_rel_tol = j.value("align_rel_tol", c.align_rel_tol);
    c.cg_tol = j.value("cg_tol", c.cg_tol);
    c.cg_max_iter_factor = j.value("cg_max_iter_factor", c.cg_max_iter_factor);
    c.z_max = j.value("z_max", c.z_max);
    if (j.contains("boundary_f1_thresholds"))
        c.boundary_f1_thresholds = j["boundary_f1_thresholds"].get<std::vector<double>>();
    c.aggregation = j.value("aggregation", c.aggregation);
    if (c.aggregation != "image" && c.aggregation != "pixel")
        throw_data("config: aggregation must be 'image' or 'pixel'");
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    return from_json_string(read_text_file(path));
}

}  // namespace pmgeo
