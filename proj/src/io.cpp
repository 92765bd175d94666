#include "pmgeo/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pmgeo/jsonout.hpp"

namespace pmgeo {

namespace {

using nlohmann::json;

void require_little_endian() {
    static_assert(std::endian::native == std::endian::little,
                  "file formats assume a little-endian host");
}

std::string tmp_path_for(const std::string& path) { return path + ".tmp"; }

void commit(const std::string& tmp, const std::string& path) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw_data("rename failed for " + path + ": " + ec.message());
}

}  // namespace

PfmImage read_pfm(const std::string& path) {
    require_little_endian();
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data("cannot open PFM file: " + path);

    std::string magic;
    f >> magic;
    if (magic != "Pf") throw_data("not a grayscale PFM file (expected 'Pf'): " + path);
    int w = 0, h = 0;
    double scale = 0.0;
    f >> w >> h >> scale;
    if (!f || w <= 0 || h <= 0) throw_data("bad PFM header: " + path);
    if (scale >= 0.0) throw_data("big-endian PFM not supported: " + path);
    f.get();  // single whitespace after the scale

    PfmImage img;
    img.width = w;
    img.height = h;
    img.values.resize(size_t(w) * h);
    // PFM rows are bottom-up; flip to top-left layout.
    for (int row = h - 1; row >= 0; --row) {
        f.read(reinterpret_cast<char*>(&img.values[size_t(row) * w]),
               std::streamsize(sizeof(float)) * w);
        if (!f) throw_data("truncated PFM data: " + path);
    }
    return img;
}

void write_pfm(const std::string& path, int width, int height, const float* values) {
    require_little_endian();
    std::string tmp = tmp_path_for(path);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw_data("cannot write PFM file: " + path);
        f << "Pf\n" << width << " " << height << "\n-1.0\n";
        for (int row = height - 1; row >= 0; --row)
            f.write(reinterpret_cast<const char*>(values + size_t(row) * width),
                    std::streamsize(sizeof(float)) * width);
        if (!f) throw_data("write failed: " + path);
    }
    commit(tmp, path);
}

void write_depth_pfm(const std::string& path, const DepthMap& d, const ValidMask& mask) {
    std::vector<float> buf(size_t(d.width) * d.height);
    for (int i = 0; i < d.size(); ++i)
        buf[i] = mask.at(i) ? static_cast<float>(d.values[i])
                            : std::numeric_limits<float>::quiet_NaN();
    write_pfm(path, d.width, d.height, buf.data());
}

std::pair<DepthMap, ValidMask> read_depth_pfm(const std::string& path) {
    PfmImage img = read_pfm(path);
    DepthMap d(img.width, img.height);
    ValidMask mask(img.width, img.height, false);
    for (int i = 0; i < d.size(); ++i) {
        float v = img.values[i];
        if (std::isfinite(v) && v > 0.0f) {
            d.values[i] = v;
            mask.set(i, true);
        }
    }
    return {std::move(d), std::move(mask)};
}

void write_mask_pgm(const std::string& path, const ValidMask& mask) {
    std::string tmp = tmp_path_for(path);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw_data("cannot write PGM file: " + path);
        f << "P5\n" << mask.width() << " " << mask.height() << "\n255\n";
        for (int i = 0; i < mask.size(); ++i)
            f.put(mask.at(i) ? char(255) : char(0));
        if (!f) throw_data("write failed: " + path);
    }
    commit(tmp, path);
}

ValidMask read_mask_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data("cannot open PGM file: " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw_data("bad PGM header: " + path);
    f.get();
    ValidMask mask(w, h, false);
    for (int i = 0; i < w * h; ++i) {
        int c = f.get();
        if (c == EOF) throw_data("truncated PGM data: " + path);
        mask.set(i, c != 0);
    }
    return mask;
}

std::string json_sidecar_path(const std::string& raw_path) {
    std::filesystem::path p(raw_path);
    p.replace_extension(".json");
    return p.string();
}

void write_pointmap(const std::string& raw_path, const PointMap& pm, const ValidMask& mask) {
    require_little_endian();
    std::string tmp = tmp_path_for(raw_path);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw_data("cannot write point map: " + raw_path);
        std::vector<float> row(size_t(pm.width) * 3);
        for (int v = 0; v < pm.height; ++v) {
            for (int u = 0; u < pm.width; ++u) {
                int i = v * pm.width + u;
                float nan = std::numeric_limits<float>::quiet_NaN();
                row[u * 3 + 0] = mask.at(i) ? float(pm.points[i].x) : nan;
                row[u * 3 + 1] = mask.at(i) ? float(pm.points[i].y) : nan;
                row[u * 3 + 2] = mask.at(i) ? float(pm.points[i].z) : nan;
            }
            f.write(reinterpret_cast<const char*>(row.data()),
                    std::streamsize(sizeof(float)) * row.size());
        }
        if (!f) throw_data("write failed: " + raw_path);
    }
    commit(tmp, raw_path);

    json j;
    j["width"] = pm.width;
    j["height"] = pm.height;
    j["channels"] = 3;
    j["dtype"] = "float32";
    j["order"] = "row-major";
    j["frame"] = pm.frame == Frame::metric ? "metric" : "affine";
    write_text_file(json_sidecar_path(raw_path), dump_json(j));
}

std::pair<PointMap, ValidMask> read_pointmap(const std::string& raw_path) {
    require_little_endian();
    json j;
    try {
        j = json::parse(read_text_file(json_sidecar_path(raw_path)));
    } catch (const json::exception& e) {
        throw_data("point map sidecar: invalid JSON: " + std::string(e.what()));
    }
    int w = j.value("width", 0);
    int h = j.value("height", 0);
    int ch = j.value("channels", 3);
    std::string frame = j.value("frame", "affine");
    if (w <= 0 || h <= 0 || ch != 3) throw_data("bad point map sidecar: " + raw_path);

    std::ifstream f(raw_path, std::ios::binary);
    if (!f) throw_data("cannot open point map: " + raw_path);
    std::vector<float> buf(size_t(w) * h * 3);
    f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(sizeof(float)) * buf.size());
    if (!f) throw_data("truncated point map: " + raw_path);

    PointMap pm(w, h, frame == "metric" ? Frame::metric : Frame::affine);
    ValidMask mask(w, h, false);
    for (int i = 0; i < w * h; ++i) {
        float x = buf[i * 3], y = buf[i * 3 + 1], z = buf[i * 3 + 2];
        if (std::isfinite(x) && std::isfinite(y) && std::isfinite(z)) {
            pm.points[i] = Vec3{x, y, z};
            mask.set(i, true);
        }
    }
    return {std::move(pm), std::move(mask)};
}

void write_camera_json(const std::string& path, const CameraModel& cam) {
    json j;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    if (cam.z_shift) j["z_shift"] = *cam.z_shift;
    write_text_file(path, dump_json(j));
}

CameraModel read_camera_json(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw_data("camera JSON: " + std::string(e.what()));
    }
    CameraModel cam;
    if (!j.contains("fx") || !j.contains("fy") || !j.contains("cx") || !j.contains("cy"))
        throw_data("camera JSON missing fx/fy/cx/cy: " + path);
    cam.fx = j["fx"].get<double>();
    cam.fy = j["fy"].get<double>();
    cam.cx = j["cx"].get<double>();
    cam.cy = j["cy"].get<double>();
    if (j.contains("z_shift") && !j["z_shift"].is_null())
        cam.z_shift = j["z_shift"].get<double>();
    cam.validate();
    return cam;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw_data("cannot open file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::string tmp = tmp_path_for(path);
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw_data("cannot write file: " + path);
        f.write(content.data(), std::streamsize(content.size()));
        if (!f) throw_data("write failed: " + path);
    }
    commit(tmp, path);
}

}  // namespace pmgeo
