#pragma once

#include <string>

#include "pmgeo/geometry.hpp"

namespace pmgeo {

// PFM scalar maps (grayscale "Pf", little-endian, bottom-up rows on disk,
// top-left layout in memory). NaN and non-finite samples map to invalid.
struct PfmImage {
    int width = 0, height = 0;
    std::vector<float> values;  // top-left row-major after the flip
};

PfmImage read_pfm(const std::string& path);
void write_pfm(const std::string& path, int width, int height, const float* values);

// DepthMap/DisparityMap round trip. Reading derives the implied validity
// mask (finite and > 0); invalid pixels are written as NaN.
void write_depth_pfm(const std::string& path, const DepthMap& d, const ValidMask& mask);
std::pair<DepthMap, ValidMask> read_depth_pfm(const std::string& path);

// Binary PGM masks, 255 = valid.
void write_mask_pgm(const std::string& path, const ValidMask& mask);
ValidMask read_mask_pgm(const std::string& path);

// Point maps: raw little-endian float32 (x, y, z) per pixel, row-major
// top-left, plus a JSON sidecar {width, height, channels, frame, dtype}.
// The sidecar path is derived by replacing the extension with ".json".
void write_pointmap(const std::string& raw_path, const PointMap& pm, const ValidMask& mask);
std::pair<PointMap, ValidMask> read_pointmap(const std::string& raw_path);

void write_camera_json(const std::string& path, const CameraModel& cam);
CameraModel read_camera_json(const std::string& path);

std::string read_text_file(const std::string& path);
// Atomic write: temp file in the same directory, then rename.
void write_text_file(const std::string& path, const std::string& content);

// Deterministic JSON printing: sorted keys (nlohmann objects are ordered)
// and every floating-point number at 17 significant digits so output is
// byte-identical across runs and round-trips exactly.
std::string json_sidecar_path(const std::string& raw_path);

}  // namespace pmgeo
