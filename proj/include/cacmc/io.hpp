#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "cacmc/grid.hpp"

namespace cacmc::io {

/// Sidecar metadata written next to each raw payload.
struct VolumeMeta {
    Eigen::Vector3i dims{0, 0, 0};
    Eigen::Vector3d spacing_mm{1.0, 1.0, 1.0};
    std::string order = "xyz-row-major";
    std::string unit = "HU"; // "HU" | "normalized" | "mask" | "line-integral"
};

/// `path` names the raw payload; the sidecar lives at path with a ".json"
/// extension. Volumes are little-endian float32, masks 8-bit 0/1.
void write_volume(const std::filesystem::path& path, const VoxelGrid& v,
                  const std::string& unit = "HU");
VoxelGrid read_volume(const std::filesystem::path& path, VolumeMeta* meta = nullptr);

void write_mask(const std::filesystem::path& path, const BinaryMask& m);
BinaryMask read_mask(const std::filesystem::path& path);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

/// 8-bit grayscale PNG of a matrix, mapping [lo, hi] to [0, 255].
void write_png_gray(const std::filesystem::path& path, const Eigen::MatrixXd& img,
                    double lo, double hi);

/// RGB PNG from three channel matrices in [0,1].
void write_png_rgb(const std::filesystem::path& path, const Eigen::MatrixXd& r,
                   const Eigen::MatrixXd& g, const Eigen::MatrixXd& b);

/// FNV-1a of a file's bytes; used by determinism checks.
std::uint64_t file_hash(const std::filesystem::path& path);

} // namespace cacmc::io
