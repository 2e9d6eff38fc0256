#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "planemvs/raster.hpp"

namespace planemvs {

/// Calibrated pinhole camera. The pose maps world points into the camera
/// frame: X_cam = rotation * X_world + translation. Pixel (x, y) denotes the
/// centre of column x, row y.
struct CameraModel {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();
    int width = 0;
    int height = 0;

    Eigen::Matrix3d intrinsics() const;
    Eigen::Matrix3d intrinsics_inverse() const;
    Eigen::Vector3d center() const { return -rotation.transpose() * translation; }

    /// Throws Error(InvalidArgument) when an invariant is broken.
    void validate() const;
};

struct DepthRange {
    double min = 0.1;
    double max = 100.0;
};

struct View {
    std::string name;
    CameraModel camera;
    GrayImage image;
    ColorImage color;
};

struct Scene {
    std::vector<View> views;
    DepthRange depth_range;
};

namespace io {

/// Reads `cameras.txt`, `images.txt` (PINHOLE only), `images/`, and the
/// optional `range.txt` ("d_min d_max").
Scene load_scene(const std::filesystem::path& scene_dir);

/// Writes the same layout load_scene() reads. Images are stored as 16-bit
/// grayscale PNG.
void write_scene(const Scene& scene, const std::filesystem::path& scene_dir);

/// Downsamples every view whose larger side exceeds max_dim (area averaging)
/// and scales intrinsics by the same factor. max_dim must be >= 64.
Scene rescale_to_max_dim(const Scene& scene, int max_dim);

/// Intrinsics-only counterpart of rescale_to_max_dim().
CameraModel rescale_camera(const CameraModel& camera, int max_dim);

/// Luminance 0.299 R + 0.587 G + 0.114 B of an 8-bit colour image, in [0, 1].
GrayImage luminance(const ColorImage& color);

// --- .dmap rasters ---------------------------------------------------------
//
// Layout: "DMAP", u32 width, u32 height, u32 channels, then
// width * height * channels float32 values, row-major, channel-interleaved.
// All integers and floats little-endian.

struct RasterFile {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 1;
    std::vector<float> values;

    bool operator==(const RasterFile&) const = default;
};

void write_raster(const std::filesystem::path& path, const RasterFile& raster);
RasterFile read_raster(const std::filesystem::path& path);

void write_depth(const std::filesystem::path& path, const DepthMap& depth);
DepthMap read_depth(const std::filesystem::path& path);

void write_normals(const std::filesystem::path& path, const Raster<Eigen::Vector3d>& normals);
Raster<Eigen::Vector3d> read_normals(const std::filesystem::path& path);

void write_scalar(const std::filesystem::path& path, const Raster<double>& values);
Raster<double> read_scalar(const std::filesystem::path& path);

} // namespace io
} // namespace planemvs
