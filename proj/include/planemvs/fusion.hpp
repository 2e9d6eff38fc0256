#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planemvs/raster.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

struct FusedPoint {
    Eigen::Vector3d position; // world frame
    Eigen::Vector3d normal;   // world frame, unit
    Rgb8 color{};
    int support = 0; // reference view plus consistent views
};

struct FusionThresholds {
    double max_reprojection_px = 2.0;
    double max_relative_depth = 0.01;
    double max_normal_angle_deg = 30.0;
    int min_support = 2;
};

struct PixelRef {
    int view = 0;
    int x = 0;
    int y = 0;

    bool operator==(const PixelRef&) const = default;
};

/// Fused points plus, for point k, the pixels it was built from:
/// contributors[offsets[k] .. offsets[k + 1]), reference pixel first.
struct FusionResult {
    std::vector<FusedPoint> points;
    std::vector<std::size_t> offsets{0};
    std::vector<PixelRef> contributors;

    std::span<const PixelRef> contributors_of(std::size_t k) const
    {
        return std::span<const PixelRef>(contributors).subspan(offsets[k], offsets[k + 1] - offsets[k]);
    }
};

namespace fusion {

/// Greedy consumption fusion. Views are visited in `order` (all views in index
/// order when empty), pixels in raster order. Normals are in each view's camera
/// frame, as estimated.
FusionResult fuse(const Scene& scene, std::span<const DepthMap> depths,
                  std::span<const Raster<Eigen::Vector3d>> normals, const FusionThresholds& thresholds = {},
                  std::span<const int> order = {});

/// Binary little-endian PLY: float x y z nx ny nz, uchar red green blue.
void write_ply(const std::filesystem::path& path, std::span<const FusedPoint> points);

} // namespace fusion
} // namespace planemvs
