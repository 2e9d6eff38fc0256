#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "planemvs/raster.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

enum class TextureKind { Noise, Checker, Flat };

/// Texture evaluated in plane-local (u, v) coordinates, values in [0, 1].
struct TextureSpec {
    TextureKind kind = TextureKind::Noise;
    double cell = 0.05;       // noise lattice spacing, world units
    int octaves = 3;          // noise octaves, each at half the spacing and half the amplitude
    std::uint64_t seed = 1;   // noise lattice seed
    double period = 0.1;      // checker period (two squares), world units
    double intensity = 0.5;   // flat value
    double low = 0.1;         // noise and checker output range
    double high = 0.9;
};

/// Axis-aligned rectangle in plane-local coordinates with its own texture.
struct TexturePatch {
    double u_min = 0.0;
    double u_max = 0.0;
    double v_min = 0.0;
    double v_max = 0.0;
    TextureSpec texture;
};

/// Infinite plane through `point`. Local axes are u = u_axis (made
/// orthogonal to the normal) and v = normal x u.
struct SyntheticPlane {
    Eigen::Vector3d point = Eigen::Vector3d(0.0, 0.0, 5.0);
    Eigen::Vector3d normal = Eigen::Vector3d(0.0, 0.0, -1.0);
    Eigen::Vector3d u_axis = Eigen::Vector3d::UnitX();
    TextureSpec texture;
    std::vector<TexturePatch> patches; // the first patch containing (u, v) wins
};

struct SyntheticScene {
    int width = 320;
    int height = 240;
    std::vector<SyntheticPlane> planes;
    std::vector<CameraModel> cameras; // width/height are overwritten by the scene size
    DepthRange depth_range{2.0, 10.0};
};

/// Ground truth for one view. Normals are in the camera frame and face it.
struct RenderedView {
    DepthMap depth;
    Raster<Eigen::Vector3d> normals;
    Raster<int> plane_id; // -1 where no plane is hit
    Raster<int> patch_id; // -1 for the plane's base texture
};

struct RenderedScene {
    Scene scene;
    std::vector<RenderedView> truth;
};

namespace synth {

/// Texture value at plane-local (u, v); `salt` perturbs the noise lattice.
double sample_texture(const TextureSpec& texture, double u, double v, std::uint64_t salt = 0);

/// Ray casts every view. Throws Degenerate when a camera sees no plane.
RenderedScene render(const SyntheticScene& scene, std::uint64_t seed);

/// Camera at `center` looking at `target`; `up` fixes the roll (image y points
/// against it).
CameraModel look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                    double focal, int width, int height);

SyntheticScene parse_scene_spec(const std::string& json_text);
SyntheticScene load_scene_spec(const std::filesystem::path& path);

/// Noise-textured plane at depth ~5, slightly tilted, seen by 3 cameras with
/// a +-0.5 baseline, 320 x 240, f = 300.
SyntheticScene textured_plane_scene();

/// Fronto-parallel noise plane at depth 5 whose centre carries a flat patch
/// covering 80 x 80 px of the reference view, 3 views.
SyntheticScene untextured_center_scene();

/// Two-view variant of textured_plane_scene().
SyntheticScene two_view_plane_scene();

/// Scene directory layout plus gt/<stem>.depth.dmap, .normal.dmap and
/// .region.dmap (patch id, -1 for base texture, NaN where nothing was hit).
void write_rendered(const RenderedScene& rendered, const std::filesystem::path& dir);

struct DepthErrorReport {
    double median_rel_err = 0.0;  // over mask pixels with a valid estimate
    double bad_fraction = 0.0;    // invalid or rel err > threshold, over the mask
    double coverage = 0.0;        // valid estimates / mask pixels
    std::size_t mask_pixels = 0;
};

/// Mask pixels also need a valid ground truth; empty masks throw.
DepthErrorReport depth_error_report(const DepthMap& estimate, const DepthMap& gt, const Raster<std::uint8_t>& mask,
                                    double bad_threshold = 0.02);

} // namespace synth
} // namespace planemvs
