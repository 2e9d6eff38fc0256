#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "planemvs/patchmatch.hpp"
#include "planemvs/synthetic.hpp"

namespace fixtures {

using Eigen::Vector2d;
using Eigen::Vector3d;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("planemvs_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline planemvs::CameraModel camera(double f, double cx, double cy, int w, int h)
{
    planemvs::CameraModel cam;
    cam.fx = cam.fy = f;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = w;
    cam.height = h;
    return cam;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vector3d axis = Vector3d(u(rng), u(rng), u(rng)).normalized();
    return Eigen::AngleAxisd(max_angle * u(rng), axis).toRotationMatrix();
}

/// Random camera pair and a plane hypothesis that faces the reference.
struct RandomConfig {
    planemvs::CameraModel ref;
    planemvs::CameraModel src;
    Vector2d p;
    planemvs::PlaneHypothesis plane;
};

inline RandomConfig random_config(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomConfig c;
    c.ref = camera(200 + 400 * u(rng), 150 + 20 * u(rng), 110 + 20 * u(rng), 320, 240);
    c.ref.fy = c.ref.fx * (0.9 + 0.2 * u(rng));
    c.ref.rotation = random_rotation(rng, 0.5);
    c.ref.translation = Vector3d(u(rng), u(rng), u(rng)) - Vector3d::Constant(0.5);
    c.src = camera(200 + 400 * u(rng), 150 + 20 * u(rng), 110 + 20 * u(rng), 320, 240);
    c.src.rotation = random_rotation(rng, 0.2) * c.ref.rotation;
    c.src.translation = c.ref.translation + Vector3d(u(rng) - 0.5, u(rng) - 0.5, 0.2 * (u(rng) - 0.5));
    c.p = Vector2d(40 + 240 * u(rng), 40 + 160 * u(rng));
    const Vector3d ray = planemvs::geometry::pixel_ray(c.ref, c.p);
    Vector3d n = (-ray.normalized() + 0.6 * (Vector3d(u(rng), u(rng), u(rng)) - Vector3d::Constant(0.5))).normalized();
    if (n.dot(ray) >= 0.0) {
        n = -n;
    }
    c.plane = {n, 2.0 + 6.0 * u(rng)};
    return c;
}

/// Same rig and planes at a smaller image size and focal length, for tests
/// that need several full optimisation runs.
inline planemvs::SyntheticScene shrink(planemvs::SyntheticScene scene, int width, int height, double focal)
{
    scene.width = width;
    scene.height = height;
    for (auto& cam : scene.cameras) {
        cam.fx = cam.fy = focal;
        cam.cx = (width - 1) / 2.0;
        cam.cy = (height - 1) / 2.0;
        cam.width = width;
        cam.height = height;
    }
    return scene;
}

/// Hypothesis map holding the ground-truth plane at every pixel (costs are
/// left at their defaults; rescore before use).
inline planemvs::HypothesisMap truth_map(const planemvs::RenderedView& truth, int source_count)
{
    planemvs::HypothesisMap map(truth.depth.width(), truth.depth.height(), source_count);
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            map.planes(x, y) = {truth.normals(x, y), truth.depth.raw(x, y)};
        }
    }
    return map;
}

/// Count of pixels whose relative depth error exceeds `threshold`, restricted
/// to pixels where `in_mask(x, y)` holds.
template <typename Mask>
std::size_t count_bad(const planemvs::HypothesisMap& map, const planemvs::DepthMap& gt, double threshold,
                      Mask&& in_mask)
{
    std::size_t bad = 0;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            if (!in_mask(x, y) || !gt.is_valid(x, y)) {
                continue;
            }
            const double d = gt.raw(x, y);
            if (std::abs(map.planes(x, y).depth - d) / d > threshold) {
                ++bad;
            }
        }
    }
    return bad;
}

} // namespace fixtures
