#include "planemvs/fusion.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "parallel.hpp"
#include "planemvs/error.hpp"
#include "planemvs/geometry.hpp"

namespace planemvs::fusion {

namespace {

struct Match {
    int view;
    int x;
    int y;
    Eigen::Vector3d position;
    Eigen::Vector3d normal;
};

Rgb8 pixel_color(const View& view, int x, int y)
{
    if (!view.color.empty()) {
        return view.color(x, y);
    }
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(view.image(x, y), 0.0f, 1.0f) * 255.0f));
    return {g, g, g};
}

void append_f32(std::string& out, float v)
{
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) {
        out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
    }
}

} // namespace

FusionResult fuse(const Scene& scene, std::span<const DepthMap> depths,
                  std::span<const Raster<Eigen::Vector3d>> normals, const FusionThresholds& thresholds,
                  std::span<const int> order)
{
    const std::size_t n = scene.views.size();
    if (depths.size() != n || normals.size() != n) {
        throw Error(ErrorKind::InvalidArgument, "fusion needs one depth and one normal map per view");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& cam = scene.views[i].camera;
        if (depths[i].width() != cam.width || depths[i].height() != cam.height ||
            normals[i].width() != cam.width || normals[i].height() != cam.height) {
            throw Error(ErrorKind::InvalidArgument, "fusion raster size differs from its camera");
        }
    }
    std::vector<int> views(order.begin(), order.end());
    if (views.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            views.push_back(static_cast<int>(i));
        }
    }

    const double cos_limit = std::cos(thresholds.max_normal_angle_deg * std::numbers::pi / 180.0);
    std::vector<Raster<std::uint8_t>> consumed;
    for (std::size_t i = 0; i < n; ++i) {
        consumed.emplace_back(scene.views[i].camera.width, scene.views[i].camera.height, 0);
    }

    const auto world_normal = [&](int v, int x, int y) -> Eigen::Vector3d {
        return scene.views[static_cast<std::size_t>(v)].camera.rotation.transpose() *
               normals[static_cast<std::size_t>(v)](x, y).normalized();
    };

    FusionResult result;
    for (int i : views) {
        if (i < 0 || static_cast<std::size_t>(i) >= n) {
            throw Error(ErrorKind::InvalidArgument, "fusion view order names an unknown view");
        }
        const CameraModel& cam_i = scene.views[static_cast<std::size_t>(i)].camera;
        const DepthMap& depth_i = depths[static_cast<std::size_t>(i)];

        // Consistency does not depend on consumption, so it is checked up front
        // in parallel; consumption is then resolved serially in raster order.
        std::vector<std::vector<Match>> matches(static_cast<std::size_t>(cam_i.width) * cam_i.height);
        detail::for_each_row(cam_i.height, [&](int y) {
            for (int x = 0; x < cam_i.width; ++x) {
                const auto d = depth_i.at(x, y);
                if (!d || !(*d > 0.0)) {
                    continue;
                }
                const Eigen::Vector2d p(x, y);
                const Eigen::Vector3d world = geometry::camera_to_world(cam_i, geometry::unproject(cam_i, p, *d));
                const Eigen::Vector3d n_i = world_normal(i, x, y);
                auto& out = matches[static_cast<std::size_t>(y) * cam_i.width + x];
                for (int j = 0; j < static_cast<int>(n); ++j) {
                    if (j == i) {
                        continue;
                    }
                    const CameraModel& cam_j = scene.views[static_cast<std::size_t>(j)].camera;
                    const Eigen::Vector3d x_j = geometry::world_to_camera(cam_j, world);
                    const auto q = geometry::project(cam_j, x_j);
                    if (!q) {
                        continue;
                    }
                    const long ux = std::lround(q->x());
                    const long uy = std::lround(q->y());
                    if (ux < 0 || uy < 0 || ux >= cam_j.width || uy >= cam_j.height) {
                        continue;
                    }
                    const int u = static_cast<int>(ux);
                    const int v = static_cast<int>(uy);
                    const auto d_j = depths[static_cast<std::size_t>(j)].at(u, v);
                    if (!d_j || !(*d_j > 0.0)) {
                        continue;
                    }
                    if (std::abs(x_j.z() - *d_j) / *d_j >= thresholds.max_relative_depth) {
                        continue;
                    }
                    const Eigen::Vector3d world_j =
                        geometry::camera_to_world(cam_j, geometry::unproject(cam_j, Eigen::Vector2d(u, v), *d_j));
                    const auto back = geometry::project(cam_i, geometry::world_to_camera(cam_i, world_j));
                    if (!back || (*back - p).norm() >= thresholds.max_reprojection_px) {
                        continue;
                    }
                    const Eigen::Vector3d n_j = world_normal(j, u, v);
                    if (!(n_i.dot(n_j) > cos_limit)) {
                        continue;
                    }
                    out.push_back({j, u, v, world_j, n_j});
                }
                out.insert(out.begin(), Match{i, x, y, world, n_i});
            }
        });

        for (int y = 0; y < cam_i.height; ++y) {
            for (int x = 0; x < cam_i.width; ++x) {
                auto& cand = matches[static_cast<std::size_t>(y) * cam_i.width + x];
                if (cand.empty() || consumed[static_cast<std::size_t>(i)](x, y)) {
                    continue;
                }
                std::vector<const Match*> used(1, &cand.front());
                for (std::size_t k = 1; k < cand.size(); ++k) {
                    if (!consumed[static_cast<std::size_t>(cand[k].view)](cand[k].x, cand[k].y)) {
                        used.push_back(&cand[k]);
                    }
                }
                if (static_cast<int>(used.size()) < thresholds.min_support) {
                    continue;
                }
                FusedPoint point;
                point.position.setZero();
                point.normal.setZero();
                Eigen::Vector3d color = Eigen::Vector3d::Zero();
                for (const Match* m : used) {
                    point.position += m->position;
                    point.normal += m->normal;
                    const Rgb8 c = pixel_color(scene.views[static_cast<std::size_t>(m->view)], m->x, m->y);
                    color += Eigen::Vector3d(c[0], c[1], c[2]);
                    consumed[static_cast<std::size_t>(m->view)](m->x, m->y) = 1;
                    result.contributors.push_back({m->view, m->x, m->y});
                }
                const double count = static_cast<double>(used.size());
                point.position /= count;
                point.normal.normalize();
                color /= count;
                for (int c = 0; c < 3; ++c) {
                    point.color[static_cast<std::size_t>(c)] =
                        static_cast<std::uint8_t>(std::lround(std::clamp(color[c], 0.0, 255.0)));
                }
                point.support = static_cast<int>(used.size());
                result.points.push_back(point);
                result.offsets.push_back(result.contributors.size());
            }
        }
    }
    return result;
}

void write_ply(const std::filesystem::path& path, std::span<const FusedPoint> points)
{
    std::string data = "ply\nformat binary_little_endian 1.0\nelement vertex " + std::to_string(points.size()) +
                       "\nproperty float x\nproperty float y\nproperty float z\n"
                       "property float nx\nproperty float ny\nproperty float nz\n"
                       "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    data.reserve(data.size() + points.size() * 27);
    for (const auto& p : points) {
        for (int k = 0; k < 3; ++k) {
            append_f32(data, static_cast<float>(p.position[k]));
        }
        for (int k = 0; k < 3; ++k) {
            append_f32(data, static_cast<float>(p.normal[k]));
        }
        for (auto c : p.color) {
            data.push_back(static_cast<char>(c));
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
}

} // namespace planemvs::fusion
