#include "planemvs/planar_prior.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

#include "parallel.hpp"
#include "planemvs/error.hpp"

namespace planemvs::prior {

namespace {
constexpr double kMinTriangleArea = 0.5;
}

std::vector<AnchorVertex> select_anchors(const HypothesisMap& map, const Raster<double>& geometric, int cell,
                                         AnchorGate gate, const AnchorThresholds& thresholds)
{
    if (cell < 1) {
        throw Error(ErrorKind::InvalidArgument, "anchor cell size must be positive");
    }
    if (gate == AnchorGate::Geometric &&
        (geometric.width() != map.width() || geometric.height() != map.height())) {
        throw Error(ErrorKind::InvalidArgument, "geometric cost raster does not match the hypothesis map");
    }
    std::vector<AnchorVertex> anchors;
    for (int y0 = 0; y0 < map.height(); y0 += cell) {
        for (int x0 = 0; x0 < map.width(); x0 += cell) {
            std::optional<AnchorVertex> best;
            for (int y = y0; y < std::min(y0 + cell, map.height()); ++y) {
                for (int x = x0; x < std::min(x0 + cell, map.width()); ++x) {
                    const double mp = map.photometric(x, y);
                    if (!(mp < thresholds.max_photometric)) {
                        continue;
                    }
                    const double mg = gate == AnchorGate::Geometric ? geometric(x, y)
                                                                    : std::numeric_limits<double>::quiet_NaN();
                    if (gate == AnchorGate::Geometric && !(mg < thresholds.max_geometric)) {
                        continue;
                    }
                    if (!best || mp < best->photometric) {
                        best = AnchorVertex{x, y, map.planes(x, y).depth, mp, mg};
                    }
                }
            }
            if (best) {
                anchors.push_back(*best);
            }
        }
    }
    return anchors;
}

PriorModel build_prior_model(std::vector<AnchorVertex> anchors, const CameraModel& cam)
{
    PriorModel model;
    model.vertices = std::move(anchors);
    model.triangle_index = Raster<int>(cam.width, cam.height, -1);

    std::vector<Eigen::Vector2d> pixels;
    pixels.reserve(model.vertices.size());
    for (const auto& v : model.vertices) {
        pixels.emplace_back(v.x, v.y);
    }

    for (const TriangleIndices& tri : delaunay(pixels)) {
        const Eigen::Vector2d& a = pixels[tri[0]];
        const Eigen::Vector2d& b = pixels[tri[1]];
        const Eigen::Vector2d& c = pixels[tri[2]];
        const double area = 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
        if (!(area > kMinTriangleArea)) {
            continue;
        }
        std::array<Eigen::Vector3d, 3> corners;
        for (int k = 0; k < 3; ++k) {
            const auto& v = model.vertices[tri[k]];
            corners[k] = geometry::unproject(cam, pixels[tri[k]], v.depth);
        }
        Eigen::Vector3d normal = (corners[1] - corners[0]).cross(corners[2] - corners[0]);
        if (!(normal.norm() > 0.0)) {
            continue;
        }
        normal.normalize();
        if (normal.dot(corners[0]) > 0.0) {
            normal = -normal;
        }
        model.triangles.push_back(tri);
        model.plane_normals.push_back(normal);
        model.plane_points.push_back(corners[0]);
    }

    // Rasterise in triangle order; a pixel on a shared edge keeps the first triangle.
    for (std::size_t t = 0; t < model.triangles.size(); ++t) {
        const auto& tri = model.triangles[t];
        const Eigen::Vector2d& a = pixels[tri[0]];
        const Eigen::Vector2d& b = pixels[tri[1]];
        const Eigen::Vector2d& c = pixels[tri[2]];
        const double denom = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({a.x(), b.x(), c.x()}))));
        const int x_hi = std::min(cam.width - 1, static_cast<int>(std::ceil(std::max({a.x(), b.x(), c.x()}))));
        const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({a.y(), b.y(), c.y()}))));
        const int y_hi = std::min(cam.height - 1, static_cast<int>(std::ceil(std::max({a.y(), b.y(), c.y()}))));
        constexpr double eps = 1e-9;
        for (int y = y_lo; y <= y_hi; ++y) {
            for (int x = x_lo; x <= x_hi; ++x) {
                const Eigen::Vector2d p(x, y);
                const double wb = ((p - a).x() * (c - a).y() - (p - a).y() * (c - a).x()) / denom;
                const double wc = ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x()) / denom;
                const double wa = 1.0 - wb - wc;
                if (wa >= -eps && wb >= -eps && wc >= -eps && model.triangle_index(x, y) < 0) {
                    model.triangle_index(x, y) = static_cast<int>(t);
                }
            }
        }
    }
    return model;
}

std::optional<double> prior_depth(const PriorModel& model, const CameraModel& cam, const Eigen::Vector2d& p)
{
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    if (model.empty() || !model.triangle_index.contains(x, y)) {
        return std::nullopt;
    }
    const int t = model.triangle_index(x, y);
    if (t < 0) {
        return std::nullopt;
    }
    const Eigen::Vector3d& n = model.plane_normals[static_cast<std::size_t>(t)];
    const double den = n.dot(geometry::pixel_ray(cam, p));
    if (std::abs(den) < 1e-12) {
        return std::nullopt;
    }
    const double depth = n.dot(model.plane_points[static_cast<std::size_t>(t)]) / den;
    if (!(depth > 0.0)) {
        return std::nullopt;
    }
    return depth;
}

Raster<double> prior_depth_raster(const PriorModel& model, const CameraModel& cam)
{
    Raster<double> out(cam.width, cam.height, std::numeric_limits<double>::quiet_NaN());
    if (model.empty()) {
        return out;
    }
    detail::for_each_row(cam.height, [&](int y) {
        for (int x = 0; x < cam.width; ++x) {
            if (const auto d = prior_depth(model, cam, Eigen::Vector2d(x, y))) {
                out(x, y) = *d;
            }
        }
    });
    return out;
}

void run_prior_pass(HypothesisMap& map, const MatchingProblem& problem, const PriorModel& model,
                    const patchmatch::PassOptions& options, double lambda, double sigma)
{
    if (!(sigma > 0.0) || lambda < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "prior penalty needs sigma > 0 and lambda >= 0");
    }
    const Raster<double> depths = prior_depth_raster(model, problem.ref().camera);
    const PriorTerm term{&depths, lambda, sigma};
    CostMode mode;
    mode.prior = &term;
    patchmatch::run_passes(map, problem, mode, options);
}

void write_triangulation(const std::filesystem::path& path, const PriorModel& model)
{
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    out << std::setprecision(17);
    for (const auto& v : model.vertices) {
        out << "v " << v.x << ' ' << v.y << ' ' << v.depth << '\n';
    }
    for (const auto& t : model.triangles) {
        out << "f " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    }
    if (!out) {
        throw Error(ErrorKind::Io, "failed writing " + path.string());
    }
}

} // namespace planemvs::prior
