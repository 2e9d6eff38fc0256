#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planemvs/patchmatch.hpp"
#include "planemvs/raster.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

/// A reliable pixel chosen as a triangulation vertex.
struct AnchorVertex {
    int x = 0;
    int y = 0;
    double depth = 0.0;
    double photometric = 0.0;
    double geometric = 0.0;
};

enum class AnchorGate {
    Photometric, // m_p < 0.2 only
    Geometric,   // m_p < 0.2 and m_g < 1.0
};

struct AnchorThresholds {
    double max_photometric = 0.2;
    double max_geometric = 1.0;
};

using TriangleIndices = std::array<int, 3>;

/// Triangulated anchors with one camera-frame plane per triangle and a
/// per-pixel triangle lookup (-1 outside every triangle).
struct PriorModel {
    std::vector<AnchorVertex> vertices;
    std::vector<TriangleIndices> triangles;
    std::vector<Eigen::Vector3d> plane_normals; // unit, camera frame
    std::vector<Eigen::Vector3d> plane_points;  // one vertex per triangle, camera frame
    Raster<int> triangle_index;

    bool empty() const noexcept { return triangles.empty(); }
};

namespace prior {

/// Per cell x cell tile, the lowest-m_p pixel that passes the gate.
std::vector<AnchorVertex> select_anchors(const HypothesisMap& map, const Raster<double>& geometric, int cell,
                                         AnchorGate gate = AnchorGate::Geometric,
                                         const AnchorThresholds& thresholds = {});

/// Delaunay triangulation (incremental Bowyer-Watson over a lexicographically
/// sorted copy of the input). Triangles index into `points` and are counter-
/// clockwise in a y-up frame. Empty for fewer than three distinct or all
/// collinear points.
std::vector<TriangleIndices> delaunay(std::span<const Eigen::Vector2d> points);

/// Triangulates the anchors, drops triangles with area <= 0.5 px^2 and fits a
/// plane through each triangle's unprojected vertices.
PriorModel build_prior_model(std::vector<AnchorVertex> anchors, const CameraModel& cam);

/// Depth where p's ray meets the plane of the triangle covering p.
std::optional<double> prior_depth(const PriorModel& model, const CameraModel& cam, const Eigen::Vector2d& p);

/// prior_depth() at every pixel, NaN where the model has no answer.
Raster<double> prior_depth_raster(const PriorModel& model, const CameraModel& cam);

/// m_p + lambda * (1 - exp(-r^2 / (2 sigma^2))), r = (d - d_prior) / d_prior;
/// m_p unchanged without a prior.
inline double prior_assisted_cost(double photometric, double depth, std::optional<double> prior_depth,
                                  double lambda, double sigma)
{
    if (!prior_depth) {
        return photometric;
    }
    const double r = (depth - *prior_depth) / *prior_depth;
    return photometric + lambda * (1.0 - std::exp(-(r * r) / (2.0 * sigma * sigma)));
}

/// options.iterations S = 0 iterations scored with the prior-assisted cost.
void run_prior_pass(HypothesisMap& map, const MatchingProblem& problem, const PriorModel& model,
                    const patchmatch::PassOptions& options, double lambda, double sigma);

/// Debug dump: "v x y depth" lines then "f i j k" lines.
void write_triangulation(const std::filesystem::path& path, const PriorModel& model);

} // namespace prior
} // namespace planemvs
