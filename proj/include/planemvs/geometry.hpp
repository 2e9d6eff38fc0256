#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "planemvs/raster.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

/// Local surface plane at a pixel: unit normal in the reference camera frame
/// and the z-depth where the pixel's ray meets the plane.
struct PlaneHypothesis {
    Eigen::Vector3d normal = Eigen::Vector3d(0.0, 0.0, -1.0);
    double depth = 1.0;
};

/// Forward-backward reprojection errors are clamped to this ceiling; it is
/// also what an unverifiable pixel scores.
inline constexpr double kReprojectionCeiling = 2.0;

namespace geometry {

/// Ray through pixel p with unit z: ((x - cx) / fx, (y - cy) / fy, 1).
Eigen::Vector3d pixel_ray(const CameraModel& cam, const Eigen::Vector2d& p);

/// Camera-frame point at the given z-depth along p's ray. Throws on depth <= 0.
Eigen::Vector3d unproject(const CameraModel& cam, const Eigen::Vector2d& p, double depth);

/// Pixel of a camera-frame point; nullopt behind the camera.
std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Eigen::Vector3d& x_cam);

Eigen::Vector3d camera_to_world(const CameraModel& cam, const Eigen::Vector3d& x_cam);
Eigen::Vector3d world_to_camera(const CameraModel& cam, const Eigen::Vector3d& x_world);

/// Plane faces the camera when its normal points against p's ray.
bool faces_camera(const Eigen::Vector3d& normal, const Eigen::Vector3d& ray);

/// Depth at pixel p of the plane carried by `plane_at_q`, a hypothesis
/// anchored at pixel q. nullopt when the ray is (near) parallel to the plane.
std::optional<double> ray_plane_depth(const CameraModel& cam, const Eigen::Vector2d& p,
                                      const PlaneHypothesis& plane_at_q, const Eigen::Vector2d& q);

/// Relative pose and intrinsics for transfers from a reference into a
/// source camera. Precompute once per view pair; the per-pixel calls are cheap.
class TwoViewGeometry {
public:
    TwoViewGeometry(const CameraModel& ref, const CameraModel& src);

    const CameraModel& ref() const noexcept { return *ref_; }
    const CameraModel& src() const noexcept { return *src_; }

    /// src-from-ref rotation and translation.
    const Eigen::Matrix3d& rotation() const noexcept { return r_rel_; }
    const Eigen::Vector3d& translation() const noexcept { return t_rel_; }

    /// H = K_src (R - t n^T / dist) K_ref^-1 for the plane of `plane` at p.
    /// Throws Error(Degenerate) when the plane passes through the reference centre.
    Eigen::Matrix3d homography(const Eigen::Vector2d& p, const PlaneHypothesis& plane) const;

    /// Same as homography() but returns nullopt instead of throwing.
    std::optional<Eigen::Matrix3d> try_homography(const Eigen::Vector2d& p, const PlaneHypothesis& plane) const;

    /// Ref pixel p at depth d_ref -> src pixel p' -> source depth (bilinear in inverse depth) ->
    /// back into ref as p''. Returns |p - p''|, or the ceiling when p' leaves
    /// the source image or the source depth there is invalid.
    double forward_backward_error(const Eigen::Vector2d& p, double d_ref, const DepthMap& src_depth) const;

private:
    const CameraModel* ref_;
    const CameraModel* src_;
    Eigen::Matrix3d r_rel_;
    Eigen::Vector3d t_rel_;
    Eigen::Matrix3d k_ref_inv_;
    Eigen::Matrix3d warp_rot_;   // K_src R K_ref^-1
    Eigen::Vector3d warp_trans_; // K_src t
};

Eigen::Matrix3d homography_from_plane(const CameraModel& ref, const CameraModel& src, const Eigen::Vector2d& p,
                                      const PlaneHypothesis& plane);

double forward_backward_error(const CameraModel& ref, const CameraModel& src, const Eigen::Vector2d& p,
                              double d_ref, const DepthMap& src_depth);

/// Applies a homography to a pixel (homogeneous divide).
Eigen::Vector2d transfer(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);

} // namespace geometry
} // namespace planemvs
