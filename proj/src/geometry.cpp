#include "planemvs/geometry.hpp"

#include <cmath>

#include "planemvs/error.hpp"

namespace planemvs::geometry {

namespace {
constexpr double kMinPlaneDistance = 1e-9;
constexpr double kMinRayDot = 1e-12;
} // namespace

Eigen::Vector3d pixel_ray(const CameraModel& cam, const Eigen::Vector2d& p)
{
    return {(p.x() - cam.cx) / cam.fx, (p.y() - cam.cy) / cam.fy, 1.0};
}

Eigen::Vector3d unproject(const CameraModel& cam, const Eigen::Vector2d& p, double depth)
{
    if (!(depth > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "unproject needs a positive depth");
    }
    return depth * pixel_ray(cam, p);
}

std::optional<Eigen::Vector2d> project(const CameraModel& cam, const Eigen::Vector3d& x_cam)
{
    if (!(x_cam.z() > 0.0)) {
        return std::nullopt;
    }
    return Eigen::Vector2d(cam.fx * x_cam.x() / x_cam.z() + cam.cx, cam.fy * x_cam.y() / x_cam.z() + cam.cy);
}

Eigen::Vector3d camera_to_world(const CameraModel& cam, const Eigen::Vector3d& x_cam)
{
    return cam.rotation.transpose() * (x_cam - cam.translation);
}

Eigen::Vector3d world_to_camera(const CameraModel& cam, const Eigen::Vector3d& x_world)
{
    return cam.rotation * x_world + cam.translation;
}

bool faces_camera(const Eigen::Vector3d& normal, const Eigen::Vector3d& ray)
{
    return normal.dot(ray) < 0.0;
}

std::optional<double> ray_plane_depth(const CameraModel& cam, const Eigen::Vector2d& p,
                                      const PlaneHypothesis& plane_at_q, const Eigen::Vector2d& q)
{
    const Eigen::Vector3d& n = plane_at_q.normal;
    const double denom = n.dot(pixel_ray(cam, p));
    if (std::abs(denom) < kMinRayDot) {
        return std::nullopt;
    }
    // n . X_q with X_q = depth_q * ray(q); the ray z-component is 1 so this is the depth directly.
    const double numer = plane_at_q.depth * n.dot(pixel_ray(cam, q));
    return numer / denom;
}

Eigen::Vector2d transfer(const Eigen::Matrix3d& h, const Eigen::Vector2d& p)
{
    const Eigen::Vector3d q = h * p.homogeneous();
    return q.hnormalized();
}

TwoViewGeometry::TwoViewGeometry(const CameraModel& ref, const CameraModel& src)
    : ref_(&ref), src_(&src)
{
    r_rel_ = src.rotation * ref.rotation.transpose();
    t_rel_ = src.translation - r_rel_ * ref.translation;
    k_ref_inv_ = ref.intrinsics_inverse();
    const Eigen::Matrix3d k_src = src.intrinsics();
    warp_rot_ = k_src * r_rel_ * k_ref_inv_;
    warp_trans_ = k_src * t_rel_;
}

std::optional<Eigen::Matrix3d> TwoViewGeometry::try_homography(const Eigen::Vector2d& p,
                                                               const PlaneHypothesis& plane) const
{
    const Eigen::Vector3d x = plane.depth * pixel_ray(*ref_, p);
    const double dist = -plane.normal.dot(x);
    if (std::abs(dist) < kMinPlaneDistance) {
        return std::nullopt;
    }
    // K_src (R - t n^T / d) K_ref^-1 = warp_rot - warp_trans (K_ref^-T n / d)^T
    const Eigen::Vector3d m = k_ref_inv_.transpose() * plane.normal / dist;
    return Eigen::Matrix3d(warp_rot_ - warp_trans_ * m.transpose());
}

Eigen::Matrix3d TwoViewGeometry::homography(const Eigen::Vector2d& p, const PlaneHypothesis& plane) const
{
    auto h = try_homography(p, plane);
    if (!h) {
        throw Error(ErrorKind::Degenerate, "plane passes through the reference camera centre");
    }
    return *h;
}

double TwoViewGeometry::forward_backward_error(const Eigen::Vector2d& p, double d_ref,
                                               const DepthMap& src_depth) const
{
    const Eigen::Vector3d x_ref = d_ref * pixel_ray(*ref_, p);
    const Eigen::Vector3d x_src = r_rel_ * x_ref + t_rel_;
    const auto p_src = project(*src_, x_src);
    if (!p_src) {
        return kReprojectionCeiling;
    }
    const auto d_src = src_depth.sample_inverse_bilinear(p_src->x(), p_src->y());
    if (!d_src || !(*d_src > 0.0)) {
        return kReprojectionCeiling;
    }
    const Eigen::Vector3d x_back = d_src.value() * pixel_ray(*src_, *p_src);
    // ref-from-src: R^T (X - t)
    const auto p_back = project(*ref_, r_rel_.transpose() * (x_back - t_rel_));
    if (!p_back) {
        return kReprojectionCeiling;
    }
    return (p - *p_back).norm();
}

Eigen::Matrix3d homography_from_plane(const CameraModel& ref, const CameraModel& src, const Eigen::Vector2d& p,
                                      const PlaneHypothesis& plane)
{
    return TwoViewGeometry(ref, src).homography(p, plane);
}

double forward_backward_error(const CameraModel& ref, const CameraModel& src, const Eigen::Vector2d& p,
                              double d_ref, const DepthMap& src_depth)
{
    return TwoViewGeometry(ref, src).forward_backward_error(p, d_ref, src_depth);
}

} // namespace planemvs::geometry
