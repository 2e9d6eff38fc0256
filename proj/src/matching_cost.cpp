#include "planemvs/matching_cost.hpp"

#include <algorithm>
#include <cmath>

#include "planemvs/error.hpp"

namespace planemvs {

namespace {
// Per-sample variance below this is treated as a flat patch.
constexpr double kMinVariance = 1e-10;
constexpr double kPoorViewWeight = 0.1;
} // namespace

SparseWindow::SparseWindow(int scale) : scale_(scale)
{
    if (scale < 0 || scale > 8) {
        throw Error(ErrorKind::InvalidArgument, "window scale must be in [0, 8]");
    }
    const int s = step();
    constexpr std::array<int, 6> ticks = {-5, -3, -1, 1, 3, 5};
    std::size_t i = 0;
    for (int ty : ticks) {
        for (int tx : ticks) {
            offsets_[i++] = {tx * s, ty * s};
        }
    }
}

double ThresholdSchedule::operator()(int t) const
{
    return tau0 * std::exp(-static_cast<double>(t) * t / alpha);
}

namespace cost {

std::optional<double> ncc(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw Error(ErrorKind::InvalidArgument, "ncc needs two non-empty sample sets of equal size");
    }
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0;
    double mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0;
    double var_a = 0.0;
    double var_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a < kMinVariance * n || var_b < kMinVariance * n) {
        return std::nullopt;
    }
    return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

ReferencePatch sample_reference(const GrayImage& ref, int x, int y, const SparseWindow& window)
{
    ReferencePatch patch;
    const auto offsets = window.offsets();
    double sum = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const int sx = std::clamp(x + offsets[i].dx, 0, ref.width() - 1);
        const int sy = std::clamp(y + offsets[i].dy, 0, ref.height() - 1);
        patch.values[i] = ref(sx, sy);
        sum += patch.values[i];
    }
    patch.mean = sum / SparseWindow::kSampleCount;
    double sq = 0.0;
    for (double v : patch.values) {
        sq += (v - patch.mean) * (v - patch.mean);
    }
    patch.centered_sq = sq;
    patch.degenerate = sq < kMinVariance * SparseWindow::kSampleCount;
    return patch;
}

double patch_cost(const ReferencePatch& ref_patch, const GrayImage& src, const Eigen::Matrix3d& h, int x, int y,
                  const SparseWindow& window)
{
    if (ref_patch.degenerate) {
        return kWorstCost;
    }
    const auto offsets = window.offsets();
    std::array<double, SparseWindow::kSampleCount> values;
    const double max_x = src.width() - 1;
    const double max_y = src.height() - 1;
    int outside = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const double px = x + offsets[i].dx;
        const double py = y + offsets[i].dy;
        const double w = h(2, 0) * px + h(2, 1) * py + h(2, 2);
        double u = 0.0;
        double v = 0.0;
        if (w > 0.0) {
            u = (h(0, 0) * px + h(0, 1) * py + h(0, 2)) / w;
            v = (h(1, 0) * px + h(1, 1) * py + h(1, 2)) / w;
        }
        if (!(w > 0.0) || !(u >= 0.0 && u <= max_x && v >= 0.0 && v <= max_y)) {
            ++outside;
            if (2 * outside > SparseWindow::kSampleCount) {
                return kWorstCost;
            }
            u = std::isfinite(u) ? std::clamp(u, 0.0, max_x) : 0.0;
            v = std::isfinite(v) ? std::clamp(v, 0.0, max_y) : 0.0;
        }
        values[i] = sample_bilinear(src, u, v);
        sum += values[i];
    }
    const double mean = sum / SparseWindow::kSampleCount;
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double d = values[i] - mean;
        cov += (ref_patch.values[i] - ref_patch.mean) * d;
        var += d * d;
    }
    if (var < kMinVariance * SparseWindow::kSampleCount) {
        return kWorstCost;
    }
    const double corr = std::clamp(cov / std::sqrt(ref_patch.centered_sq * var), -1.0, 1.0);
    return 1.0 - corr;
}

double photometric_cost(const GrayImage& ref_img, const GrayImage& src_img, const CameraModel& ref_cam,
                        const CameraModel& src_cam, int x, int y, const PlaneHypothesis& plane,
                        const SparseWindow& window)
{
    const auto patch = sample_reference(ref_img, x, y, window);
    const auto h = geometry::TwoViewGeometry(ref_cam, src_cam).try_homography(Eigen::Vector2d(x, y), plane);
    if (!h) {
        return kWorstCost;
    }
    return patch_cost(patch, src_img, *h, x, y, window);
}

double aggregate(std::span<const double> costs, std::span<const double> weights)
{
    if (costs.size() != weights.size()) {
        throw Error(ErrorKind::InvalidArgument, "aggregate needs one weight per cost");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < costs.size(); ++j) {
        num += weights[j] * costs[j];
        den += weights[j];
    }
    if (!(den > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "aggregate needs at least one positive weight");
    }
    return num / den;
}

double geometric_cost(std::span<const double> reprojection_errors, std::span<const double> weights)
{
    if (reprojection_errors.size() != weights.size()) {
        throw Error(ErrorKind::InvalidArgument, "geometric_cost needs one weight per view");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        num += weights[j] * std::min(reprojection_errors[j], kReprojectionCeiling);
        den += weights[j];
    }
    if (!(den > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "geometric_cost needs at least one positive weight");
    }
    return num / den;
}

double threshold(const ThresholdSchedule& schedule, int t)
{
    return schedule(t);
}

void update_view_weights(std::span<const double> costs, double tau, std::span<double> weights)
{
    bool any_good = false;
    for (std::size_t j = 0; j < costs.size(); ++j) {
        const bool good = costs[j] < tau;
        weights[j] = good ? 1.0 : kPoorViewWeight;
        any_good = any_good || good;
    }
    if (!any_good) {
        std::fill(weights.begin(), weights.end(), 1.0);
    }
}

ViewWeightSet update_view_weights(std::span<const double> costs, double tau)
{
    ViewWeightSet set{std::vector<double>(costs.size(), 1.0)};
    update_view_weights(costs, tau, set.weights);
    return set;
}

} // namespace cost
} // namespace planemvs
