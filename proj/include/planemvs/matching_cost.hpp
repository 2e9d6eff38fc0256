#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planemvs/geometry.hpp"
#include "planemvs/raster.hpp"

namespace planemvs {

/// Worst photometric cost (1 - ncc with ncc = -1, or an unusable patch).
inline constexpr double kWorstCost = 2.0;

struct PixelOffset {
    int dx = 0;
    int dy = 0;
    bool operator==(const PixelOffset&) const = default;
};

/// 36-point equal-interval stencil of an L x L window, L = 10 * 2^S + 1:
/// offsets {-5s, -3s, -s, s, 3s, 5s}^2 with s = 2^S.
class SparseWindow {
public:
    static constexpr int kSampleCount = 36;

    explicit SparseWindow(int scale);

    int scale() const noexcept { return scale_; }
    int step() const noexcept { return 1 << scale_; }
    int edge() const noexcept { return 10 * step() + 1; }
    std::span<const PixelOffset, kSampleCount> offsets() const noexcept { return offsets_; }

private:
    int scale_;
    std::array<PixelOffset, kSampleCount> offsets_;
};

/// Good-match threshold tau(t) = tau0 * exp(-t^2 / alpha), t counted within a scale.
struct ThresholdSchedule {
    double tau0 = 0.8;
    double alpha = 90.0;

    double operator()(int t) const;
};

struct ViewWeightSet {
    std::vector<double> weights;
};

namespace cost {

/// Normalised cross-correlation of two equally sized sample sets, clamped to
/// [-1, 1]. nullopt signals a (near) zero-variance patch.
std::optional<double> ncc(std::span<const double> a, std::span<const double> b);

/// Reference patch samples plus the statistics reused across candidates.
struct ReferencePatch {
    std::array<double, SparseWindow::kSampleCount> values{};
    double mean = 0.0;
    double centered_sq = 0.0; // sum of squared deviations
    bool degenerate = true;
};

/// Integer-offset samples around p; positions beyond the border are clamped.
ReferencePatch sample_reference(const GrayImage& ref, int x, int y, const SparseWindow& window);

/// 1 - ncc of the reference patch against the source warped through h.
/// Worst cost when either patch is degenerate or more than half of the warped
/// samples land outside the source image (the remainder are clamped).
double patch_cost(const ReferencePatch& ref_patch, const GrayImage& src, const Eigen::Matrix3d& h, int x, int y,
                  const SparseWindow& window);

/// Full per-view cost at pixel p under plane hypothesis `plane`.
double photometric_cost(const GrayImage& ref_img, const GrayImage& src_img, const CameraModel& ref_cam,
                        const CameraModel& src_cam, int x, int y, const PlaneHypothesis& plane,
                        const SparseWindow& window);

/// Weighted mean sum(w m) / sum(w). Throws when no weight is positive.
double aggregate(std::span<const double> costs, std::span<const double> weights);

/// Weighted mean of min(err, 2). Throws when no weight is positive.
double geometric_cost(std::span<const double> reprojection_errors, std::span<const double> weights);

double threshold(const ThresholdSchedule& schedule, int t);

/// w_j = 1 if cost_j < tau else 0.1; all ones when no view passes.
void update_view_weights(std::span<const double> costs, double tau, std::span<double> weights);
ViewWeightSet update_view_weights(std::span<const double> costs, double tau);

} // namespace cost
} // namespace planemvs
