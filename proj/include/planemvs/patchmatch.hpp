#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "planemvs/geometry.hpp"
#include "planemvs/matching_cost.hpp"
#include "planemvs/raster.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

/// Far-field checkerboard sampling pattern: eight regions around the pixel,
/// none closer than Chebyshev distance 2. Axis regions (up, down, left,
/// right) hold 10 samples at distances 5, 7, ..., 23; diagonal regions hold
/// 12 samples {(k, -k-1), (k+1, -k) : k = 2..7} rotated into each quadrant.
/// Every offset has odd |dx| + |dy|, so a pixel only ever reads the opposite
/// checkerboard colour.
class PropagationStencil {
public:
    static constexpr int kRegionCount = 8;
    static constexpr int kAxisSamples = 10;
    static constexpr int kDiagonalSamples = 12;

    static const PropagationStencil& standard();

    /// Regions 0-3 are up, down, left, right; 4-7 the diagonals.
    std::span<const PixelOffset> region(int r) const { return regions_[static_cast<std::size_t>(r)]; }
    std::size_t total() const;

private:
    PropagationStencil();
    std::array<std::vector<PixelOffset>, kRegionCount> regions_;
};

/// Scale S runs from max_scale down to 0 with a fixed number of iterations each.
struct ScaleSchedule {
    int max_scale = 0;
    int iterations_per_scale = 3;

    int total_iterations() const { return iterations_per_scale * (max_scale + 1); }
    /// Window edge used by each iteration, in execution order.
    std::vector<int> window_edges() const;
};

/// Per-pixel optimisation state for one reference view.
class HypothesisMap {
public:
    HypothesisMap() = default;
    HypothesisMap(int width, int height, int source_count);

    int width() const noexcept { return planes.width(); }
    int height() const noexcept { return planes.height(); }
    int source_count() const noexcept { return source_count_; }

    std::span<double> weights(int x, int y) noexcept
    {
        return {weights_.data() + planes.index(x, y) * static_cast<std::size_t>(source_count_),
                static_cast<std::size_t>(source_count_)};
    }
    std::span<const double> weights(int x, int y) const noexcept
    {
        return {weights_.data() + planes.index(x, y) * static_cast<std::size_t>(source_count_),
                static_cast<std::size_t>(source_count_)};
    }

    DepthMap depth_map() const;
    Raster<Eigen::Vector3d> normal_map() const;

    Raster<PlaneHypothesis> planes;
    Raster<double> cost;        // objective of the most recent cost mode
    Raster<double> photometric; // aggregated photometric cost m_p
    Raster<double> geometric;   // geometric cost m_g; NaN until a geometric term was evaluated

    bool operator==(const HypothesisMap&) const;

private:
    int source_count_ = 0;
    std::vector<double> weights_;
};

/// A reference view with its source views and the precomputed pair geometry.
/// Holds references into the views; they must outlive the problem.
class MatchingProblem {
public:
    MatchingProblem(const View& ref, std::vector<const View*> sources, DepthRange range, std::uint64_t stream_id);
    /// Reference = scene.views[ref_index], every other view a source.
    MatchingProblem(const Scene& scene, std::size_t ref_index);

    const View& ref() const noexcept { return *ref_; }
    std::size_t source_count() const noexcept { return sources_.size(); }
    const View& source(std::size_t j) const noexcept { return *sources_[j]; }
    const geometry::TwoViewGeometry& pair(std::size_t j) const noexcept { return pairs_[j]; }
    DepthRange depth_range() const noexcept { return range_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    const View* ref_;
    std::vector<const View*> sources_;
    std::vector<geometry::TwoViewGeometry> pairs_;
    DepthRange range_;
    std::uint64_t stream_id_;
};

/// m_p + eta * m_g against the previous round's source depth maps.
struct GeometricTerm {
    std::vector<const DepthMap*> source_depths;
    double eta = 0.2;
};

/// Per-pixel prior depth (NaN where none) and the penalty parameters.
struct PriorTerm {
    const Raster<double>* prior_depth = nullptr;
    double lambda = 0.3;
    double sigma = 0.05;
};

/// Photometric only when both are null.
struct CostMode {
    const GeometricTerm* geometric = nullptr;
    const PriorTerm* prior = nullptr;
};

struct Score {
    double objective = kWorstCost;
    double photometric = kWorstCost;
    double geometric = std::nan("");
};

/// Hook for instrumented runs. Calls arrive from worker threads.
class PropagationObserver {
public:
    virtual ~PropagationObserver() = default;
    virtual void on_neighbor_read(int x, int y, int qx, int qy) = 0;
    /// Number of full cost evaluations before refinement at (x, y).
    virtual void on_candidates_evaluated(int x, int y, int count) = 0;
};

/// Counter-based generator: the stream depends only on (seed, stream, serial,
/// pixel), never on scheduling.
class PixelRng {
public:
    PixelRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t serial, std::uint64_t pixel);

    std::uint64_t next() noexcept;
    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

namespace patchmatch {

/// Depth uniform in range; normal uniform over the hemisphere facing `ray`.
PlaneHypothesis random_hypothesis(const Eigen::Vector3d& ray, DepthRange range, PixelRng& rng);

/// Depth scaled by U[1 - 0.5/2^t, 1 + 0.5/2^t] (clamped to range), normal
/// rotated uniformly within a 30/2^t degree cone; the incumbent normal is kept
/// when the rotated one would face away from the camera.
PlaneHypothesis perturb_hypothesis(const PlaneHypothesis& plane, const Eigen::Vector3d& ray, DepthRange range,
                                   PixelRng& rng, int t);

/// Tries a fresh random hypothesis and a perturbation of the incumbent and
/// adopts the better one only on strict improvement. Returns true on change.
template <typename Evaluate>
bool refine(PlaneHypothesis& plane, Score& score, const Eigen::Vector3d& ray, DepthRange range, PixelRng& rng, int t,
            Evaluate&& evaluate)
{
    const PlaneHypothesis random = random_hypothesis(ray, range, rng);
    const PlaneHypothesis perturbed = perturb_hypothesis(plane, ray, range, rng, t);
    const Score random_score = evaluate(random);
    const Score perturbed_score = evaluate(perturbed);
    const bool perturbed_wins = perturbed_score.objective < random_score.objective;
    const PlaneHypothesis& best = perturbed_wins ? perturbed : random;
    const Score& best_score = perturbed_wins ? perturbed_score : random_score;
    if (best_score.objective < score.objective) {
        plane = best;
        score = best_score;
        return true;
    }
    return false;
}

struct IterationParams {
    SparseWindow window{0};
    double tau = 0.8;
    CostMode mode;
    std::uint64_t seed = 0;
    std::uint64_t serial = 1;
    int refine_t = 0;
    bool refine = true;
    PropagationObserver* observer = nullptr;
};

/// Random hypotheses everywhere, scored with `window`, weights refreshed with tau.
HypothesisMap random_init(const MatchingProblem& problem, const SparseWindow& window, std::uint64_t seed, double tau);

/// Re-evaluates every stored hypothesis under a new window or cost mode.
void rescore(HypothesisMap& map, const MatchingProblem& problem, const SparseWindow& window, const CostMode& mode);

/// One half-sweep over the pixels with (x + y) % 2 == color.
void checkerboard_iteration(HypothesisMap& map, const MatchingProblem& problem, int color,
                            const IterationParams& params);

struct IterationRecord {
    int scale = 0;
    int t = 0;
    int window_edge = 0;
    double tau = 0.0;
};

struct MpmOptions {
    ScaleSchedule schedule;
    ThresholdSchedule thresholds;
    std::uint64_t seed = 0;
    bool refine = true;
    std::vector<IterationRecord>* log = nullptr;
    PropagationObserver* observer = nullptr;
};

/// Multi-scale sparse-window PatchMatch: random init at the largest window,
/// then iterations_per_scale full iterations per scale from max_scale to 0
/// with the threshold schedule restarted at every scale.
HypothesisMap run_mpm(const MatchingProblem& problem, const MpmOptions& options);

/// Fixed-scale (S = 0) iterations after mPM.
struct PassOptions {
    int iterations = 2;
    double tau = 0.8;
    std::uint64_t seed = 0;
    std::uint64_t serial_base = 100;
    int refine_t_base = 3;
    bool refine = true;
    PropagationObserver* observer = nullptr;
};

/// Rescores under `mode` at S = 0 and runs options.iterations full iterations.
void run_passes(HypothesisMap& map, const MatchingProblem& problem, const CostMode& mode, const PassOptions& options);

void run_geometric_pass(HypothesisMap& map, const MatchingProblem& problem, const GeometricTerm& term,
                        const PassOptions& options);

/// Geometric cost of the stored hypotheses under the stored view weights.
Raster<double> geometric_costs(const HypothesisMap& map, const MatchingProblem& problem, const GeometricTerm& term);

/// 2 from 2400 px, 1 from 1200 px, else 0.
int select_smax(int max_dim);

} // namespace patchmatch
} // namespace planemvs
