#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "planemvs/fusion.hpp"
#include "planemvs/matching_cost.hpp"
#include "planemvs/patchmatch.hpp"
#include "planemvs/planar_prior.hpp"
#include "planemvs/scene_io.hpp"

namespace planemvs {

/// Which of the four pipeline stages run. Stage 1 (mPM) is mandatory.
struct StageSet {
    bool mpm = true;
    bool geometric = true; // stage 2: geometric consistency
    bool prior = true;     // stage 3: anchors, triangulation, prior-assisted pass
    bool final = true;     // stage 4: final geometric consistency

    /// Comma-separated subset of "mpm,geom,prior,final".
    static StageSet parse(const std::string& list);
    std::string to_string() const;

    bool operator==(const StageSet&) const = default;
};

struct EstimateOptions {
    int max_dim = 3200;
    std::optional<int> smax; // selected from the image size when empty
    std::uint64_t seed = 0;
    ThresholdSchedule thresholds;
    double eta = 0.2;
    double lambda_prior = 0.3;
    double sigma_prior = 0.05;
    int cell = 25;
    StageSet stages;
    AnchorGate anchor_gate = AnchorGate::Geometric;
    int geometric_iterations = 2;
    int prior_iterations = 3;
    int final_iterations = 2;
    bool refine = true;
    int threads = 0; // 0 = all hardware threads

    /// Ground-truth depth per view (at the working resolution). When set,
    /// anchors off by more than bad_anchor_threshold relative depth are counted.
    const std::vector<DepthMap>* ground_truth = nullptr;
    double bad_anchor_threshold = 0.02;

    /// Called for every view right before anchor selection.
    std::function<void(std::size_t view, HypothesisMap& map)> before_anchor_selection;
};

struct EstimateResult {
    Scene scene; // at the working resolution
    int smax = 0;
    std::vector<HypothesisMap> maps;
    std::vector<PriorModel> models; // empty unless the prior stage ran
    std::vector<std::size_t> anchor_counts;
    std::vector<std::size_t> bad_anchor_counts; // zeros without ground truth
};

namespace pipeline {

EstimateResult estimate(const Scene& scene, const EstimateOptions& options);

/// Per view: <stem>.depth.dmap, <stem>.normal.dmap, <stem>.cost.dmap
/// (photometric), <stem>.geom.dmap when a geometric term ran, and
/// <stem>.prior.txt when a prior model was built. Also anchors.tsv.
void write_estimate(const EstimateResult& result, const std::filesystem::path& out_dir);

/// Loads the depth and normal rasters written by write_estimate() and fuses
/// them with the scene rescaled to the raster resolution.
FusionResult fuse_directory(const std::filesystem::path& scene_dir, const std::filesystem::path& raster_dir,
                            const FusionThresholds& thresholds);

/// Ground truth written by the synthetic renderer: gt/<stem>.depth.dmap and
/// the optional gt/<stem>.region.dmap.
struct GroundTruth {
    std::vector<DepthMap> depth;
    std::vector<Raster<double>> region;
};
GroundTruth load_ground_truth(const Scene& scene, const std::filesystem::path& gt_dir);

struct AblationRow {
    std::string name;
    int smax = 0;
    StageSet stages;
    AnchorGate gate = AnchorGate::Geometric;
    double median_rel_err = 0.0;
    double bad_fraction = 0.0;
    double untextured_bad_fraction = 0.0; // NaN without an untextured region
    std::size_t anchors = 0;
    std::size_t bad_anchors = 0;
};

/// Baseline (S_max = 0, mPM stage only), mPM, mPM + photometric-gated prior
/// and mPM + geometric-gated prior. Errors pooled over all views at the 2%
/// relative-depth threshold; the untextured region is region id >= 0.
std::vector<AblationRow> ablate(const Scene& scene, const GroundTruth& gt, const EstimateOptions& base);

std::string ablation_tsv(const std::vector<AblationRow>& rows);

} // namespace pipeline
} // namespace planemvs
