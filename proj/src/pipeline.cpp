#include "planemvs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <sstream>

#include <tbb/global_control.h>
#include <tbb/task_arena.h>

#include "parallel.hpp"
#include "planemvs/error.hpp"

namespace planemvs {

StageSet StageSet::parse(const std::string& list)
{
    StageSet set{false, false, false, false};
    std::stringstream in(list);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item == "mpm") {
            set.mpm = true;
        } else if (item == "geom") {
            set.geometric = true;
        } else if (item == "prior") {
            set.prior = true;
        } else if (item == "final") {
            set.final = true;
        } else {
            throw Error(ErrorKind::InvalidArgument, "unknown stage '" + item + "' (expected mpm, geom, prior, final)");
        }
    }
    if (!set.mpm) {
        throw Error(ErrorKind::InvalidArgument, "the stage list must include mpm");
    }
    return set;
}

std::string StageSet::to_string() const
{
    std::string out;
    const auto add = [&](bool on, const char* name) {
        if (on) {
            out += out.empty() ? "" : ",";
            out += name;
        }
    };
    add(mpm, "mpm");
    add(geometric, "geom");
    add(prior, "prior");
    add(final, "final");
    return out;
}

namespace pipeline {

namespace {

constexpr std::uint64_t kGeometricSerialBase = 100;
constexpr std::uint64_t kPriorSerialBase = 200;
constexpr std::uint64_t kFinalSerialBase = 300;
constexpr int kIterationsPerScale = 3;

std::string stem_of(const View& view)
{
    return std::filesystem::path(view.name).stem().string();
}

GeometricTerm term_for(std::size_t ref, const std::vector<DepthMap>& depths, double eta)
{
    GeometricTerm term;
    term.eta = eta;
    for (std::size_t j = 0; j < depths.size(); ++j) {
        if (j != ref) {
            term.source_depths.push_back(&depths[j]);
        }
    }
    return term;
}

std::vector<DepthMap> snapshot(const std::vector<HypothesisMap>& maps)
{
    std::vector<DepthMap> depths;
    depths.reserve(maps.size());
    for (const auto& m : maps) {
        depths.push_back(m.depth_map());
    }
    return depths;
}

void validate(const Scene& scene, const EstimateOptions& o)
{
    if (scene.views.size() < 2) {
        throw Error(ErrorKind::InvalidArgument, "estimation needs at least two views");
    }
    if (!o.stages.mpm) {
        throw Error(ErrorKind::InvalidArgument, "the mpm stage cannot be disabled");
    }
    if (o.cell < 1 || o.geometric_iterations < 0 || o.prior_iterations < 0 || o.final_iterations < 0) {
        throw Error(ErrorKind::InvalidArgument, "cell size and iteration counts must be positive");
    }
    if (o.smax && (*o.smax < 0 || *o.smax > 3)) {
        throw Error(ErrorKind::InvalidArgument, "smax must be in 0..3");
    }
    if (!(o.thresholds.alpha > 0.0) || o.eta < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "alpha must be positive and eta non-negative");
    }
}

EstimateResult run_stages(const Scene& input, const EstimateOptions& o)
{
    EstimateResult result;
    result.scene = io::rescale_to_max_dim(input, o.max_dim);
    const Scene& scene = result.scene;
    const std::size_t n = scene.views.size();

    int largest = 0;
    for (const auto& v : scene.views) {
        largest = std::max({largest, v.camera.width, v.camera.height});
    }
    result.smax = o.smax ? *o.smax : patchmatch::select_smax(largest);

    if (o.ground_truth) {
        if (o.ground_truth->size() != n) {
            throw Error(ErrorKind::InvalidArgument, "ground truth needs one depth map per view");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if ((*o.ground_truth)[i].width() != scene.views[i].camera.width ||
                (*o.ground_truth)[i].height() != scene.views[i].camera.height) {
                throw Error(ErrorKind::InvalidArgument, "ground truth is not at the working resolution");
            }
        }
    }

    std::vector<MatchingProblem> problems;
    problems.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        problems.emplace_back(scene, i);
    }

    // Stage 1.
    result.maps.resize(n);
    detail::for_each_index(n, [&](std::size_t i) {
        patchmatch::MpmOptions mpm;
        mpm.schedule = {result.smax, kIterationsPerScale};
        mpm.thresholds = o.thresholds;
        mpm.seed = o.seed;
        mpm.refine = o.refine;
        result.maps[i] = patchmatch::run_mpm(problems[i], mpm);
    });

    const double held_tau = o.thresholds(kIterationsPerScale - 1);
    const auto pass_options = [&](int iterations, std::uint64_t serial_base) {
        patchmatch::PassOptions pass;
        pass.iterations = iterations;
        pass.tau = held_tau;
        pass.seed = o.seed;
        pass.serial_base = serial_base;
        pass.refine = o.refine;
        return pass;
    };
    const auto geometric_stage = [&](int iterations, std::uint64_t serial_base) {
        const std::vector<DepthMap> depths = snapshot(result.maps);
        detail::for_each_index(n, [&](std::size_t i) {
            const GeometricTerm term = term_for(i, depths, o.eta);
            patchmatch::run_geometric_pass(result.maps[i], problems[i], term, pass_options(iterations, serial_base));
        });
    };

    if (o.stages.geometric) {
        geometric_stage(o.geometric_iterations, kGeometricSerialBase);
    }

    result.anchor_counts.assign(n, 0);
    result.bad_anchor_counts.assign(n, 0);
    if (o.stages.prior) {
        result.models.resize(n);
        const std::vector<DepthMap> depths = snapshot(result.maps);
        detail::for_each_index(n, [&](std::size_t i) {
            HypothesisMap& map = result.maps[i];
            if (o.before_anchor_selection) {
                o.before_anchor_selection(i, map);
            }
            const GeometricTerm term = term_for(i, depths, o.eta);
            const Raster<double> mg = patchmatch::geometric_costs(map, problems[i], term);
            auto anchors = prior::select_anchors(map, mg, o.cell, o.anchor_gate);
            result.anchor_counts[i] = anchors.size();
            if (o.ground_truth) {
                const DepthMap& gt = (*o.ground_truth)[i];
                for (const auto& a : anchors) {
                    const auto truth = gt.at(a.x, a.y);
                    if (!truth || std::abs(a.depth - *truth) / *truth > o.bad_anchor_threshold) {
                        ++result.bad_anchor_counts[i];
                    }
                }
            }
            result.models[i] = prior::build_prior_model(std::move(anchors), scene.views[i].camera);
            prior::run_prior_pass(map, problems[i], result.models[i], pass_options(o.prior_iterations, kPriorSerialBase),
                                  o.lambda_prior, o.sigma_prior);
        });
    }

    if (o.stages.final) {
        geometric_stage(o.final_iterations, kFinalSerialBase);
    }
    return result;
}

} // namespace

EstimateResult estimate(const Scene& scene, const EstimateOptions& options)
{
    validate(scene, options);
    std::unique_ptr<tbb::global_control> limit;
    if (options.threads > 0) {
        limit = std::make_unique<tbb::global_control>(tbb::global_control::max_allowed_parallelism,
                                                      static_cast<std::size_t>(options.threads));
    } else if (options.threads < 0) {
        throw Error(ErrorKind::InvalidArgument, "thread count must be positive");
    }
    tbb::task_arena arena(options.threads > 0 ? options.threads : tbb::task_arena::automatic);
    EstimateResult result;
    arena.execute([&] { result = run_stages(scene, options); });
    return result;
}

void write_estimate(const EstimateResult& result, const std::filesystem::path& out_dir)
{
    std::filesystem::create_directories(out_dir);
    std::ofstream anchors(out_dir / "anchors.tsv");
    if (!anchors) {
        throw Error(ErrorKind::Io, "cannot write into " + out_dir.string());
    }
    anchors << "view\tanchors\tbad_anchors\n";
    for (std::size_t i = 0; i < result.maps.size(); ++i) {
        const HypothesisMap& map = result.maps[i];
        const std::string stem = stem_of(result.scene.views[i]);
        io::write_depth(out_dir / (stem + ".depth.dmap"), map.depth_map());
        io::write_normals(out_dir / (stem + ".normal.dmap"), map.normal_map());
        io::write_scalar(out_dir / (stem + ".cost.dmap"), map.photometric);
        const auto g = map.geometric.values();
        if (std::any_of(g.begin(), g.end(), [](double v) { return !std::isnan(v); })) {
            io::write_scalar(out_dir / (stem + ".geom.dmap"), map.geometric);
        }
        if (i < result.models.size()) {
            prior::write_triangulation(out_dir / (stem + ".prior.txt"), result.models[i]);
        }
        anchors << stem << '\t' << result.anchor_counts.at(i) << '\t' << result.bad_anchor_counts.at(i) << '\n';
    }
}

FusionResult fuse_directory(const std::filesystem::path& scene_dir, const std::filesystem::path& raster_dir,
                            const FusionThresholds& thresholds)
{
    Scene scene = io::load_scene(scene_dir);
    std::vector<DepthMap> depths;
    std::vector<Raster<Eigen::Vector3d>> normals;
    int raster_max = 0;
    for (const auto& view : scene.views) {
        const std::string stem = stem_of(view);
        depths.push_back(io::read_depth(raster_dir / (stem + ".depth.dmap")));
        normals.push_back(io::read_normals(raster_dir / (stem + ".normal.dmap")));
        raster_max = std::max({raster_max, depths.back().width(), depths.back().height()});
    }
    int scene_max = 0;
    for (const auto& view : scene.views) {
        scene_max = std::max({scene_max, view.camera.width, view.camera.height});
    }
    if (raster_max < scene_max) {
        scene = io::rescale_to_max_dim(scene, raster_max);
    }
    return fusion::fuse(scene, depths, normals, thresholds);
}

GroundTruth load_ground_truth(const Scene& scene, const std::filesystem::path& gt_dir)
{
    GroundTruth gt;
    for (const auto& view : scene.views) {
        const std::string stem = stem_of(view);
        gt.depth.push_back(io::read_depth(gt_dir / (stem + ".depth.dmap")));
        const auto region = gt_dir / (stem + ".region.dmap");
        gt.region.push_back(std::filesystem::exists(region) ? io::read_scalar(region) : Raster<double>());
    }
    return gt;
}

namespace {

struct PooledErrors {
    std::vector<double> rel;
    std::size_t total = 0;
    std::size_t bad = 0;
};

double median_of(std::vector<double> v)
{
    if (v.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

} // namespace

std::vector<AblationRow> ablate(const Scene& scene, const GroundTruth& gt, const EstimateOptions& base)
{
    std::vector<AblationRow> rows;
    const StageSet mpm_only{true, false, false, false};
    const StageSet full{};
    rows.push_back({"baseline", 0, mpm_only, AnchorGate::Geometric});
    rows.push_back({"mpm", -1, mpm_only, AnchorGate::Geometric});
    rows.push_back({"mpm+pp", -1, full, AnchorGate::Photometric});
    rows.push_back({"mpm+gp", -1, full, AnchorGate::Geometric});

    for (auto& row : rows) {
        EstimateOptions opts = base;
        if (row.smax >= 0) {
            opts.smax = row.smax;
        }
        opts.stages = row.stages;
        opts.anchor_gate = row.gate;
        opts.ground_truth = &gt.depth;
        const EstimateResult result = estimate(scene, opts);
        row.smax = result.smax;

        PooledErrors all;
        PooledErrors flat;
        for (std::size_t i = 0; i < result.maps.size(); ++i) {
            const DepthMap est = result.maps[i].depth_map();
            const DepthMap& truth = gt.depth[i];
            const Raster<double>& region = gt.region[i];
            for (int y = 0; y < truth.height(); ++y) {
                for (int x = 0; x < truth.width(); ++x) {
                    const auto d = truth.at(x, y);
                    if (!d) {
                        continue;
                    }
                    const auto e = est.at(x, y);
                    const double rel = e ? std::abs(*e - *d) / *d : std::numeric_limits<double>::infinity();
                    const bool is_bad = rel > 0.02;
                    all.total++;
                    all.bad += is_bad;
                    all.rel.push_back(rel);
                    if (!region.empty() && region(x, y) >= 0.0) {
                        flat.total++;
                        flat.bad += is_bad;
                    }
                }
            }
            row.anchors += result.anchor_counts[i];
            row.bad_anchors += result.bad_anchor_counts[i];
        }
        row.median_rel_err = median_of(std::move(all.rel));
        row.bad_fraction = all.total ? static_cast<double>(all.bad) / static_cast<double>(all.total) : 0.0;
        row.untextured_bad_fraction = flat.total ? static_cast<double>(flat.bad) / static_cast<double>(flat.total)
                                                 : std::numeric_limits<double>::quiet_NaN();
    }
    return rows;
}

std::string ablation_tsv(const std::vector<AblationRow>& rows)
{
    std::ostringstream out;
    out << "config\tsmax\tstages\tanchor_gate\tmedian_rel_err\tbad_fraction\tuntextured_bad_fraction\tanchors\t"
           "bad_anchors\n";
    out << std::setprecision(6);
    for (const auto& r : rows) {
        out << r.name << '\t' << r.smax << '\t' << r.stages.to_string() << '\t'
            << (r.gate == AnchorGate::Geometric ? "geometric" : "photometric") << '\t' << r.median_rel_err << '\t'
            << r.bad_fraction << '\t' << r.untextured_bad_fraction << '\t' << r.anchors << '\t' << r.bad_anchors
            << '\n';
    }
    return out.str();
}

} // namespace pipeline
} // namespace planemvs
