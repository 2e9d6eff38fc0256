#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "planemvs/error.hpp"
#include "planemvs/fusion.hpp"
#include "planemvs/pipeline.hpp"
#include "planemvs/scene_io.hpp"
#include "planemvs/synthetic.hpp"
#include "planemvs/visualize.hpp"

namespace {

using namespace planemvs;

struct EstimateFlags {
    int max_dim = 3200;
    std::string smax = "auto";
    std::uint64_t seed = 0;
    double tau0 = 0.8;
    double alpha = 90.0;
    double eta = 0.2;
    double lambda_prior = 0.3;
    double sigma_prior = 0.05;
    int cell = 25;
    std::string stages = "mpm,geom,prior,final";
    std::string anchor_gate = "geometric";
    std::string threads = "auto";

    void attach(CLI::App& cmd)
    {
        cmd.add_option("--max-dim", max_dim, "Downsample so the larger image side is at most this")
            ->capture_default_str();
        cmd.add_option("--smax", smax, "Largest window scale: auto or 0..3")->capture_default_str();
        cmd.add_option("--seed", seed, "Random seed")->capture_default_str();
        cmd.add_option("--tau0", tau0, "Initial view-selection threshold")->capture_default_str();
        cmd.add_option("--alpha", alpha, "Threshold decay constant")->capture_default_str();
        cmd.add_option("--eta", eta, "Geometric consistency weight")->capture_default_str();
        cmd.add_option("--lambda-prior", lambda_prior, "Planar prior penalty weight")->capture_default_str();
        cmd.add_option("--sigma-prior", sigma_prior, "Planar prior relative-depth scale")->capture_default_str();
        cmd.add_option("--cell", cell, "Anchor selection cell size in pixels")->capture_default_str();
        cmd.add_option("--stages", stages, "Comma-separated subset of mpm,geom,prior,final")->capture_default_str();
        cmd.add_option("--anchor-gate", anchor_gate, "photometric or geometric")
            ->check(CLI::IsMember({"photometric", "geometric"}))
            ->capture_default_str();
        cmd.add_option("--threads", threads, "Worker threads: n or auto")->capture_default_str();
    }

    EstimateOptions options() const
    {
        EstimateOptions o;
        o.max_dim = max_dim;
        if (smax != "auto") {
            o.smax = parse_int(smax, "--smax");
        }
        o.seed = seed;
        o.thresholds.tau0 = tau0;
        o.thresholds.alpha = alpha;
        o.eta = eta;
        o.lambda_prior = lambda_prior;
        o.sigma_prior = sigma_prior;
        o.cell = cell;
        o.stages = StageSet::parse(stages);
        o.anchor_gate = anchor_gate == "photometric" ? AnchorGate::Photometric : AnchorGate::Geometric;
        o.threads = threads == "auto" ? 0 : parse_int(threads, "--threads");
        if (threads != "auto" && o.threads < 1) {
            throw Error(ErrorKind::InvalidArgument, "--threads must be a positive integer or auto");
        }
        return o;
    }

    static int parse_int(const std::string& text, const char* flag)
    {
        try {
            std::size_t used = 0;
            const int v = std::stoi(text, &used);
            if (used == text.size()) {
                return v;
            }
        } catch (const std::exception&) {
        }
        throw Error(ErrorKind::InvalidArgument, std::string(flag) + " expects an integer, got '" + text + "'");
    }
};

SyntheticScene scene_spec(const std::string& name)
{
    if (name == "textured") {
        return synth::textured_plane_scene();
    }
    if (name == "untextured-center") {
        return synth::untextured_center_scene();
    }
    if (name == "two-view") {
        return synth::two_view_plane_scene();
    }
    return synth::load_scene_spec(name);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Multi-view stereo depth estimation with multi-scale PatchMatch and planar priors"};
    app.require_subcommand(1);

    EstimateFlags est_flags;
    std::string scene_dir;
    std::string out_dir;
    std::string gt_dir;
    auto* estimate = app.add_subcommand("estimate", "Estimate depth, normal and cost rasters for every view");
    estimate->add_option("scene_dir", scene_dir, "Scene directory")->required();
    estimate->add_option("out_dir", out_dir, "Output directory")->required();
    estimate->add_option("--gt", gt_dir, "Ground-truth directory for counting bad anchors");
    est_flags.attach(*estimate);

    std::string raster_dir;
    std::string ply_path;
    FusionThresholds fuse_thresholds;
    auto* fuse = app.add_subcommand("fuse", "Fuse estimated rasters into a PLY point cloud");
    fuse->add_option("scene_dir", scene_dir, "Scene directory")->required();
    fuse->add_option("raster_dir", raster_dir, "Directory written by estimate")->required();
    fuse->add_option("out_ply", ply_path, "Output .ply")->required();
    fuse->add_option("--max-reproj", fuse_thresholds.max_reprojection_px, "Reprojection error limit in pixels")
        ->capture_default_str();
    fuse->add_option("--max-rel-depth", fuse_thresholds.max_relative_depth, "Relative depth difference limit")
        ->capture_default_str();
    fuse->add_option("--max-angle", fuse_thresholds.max_normal_angle_deg, "Normal angle limit in degrees")
        ->capture_default_str();
    fuse->add_option("--min-support", fuse_thresholds.min_support, "Views needed per point")->capture_default_str();

    std::string raster_path;
    std::string png_path;
    std::vector<double> range;
    auto* render = app.add_subcommand("render-depth", "Colormap a depth raster into a PNG");
    render->add_option("raster", raster_path, "Depth .dmap")->required();
    render->add_option("out_png", png_path, "Output .png")->required();
    render->add_option("--range", range, "Fixed depth range lo hi instead of the 2-98 percentiles")
        ->expected(2);

    std::string spec;
    std::uint64_t synth_seed = 0;
    auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic scene with ground truth");
    synth_cmd->add_option("spec", spec, "Scene JSON, or a preset: textured, untextured-center, two-view")
        ->required();
    synth_cmd->add_option("out_dir", out_dir, "Output scene directory")->required();
    synth_cmd->add_option("--seed", synth_seed, "Texture seed")->capture_default_str();

    EstimateFlags ablate_flags;
    std::string report_path;
    auto* ablate = app.add_subcommand("ablate", "Run the ablation configurations and print a TSV report");
    ablate->add_option("scene_dir", scene_dir, "Scene directory")->required();
    ablate->add_option("gt_dir", gt_dir, "Ground-truth directory")->required();
    ablate->add_option("--out", report_path, "Also write the report here");
    ablate_flags.attach(*ablate);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*estimate) {
            EstimateOptions opts = est_flags.options();
            const Scene scene = io::load_scene(scene_dir);
            pipeline::GroundTruth gt;
            if (!gt_dir.empty()) {
                gt = pipeline::load_ground_truth(scene, gt_dir);
                opts.ground_truth = &gt.depth;
            }
            const EstimateResult result = pipeline::estimate(scene, opts);
            pipeline::write_estimate(result, out_dir);
            std::size_t anchors = 0;
            std::size_t bad = 0;
            for (std::size_t i = 0; i < result.anchor_counts.size(); ++i) {
                anchors += result.anchor_counts[i];
                bad += result.bad_anchor_counts[i];
            }
            std::cout << "views " << result.maps.size() << " smax " << result.smax << " stages "
                      << opts.stages.to_string() << " anchors " << anchors;
            if (opts.ground_truth) {
                std::cout << " bad_anchors " << bad;
            }
            std::cout << '\n';
        } else if (*fuse) {
            const FusionResult fused = pipeline::fuse_directory(scene_dir, raster_dir, fuse_thresholds);
            fusion::write_ply(ply_path, fused.points);
            std::cout << "points " << fused.points.size() << '\n';
        } else if (*render) {
            const DepthMap depth = io::read_depth(raster_path);
            std::optional<viz::ValueRange> fixed;
            if (range.size() == 2) {
                fixed = viz::ValueRange{range[0], range[1]};
            }
            viz::write_png(png_path, viz::colorize_depth(depth, fixed));
        } else if (*synth_cmd) {
            synth::write_rendered(synth::render(scene_spec(spec), synth_seed), out_dir);
        } else if (*ablate) {
            const EstimateOptions opts = ablate_flags.options();
            const Scene scene = io::load_scene(scene_dir);
            const auto gt = pipeline::load_ground_truth(io::rescale_to_max_dim(scene, opts.max_dim), gt_dir);
            const std::string report = pipeline::ablation_tsv(pipeline::ablate(scene, gt, opts));
            std::cout << report;
            if (!report_path.empty()) {
                std::ofstream out(report_path);
                out << report;
                if (!out) {
                    throw Error(ErrorKind::Io, "cannot write " + report_path);
                }
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
