#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <set>
#include <vector>

#include <tbb/task_arena.h>

#include "fixtures.hpp"
#include "planemvs/error.hpp"
#include "planemvs/patchmatch.hpp"
#include "planemvs/synthetic.hpp"

using namespace planemvs;

namespace {

double median_rel_error(const HypothesisMap& map, const DepthMap& gt)
{
    std::vector<double> errs;
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            if (gt.is_valid(x, y)) {
                errs.push_back(std::abs(map.planes(x, y).depth - gt.raw(x, y)) / gt.raw(x, y));
            }
        }
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    return errs[errs.size() / 2];
}

bool same_planes(const HypothesisMap& a, const HypothesisMap& b, int only_color = -1)
{
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (only_color >= 0 && (x + y) % 2 != only_color) {
                continue;
            }
            const auto& p = a.planes(x, y);
            const auto& q = b.planes(x, y);
            if (p.depth != q.depth || p.normal != q.normal) {
                return false;
            }
        }
    }
    return true;
}

class RecordingObserver : public PropagationObserver {
public:
    void on_neighbor_read(int x, int y, int qx, int qy) override
    {
        ++reads;
        if ((x + y) % 2 == (qx + qy) % 2) {
            ++same_color_reads;
        }
    }
    void on_candidates_evaluated(int x, int y, int count) override
    {
        std::lock_guard lock(mutex);
        counts.push_back({x, y, count});
    }

    std::atomic<long> reads{0};
    std::atomic<long> same_color_reads{0};
    std::mutex mutex;
    std::vector<std::array<int, 3>> counts;
};

const RenderedScene& textured()
{
    static const RenderedScene scene = synth::render(synth::textured_plane_scene(), 1);
    return scene;
}

const RenderedScene& small_textured()
{
    static const RenderedScene scene = synth::render(fixtures::shrink(synth::textured_plane_scene(), 128, 96, 120), 1);
    return scene;
}

} // namespace

TEST_CASE("propagation stencil layout")
{
    const auto& st = PropagationStencil::standard();
    CHECK(st.total() == 88);
    std::set<std::pair<int, int>> all;
    for (int r = 0; r < PropagationStencil::kRegionCount; ++r) {
        const auto region = st.region(r);
        CHECK(region.size() == (r < 4 ? 10u : 12u));
        for (const auto& o : region) {
            CHECK((std::abs(o.dx) + std::abs(o.dy)) % 2 == 1);
            CHECK(std::max(std::abs(o.dx), std::abs(o.dy)) >= 2);
            all.insert({o.dx, o.dy});
        }
        if (r < 4) {
            std::vector<int> dist;
            for (const auto& o : region) {
                CHECK((o.dx == 0) != (o.dy == 0));
                dist.push_back(std::abs(o.dx) + std::abs(o.dy));
            }
            std::sort(dist.begin(), dist.end());
            CHECK(dist == std::vector<int>{5, 7, 9, 11, 13, 15, 17, 19, 21, 23});
        }
    }
    CHECK(all.size() == 88);
    // Region 4 carries the hand-listed diagonal pairs.
    std::set<std::pair<int, int>> diag;
    for (const auto& o : st.region(4)) {
        diag.insert({o.dx, o.dy});
    }
    std::set<std::pair<int, int>> expect;
    for (int k = 2; k <= 7; ++k) {
        expect.insert({k, -k - 1});
        expect.insert({k + 1, -k});
    }
    CHECK(diag == expect);
}

TEST_CASE("scale schedule runs three iterations per scale from coarse to fine")
{
    const ScaleSchedule s{2, 3};
    CHECK(s.total_iterations() == 9);
    CHECK(s.window_edges() == std::vector<int>{41, 41, 41, 21, 21, 21, 11, 11, 11});
    CHECK(ScaleSchedule{0, 3}.window_edges() == std::vector<int>{11, 11, 11});
    CHECK(ScaleSchedule{3, 3}.total_iterations() == 12);
}

TEST_CASE("window size selection from the working resolution")
{
    CHECK(patchmatch::select_smax(3200) == 2);
    CHECK(patchmatch::select_smax(2400) == 2);
    CHECK(patchmatch::select_smax(1600) == 1);
    CHECK(patchmatch::select_smax(1200) == 1);
    CHECK(patchmatch::select_smax(640) == 0);
    CHECK(patchmatch::select_smax(64) == 0);
    CHECK_THROWS_AS(patchmatch::select_smax(63), Error);
}

TEST_CASE("a matching problem needs sources and a valid range")
{
    const auto& r = small_textured();
    CHECK_THROWS_AS(MatchingProblem(r.scene.views[0], {}, r.scene.depth_range, 0), Error);
    CHECK_THROWS_AS(MatchingProblem(r.scene.views[0], {&r.scene.views[1]}, DepthRange{3.0, 1.0}, 0), Error);
    CHECK_THROWS_AS(MatchingProblem(r.scene.views[0], {&r.scene.views[1]}, DepthRange{0.0, 1.0}, 0), Error);
}

TEST_CASE("random initialisation is reproducible and respects its invariants")
{
    const auto& r = small_textured();
    const MatchingProblem problem(r.scene, 0);
    const HypothesisMap a = patchmatch::random_init(problem, SparseWindow(1), 42, 0.8);
    const HypothesisMap b = patchmatch::random_init(problem, SparseWindow(1), 42, 0.8);
    const HypothesisMap c = patchmatch::random_init(problem, SparseWindow(1), 43, 0.8);
    CHECK(a == b);
    CHECK(!(a == c));
    const auto range = r.scene.depth_range;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const auto& h = a.planes(x, y);
            CHECK_MESSAGE(h.depth >= range.min, x << "," << y);
            CHECK(h.depth <= range.max);
            CHECK(std::abs(h.normal.norm() - 1.0) < 1e-9);
            CHECK(h.normal.dot(geometry::pixel_ray(problem.ref().camera, {double(x), double(y)})) < 0.0);
            CHECK(a.cost(x, y) >= 0.0);
            CHECK(a.cost(x, y) <= 2.0);
        }
    }
}

TEST_CASE("initial depths are uniform over the range")
{
    // Same per-pixel generator keys as random_init, over a million pixels.
    const DepthRange range{2.0, 10.0};
    const Eigen::Vector3d ray(0.1, -0.2, 1.0);
    constexpr int kBins = 20;
    constexpr int kDraws = 1000000;
    std::array<long, kBins> hist{};
    for (int i = 0; i < kDraws; ++i) {
        PixelRng rng(0, 0, 0, static_cast<std::uint64_t>(i));
        const auto h = patchmatch::random_hypothesis(ray, range, rng);
        REQUIRE(h.normal.dot(ray) < 0.0);
        const int bin = std::min(kBins - 1, static_cast<int>((h.depth - range.min) / (range.max - range.min) * kBins));
        ++hist[static_cast<std::size_t>(bin)];
    }
    const double expected = double(kDraws) / kBins;
    double chi2 = 0.0;
    for (long n : hist) {
        chi2 += (n - expected) * (n - expected) / expected;
    }
    // 99th percentile of chi-square with 19 degrees of freedom.
    CHECK(chi2 < 36.19);
}

TEST_CASE("a map of the true plane is a fixed point of propagation")
{
    const auto rendered = synth::render(fixtures::shrink(synth::untextured_center_scene(), 128, 96, 120), 1);
    const MatchingProblem problem(rendered.scene, 0);
    HypothesisMap map(128, 96, 2);
    for (auto& h : map.planes.values()) {
        h = {Eigen::Vector3d(0, 0, -1), 5.0};
    }
    patchmatch::rescore(map, problem, SparseWindow(0), CostMode{});
    const HypothesisMap before = map;
    patchmatch::IterationParams params;
    params.refine = false;
    patchmatch::checkerboard_iteration(map, problem, 0, params);
    patchmatch::checkerboard_iteration(map, problem, 1, params);
    CHECK(same_planes(map, before));
}

TEST_CASE("a single correct hypothesis reaches the far end of the stencil in one iteration")
{
    const auto& r = textured();
    const MatchingProblem problem(r.scene, 0);
    HypothesisMap map = patchmatch::random_init(problem, SparseWindow(0), 9, 0.8);
    const int sx = 161;
    const int sy = 120;
    map.planes(sx, sy) = {r.truth[0].normals(sx, sy), r.truth[0].depth.raw(sx, sy)};
    map.cost(sx, sy) = 0.0;

    patchmatch::IterationParams params;
    params.refine = false;
    patchmatch::checkerboard_iteration(map, problem, 0, params);
    for (const auto& [x, y] : {std::pair{sx + 23, sy}, std::pair{sx - 23, sy}, std::pair{sx, sy + 23},
                               std::pair{sx, sy - 23}}) {
        const double gt = r.truth[0].depth.raw(x, y);
        CHECK_MESSAGE(std::abs(map.planes(x, y).depth - gt) / gt < 0.01, x << "," << y);
    }
}

TEST_CASE("interior pixels evaluate eight region winners plus the incumbent")
{
    const auto& r = textured();
    const MatchingProblem problem(r.scene, 0);
    HypothesisMap map = fixtures::truth_map(r.truth[0], 2);
    patchmatch::rescore(map, problem, SparseWindow(0), CostMode{});
    RecordingObserver obs;
    patchmatch::IterationParams params;
    params.refine = false;
    params.observer = &obs;
    patchmatch::checkerboard_iteration(map, problem, 1, params);
    long interior = 0;
    for (const auto& [x, y, n] : obs.counts) {
        CHECK((x + y) % 2 == 1);
        CHECK(n >= 1);
        CHECK(n <= 9);
        if (x >= 23 && y >= 23 && x < map.width() - 23 && y < map.height() - 23) {
            CHECK(n == 9);
            ++interior;
        }
    }
    CHECK(obs.counts.size() == 320u * 240u / 2u);
    CHECK(interior > 10000);
}

TEST_CASE("a sweep reads only the opposite colour and writes only its own")
{
    const auto& r = small_textured();
    const MatchingProblem problem(r.scene, 0);
    HypothesisMap map = patchmatch::random_init(problem, SparseWindow(0), 3, 0.8);
    for (int color : {0, 1}) {
        const HypothesisMap before = map;
        RecordingObserver obs;
        patchmatch::IterationParams params;
        params.observer = &obs;
        params.serial = 1 + color;
        patchmatch::checkerboard_iteration(map, problem, color, params);
        CHECK(obs.reads > 0);
        CHECK(obs.same_color_reads == 0);
        CHECK(same_planes(map, before, 1 - color));
        CHECK(!same_planes(map, before, color));
    }
    patchmatch::IterationParams params;
    CHECK_THROWS_AS(patchmatch::checkerboard_iteration(map, problem, 2, params), Error);
}

TEST_CASE("stored cost never increases at a fixed scale with one source view")
{
    const auto rendered = synth::render(synth::two_view_plane_scene(), 1);
    const MatchingProblem problem(rendered.scene, 0);
    HypothesisMap map = patchmatch::random_init(problem, SparseWindow(0), 5, 0.8);
    const ThresholdSchedule tau;
    for (int t = 0; t < 3; ++t) {
        const Raster<double> before = map.cost;
        patchmatch::IterationParams params;
        params.tau = tau(t);
        params.serial = 1 + t;
        params.refine_t = t;
        patchmatch::checkerboard_iteration(map, problem, 0, params);
        patchmatch::checkerboard_iteration(map, problem, 1, params);
        std::size_t worse = 0;
        for (std::size_t i = 0; i < before.size(); ++i) {
            worse += map.cost[i] > before[i] + 1e-12;
        }
        CHECK(worse == 0);
    }
}

TEST_CASE("refinement does not accept a worse hypothesis")
{
    const auto& r = textured();
    const MatchingProblem problem(r.scene, 0);
    const Eigen::Vector3d ray = geometry::pixel_ray(problem.ref().camera, {100, 100});
    // A convex objective minimised by the incumbent.
    const PlaneHypothesis optimum{Eigen::Vector3d(0, 0, -1), 5.0};
    auto objective = [&](const PlaneHypothesis& h) {
        Score s;
        s.objective = std::abs(h.depth - 5.0) + (h.normal - optimum.normal).norm();
        s.photometric = s.objective;
        return s;
    };
    for (int trial = 0; trial < 200; ++trial) {
        PlaneHypothesis plane = optimum;
        Score score = objective(plane);
        PixelRng rng(1, 2, 3, static_cast<std::uint64_t>(trial));
        CHECK(!patchmatch::refine(plane, score, ray, problem.depth_range(), rng, trial % 6, objective));
        CHECK(plane.depth == 5.0);

        PlaneHypothesis worse{Eigen::Vector3d(0.3, 0, -1).normalized(), 8.0};
        Score worse_score = objective(worse);
        const double before = worse_score.objective;
        patchmatch::refine(worse, worse_score, ray, problem.depth_range(), rng, trial % 6, objective);
        CHECK(worse_score.objective <= before);
    }
}

TEST_CASE("refinement lowers the depth error of a single-scale run")
{
    const auto rendered = synth::render(synth::two_view_plane_scene(), 1);
    const MatchingProblem problem(rendered.scene, 0);
    patchmatch::MpmOptions with;
    with.schedule = {0, 3};
    with.seed = 4;
    patchmatch::MpmOptions without = with;
    without.refine = false;
    const double err_with = median_rel_error(patchmatch::run_mpm(problem, with), rendered.truth[0].depth);
    const double err_without = median_rel_error(patchmatch::run_mpm(problem, without), rendered.truth[0].depth);
    MESSAGE("median relative error with refine " << err_with << ", without " << err_without);
    CHECK(err_with < err_without);
}

TEST_CASE("the multi-scale run logs its window and threshold schedule")
{
    const auto rendered = synth::render(fixtures::shrink(synth::textured_plane_scene(), 96, 72, 90), 1);
    const MatchingProblem problem(rendered.scene, 0);
    std::vector<patchmatch::IterationRecord> log;
    patchmatch::MpmOptions opts;
    opts.schedule = {2, 3};
    opts.log = &log;
    patchmatch::run_mpm(problem, opts);
    REQUIRE(log.size() == 9);
    const int edges[] = {41, 41, 41, 21, 21, 21, 11, 11, 11};
    for (std::size_t i = 0; i < log.size(); ++i) {
        CHECK(log[i].window_edge == edges[i]);
        CHECK(log[i].scale == 2 - static_cast<int>(i) / 3);
        CHECK(log[i].t == static_cast<int>(i) % 3);
        CHECK(log[i].tau == doctest::Approx(0.8 * std::exp(-(log[i].t * log[i].t) / 90.0)));
    }
}

TEST_CASE("a zero geometric weight reproduces the photometric passes")
{
    const auto& r = small_textured();
    const MatchingProblem problem(r.scene, 0);
    patchmatch::MpmOptions mpm;
    mpm.schedule = {0, 1};
    HypothesisMap photometric = patchmatch::run_mpm(problem, mpm);
    HypothesisMap geometric = photometric;

    patchmatch::PassOptions pass;
    pass.iterations = 2;
    patchmatch::run_passes(photometric, problem, CostMode{}, pass);

    GeometricTerm term;
    term.eta = 0.0;
    term.source_depths = {&r.truth[1].depth, &r.truth[2].depth};
    patchmatch::run_geometric_pass(geometric, problem, term, pass);

    CHECK(same_planes(photometric, geometric));
    CHECK(photometric.cost == geometric.cost);
    CHECK(photometric.photometric == geometric.photometric);
}

TEST_CASE("geometric consistency of a consistent map is zero")
{
    const auto& r = textured();
    const MatchingProblem problem(r.scene, 0);
    const HypothesisMap map = fixtures::truth_map(r.truth[0], 2);
    GeometricTerm term;
    term.source_depths = {&r.truth[1].depth, &r.truth[2].depth};
    const Raster<double> mg = patchmatch::geometric_costs(map, problem, term);
    double worst = 0.0;
    for (int y = 10; y < 230; ++y) {
        for (int x = 45; x < 275; ++x) {
            worst = std::max(worst, mg(x, y));
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("geometric iterations remove injected speckle")
{
    const auto rendered = synth::render(fixtures::shrink(synth::textured_plane_scene(), 160, 120, 150), 1);
    const MatchingProblem problem(rendered.scene, 0);
    const auto& gt = rendered.truth[0].depth;
    HypothesisMap map = fixtures::truth_map(rendered.truth[0], 2);
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            if ((7 * x + 13 * y) % 11 == 0) {
                map.planes(x, y).depth = gt.raw(x, y) * 1.4;
            }
        }
    }
    GeometricTerm term;
    term.source_depths = {&rendered.truth[1].depth, &rendered.truth[2].depth};
    const auto all = [](int, int) { return true; };
    const std::size_t before = fixtures::count_bad(map, gt, 0.05, all);
    patchmatch::PassOptions pass;
    pass.iterations = 2;
    patchmatch::run_geometric_pass(map, problem, term, pass);
    const std::size_t after = fixtures::count_bad(map, gt, 0.05, all);
    MESSAGE("outliers before " << before << ", after " << after);
    CHECK(before > 1000);
    CHECK(after < before);
}

TEST_CASE("results do not depend on the number of worker threads")
{
    const auto& r = small_textured();
    const MatchingProblem problem(r.scene, 1);
    patchmatch::MpmOptions opts;
    opts.schedule = {1, 3};
    opts.seed = 17;
    HypothesisMap one;
    HypothesisMap many;
    tbb::task_arena(1).execute([&] { one = patchmatch::run_mpm(problem, opts); });
    tbb::task_arena(4).execute([&] { many = patchmatch::run_mpm(problem, opts); });
    CHECK(one == many);
}
