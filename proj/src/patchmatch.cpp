#include "planemvs/patchmatch.hpp"

#include <algorithm>
#include <limits>

#include "parallel.hpp"
#include "planemvs/error.hpp"
#include "planemvs/planar_prior.hpp"

namespace planemvs {

// --- stencil -----------------------------------------------------------------

PropagationStencil::PropagationStencil()
{
    for (int d = 5; d <= 23; d += 2) {
        regions_[0].push_back({0, -d});
        regions_[1].push_back({0, d});
        regions_[2].push_back({-d, 0});
        regions_[3].push_back({d, 0});
    }
    // Up-right quadrant, then successive 90 degree rotations (dx, dy) -> (-dy, dx).
    for (int k = 2; k <= 7; ++k) {
        regions_[4].push_back({k, -k - 1});
        regions_[4].push_back({k + 1, -k});
    }
    for (int r = 5; r < kRegionCount; ++r) {
        for (const auto& o : regions_[static_cast<std::size_t>(r - 1)]) {
            regions_[static_cast<std::size_t>(r)].push_back({-o.dy, o.dx});
        }
    }
}

const PropagationStencil& PropagationStencil::standard()
{
    static const PropagationStencil stencil;
    return stencil;
}

std::size_t PropagationStencil::total() const
{
    std::size_t n = 0;
    for (const auto& r : regions_) {
        n += r.size();
    }
    return n;
}

std::vector<int> ScaleSchedule::window_edges() const
{
    std::vector<int> edges;
    for (int s = max_scale; s >= 0; --s) {
        for (int t = 0; t < iterations_per_scale; ++t) {
            edges.push_back(SparseWindow(s).edge());
        }
    }
    return edges;
}

// --- hypothesis map ----------------------------------------------------------

HypothesisMap::HypothesisMap(int width, int height, int source_count)
    : planes(width, height), cost(width, height, kWorstCost), photometric(width, height, kWorstCost),
      geometric(width, height, std::numeric_limits<double>::quiet_NaN()), source_count_(source_count),
      weights_(static_cast<std::size_t>(width) * height * source_count, 1.0)
{
}

DepthMap HypothesisMap::depth_map() const
{
    DepthMap depth(width(), height());
    for (int y = 0; y < height(); ++y) {
        for (int x = 0; x < width(); ++x) {
            depth.set(x, y, planes(x, y).depth);
        }
    }
    return depth;
}

Raster<Eigen::Vector3d> HypothesisMap::normal_map() const
{
    Raster<Eigen::Vector3d> normals(width(), height());
    for (std::size_t i = 0; i < normals.size(); ++i) {
        normals[i] = planes[i].normal;
    }
    return normals;
}

bool HypothesisMap::operator==(const HypothesisMap& other) const
{
    const auto same_bits = [](const Raster<double>& a, const Raster<double>& b) {
        if (a.width() != b.width() || a.height() != b.height()) {
            return false;
        }
        return std::equal(a.values().begin(), a.values().end(), b.values().begin(), [](double u, double v) {
            return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v);
        });
    };
    if (source_count_ != other.source_count_ || planes.width() != other.planes.width() ||
        planes.height() != other.planes.height()) {
        return false;
    }
    for (std::size_t i = 0; i < planes.size(); ++i) {
        if (planes[i].depth != other.planes[i].depth || planes[i].normal != other.planes[i].normal) {
            return false;
        }
    }
    return same_bits(cost, other.cost) && same_bits(photometric, other.photometric) &&
           same_bits(geometric, other.geometric) && weights_ == other.weights_;
}

// --- problem -----------------------------------------------------------------

MatchingProblem::MatchingProblem(const View& ref, std::vector<const View*> sources, DepthRange range,
                                 std::uint64_t stream_id)
    : ref_(&ref), sources_(std::move(sources)), range_(range), stream_id_(stream_id)
{
    if (sources_.empty()) {
        throw Error(ErrorKind::InvalidArgument, "a matching problem needs at least one source view");
    }
    if (!(range.min > 0.0 && range.min < range.max)) {
        throw Error(ErrorKind::InvalidArgument, "depth range must satisfy 0 < min < max");
    }
    pairs_.reserve(sources_.size());
    for (const View* src : sources_) {
        pairs_.emplace_back(ref.camera, src->camera);
    }
}

namespace {
std::vector<const View*> others(const Scene& scene, std::size_t ref_index)
{
    std::vector<const View*> out;
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
        if (i != ref_index) {
            out.push_back(&scene.views[i]);
        }
    }
    return out;
}
} // namespace

MatchingProblem::MatchingProblem(const Scene& scene, std::size_t ref_index)
    : MatchingProblem(scene.views.at(ref_index), others(scene, ref_index), scene.depth_range, ref_index)
{
}

// --- rng -----------------------------------------------------------------------

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z)
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
} // namespace

PixelRng::PixelRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t serial, std::uint64_t pixel)
{
    std::uint64_t h = mix64(seed + kGolden);
    h = mix64(h ^ (stream + 2 * kGolden));
    h = mix64(h ^ (serial + 3 * kGolden));
    h = mix64(h ^ (pixel + 4 * kGolden));
    state_ = h;
}

std::uint64_t PixelRng::next() noexcept
{
    state_ += kGolden;
    return mix64(state_);
}

namespace patchmatch {

PlaneHypothesis random_hypothesis(const Eigen::Vector3d& ray, DepthRange range, PixelRng& rng)
{
    PlaneHypothesis plane;
    plane.depth = rng.uniform(range.min, range.max);
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Eigen::Vector3d n(r * std::cos(phi), r * std::sin(phi), z);
    const double facing = n.dot(ray);
    if (facing > 0.0) {
        n = -n;
    } else if (facing == 0.0) {
        n = -ray.normalized();
    }
    plane.normal = n;
    return plane;
}

PlaneHypothesis perturb_hypothesis(const PlaneHypothesis& plane, const Eigen::Vector3d& ray, DepthRange range,
                                   PixelRng& rng, int t)
{
    const double scale = std::ldexp(1.0, -t);
    const double depth_span = 0.5 * scale;
    const double cone = (30.0 * std::numbers::pi / 180.0) * scale;

    PlaneHypothesis out = plane;
    out.depth = std::clamp(plane.depth * rng.uniform(1.0 - depth_span, 1.0 + depth_span), range.min, range.max);

    const Eigen::Vector3d& n = plane.normal;
    const Eigen::Vector3d helper = std::abs(n.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
    const Eigen::Vector3d u = n.cross(helper).normalized();
    const Eigen::Vector3d v = n.cross(u);
    const double cos_a = rng.uniform(std::cos(cone), 1.0);
    const double sin_a = std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Vector3d rotated =
        (cos_a * n + sin_a * (std::cos(phi) * u + std::sin(phi) * v)).normalized();
    if (geometry::faces_camera(rotated, ray)) {
        out.normal = rotated;
    }
    return out;
}

namespace {

constexpr std::uint64_t kInitSerial = 0;

/// Scores plane hypotheses at one pixel. Keeps the per-view terms of the last
/// evaluation so the objective can be re-weighted without re-sampling.
class PixelEvaluator {
public:
    PixelEvaluator(const MatchingProblem& problem, const SparseWindow& window, const CostMode& mode, int x, int y)
        : problem_(problem), window_(window), mode_(mode), x_(x), y_(y),
          ray_(geometry::pixel_ray(problem.ref().camera, Eigen::Vector2d(x, y))),
          patch_(cost::sample_reference(problem.ref().image, x, y, window)), costs_(problem.source_count()),
          errors_(mode.geometric ? problem.source_count() : 0)
    {
        if (mode.prior && mode.prior->prior_depth) {
            const double d = (*mode.prior->prior_depth)(x, y);
            if (!std::isnan(d)) {
                prior_ = d;
            }
        }
    }

    const Eigen::Vector3d& ray() const noexcept { return ray_; }

    Score evaluate(const PlaneHypothesis& plane, std::span<const double> weights)
    {
        const Eigen::Vector2d p(x_, y_);
        for (std::size_t j = 0; j < costs_.size(); ++j) {
            if (patch_.degenerate) {
                costs_[j] = kWorstCost;
                continue;
            }
            const auto h = problem_.pair(j).try_homography(p, plane);
            costs_[j] = h ? cost::patch_cost(patch_, problem_.source(j).image, *h, x_, y_, window_) : kWorstCost;
        }
        for (std::size_t j = 0; j < errors_.size(); ++j) {
            errors_[j] = problem_.pair(j).forward_backward_error(p, plane.depth, *mode_.geometric->source_depths[j]);
        }
        return combine(costs_, errors_, plane.depth, weights);
    }

    Score combine(std::span<const double> costs, std::span<const double> errors, double depth,
                  std::span<const double> weights) const
    {
        Score s;
        s.photometric = cost::aggregate(costs, weights);
        s.objective = s.photometric;
        if (mode_.prior) {
            s.objective = prior::prior_assisted_cost(s.photometric, depth, prior_, mode_.prior->lambda,
                                                     mode_.prior->sigma);
        }
        if (mode_.geometric) {
            s.geometric = cost::geometric_cost(errors, weights);
            s.objective += mode_.geometric->eta * s.geometric;
        }
        return s;
    }

    std::span<const double> costs() const noexcept { return costs_; }
    std::span<const double> errors() const noexcept { return errors_; }

private:
    const MatchingProblem& problem_;
    const SparseWindow& window_;
    const CostMode& mode_;
    int x_;
    int y_;
    Eigen::Vector3d ray_;
    cost::ReferencePatch patch_;
    std::optional<double> prior_;
    std::vector<double> costs_;
    std::vector<double> errors_;
};

void check_mode(const MatchingProblem& problem, const CostMode& mode)
{
    if (mode.geometric && mode.geometric->source_depths.size() != problem.source_count()) {
        throw Error(ErrorKind::InvalidArgument, "geometric term needs one depth map per source view");
    }
    if (mode.prior && !mode.prior->prior_depth) {
        throw Error(ErrorKind::InvalidArgument, "prior term needs a prior depth raster");
    }
}

void check_map(const HypothesisMap& map, const MatchingProblem& problem)
{
    if (map.width() != problem.ref().image.width() || map.height() != problem.ref().image.height() ||
        static_cast<std::size_t>(map.source_count()) != problem.source_count()) {
        throw Error(ErrorKind::InvalidArgument, "hypothesis map does not match the matching problem");
    }
}

bool in_range(double depth, DepthRange range)
{
    return depth >= range.min && depth <= range.max;
}

void store(HypothesisMap& map, int x, int y, const PlaneHypothesis& plane, const Score& score)
{
    map.planes(x, y) = plane;
    map.cost(x, y) = score.objective;
    map.photometric(x, y) = score.photometric;
    map.geometric(x, y) = score.geometric;
}

void update_pixel(HypothesisMap& map, const MatchingProblem& problem, int x, int y, const IterationParams& params)
{
    const auto& stencil = PropagationStencil::standard();
    const DepthRange range = problem.depth_range();
    const std::size_t pixel = map.planes.index(x, y);
    PixelRng rng(params.seed, problem.stream_id(), params.serial, pixel);
    PixelEvaluator eval(problem, params.window, params.mode, x, y);

    const auto stored_weights = map.weights(x, y);
    std::vector<double> weights(stored_weights.begin(), stored_weights.end());

    PlaneHypothesis best_plane = map.planes(x, y);
    Score best = eval.evaluate(best_plane, weights);
    std::vector<double> best_costs(eval.costs().begin(), eval.costs().end());
    std::vector<double> best_errors(eval.errors().begin(), eval.errors().end());
    int evaluated = 1;

    const Eigen::Vector2d p(x, y);
    for (int r = 0; r < PropagationStencil::kRegionCount; ++r) {
        int qx = -1;
        int qy = -1;
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& o : stencil.region(r)) {
            const int sx = x + o.dx;
            const int sy = y + o.dy;
            if (!map.planes.contains(sx, sy)) {
                continue;
            }
            if (params.observer) {
                params.observer->on_neighbor_read(x, y, sx, sy);
            }
            if (map.cost(sx, sy) < lowest) {
                lowest = map.cost(sx, sy);
                qx = sx;
                qy = sy;
            }
        }
        if (qx < 0) {
            continue;
        }
        const PlaneHypothesis& neighbor = map.planes(qx, qy);
        const auto depth = geometry::ray_plane_depth(problem.ref().camera, p, neighbor, Eigen::Vector2d(qx, qy));
        if (!depth || !in_range(*depth, range) || !geometry::faces_camera(neighbor.normal, eval.ray())) {
            continue;
        }
        const PlaneHypothesis candidate{neighbor.normal, *depth};
        const Score s = eval.evaluate(candidate, weights);
        ++evaluated;
        if (s.objective < best.objective) {
            best = s;
            best_plane = candidate;
            best_costs.assign(eval.costs().begin(), eval.costs().end());
            best_errors.assign(eval.errors().begin(), eval.errors().end());
        }
    }
    if (params.observer) {
        params.observer->on_candidates_evaluated(x, y, evaluated);
    }

    cost::update_view_weights(best_costs, params.tau, weights);
    best = eval.combine(best_costs, best_errors, best_plane.depth, weights);

    if (params.refine) {
        refine(best_plane, best, eval.ray(), range, rng, params.refine_t,
               [&](const PlaneHypothesis& h) { return eval.evaluate(h, weights); });
    }

    store(map, x, y, best_plane, best);
    std::copy(weights.begin(), weights.end(), stored_weights.begin());
}

} // namespace

HypothesisMap random_init(const MatchingProblem& problem, const SparseWindow& window, std::uint64_t seed, double tau)
{
    const auto& ref = problem.ref();
    HypothesisMap map(ref.image.width(), ref.image.height(), static_cast<int>(problem.source_count()));
    const CostMode photometric;
    detail::for_each_row(map.height(), [&](int y) {
        for (int x = 0; x < map.width(); ++x) {
            PixelRng rng(seed, problem.stream_id(), kInitSerial, map.planes.index(x, y));
            PixelEvaluator eval(problem, window, photometric, x, y);
            const PlaneHypothesis plane = random_hypothesis(eval.ray(), problem.depth_range(), rng);
            const auto weights = map.weights(x, y);
            eval.evaluate(plane, weights);
            cost::update_view_weights(eval.costs(), tau, weights);
            store(map, x, y, plane, eval.combine(eval.costs(), eval.errors(), plane.depth, weights));
        }
    });
    return map;
}

void rescore(HypothesisMap& map, const MatchingProblem& problem, const SparseWindow& window, const CostMode& mode)
{
    check_map(map, problem);
    check_mode(problem, mode);
    detail::for_each_row(map.height(), [&](int y) {
        for (int x = 0; x < map.width(); ++x) {
            PixelEvaluator eval(problem, window, mode, x, y);
            const PlaneHypothesis plane = map.planes(x, y);
            store(map, x, y, plane, eval.evaluate(plane, map.weights(x, y)));
        }
    });
}

void checkerboard_iteration(HypothesisMap& map, const MatchingProblem& problem, int color,
                            const IterationParams& params)
{
    if (color != 0 && color != 1) {
        throw Error(ErrorKind::InvalidArgument, "checkerboard colour must be 0 or 1");
    }
    check_map(map, problem);
    check_mode(problem, params.mode);
    detail::for_each_row(map.height(), [&](int y) {
        for (int x = (y + color) % 2; x < map.width(); x += 2) {
            update_pixel(map, problem, x, y, params);
        }
    });
}

HypothesisMap run_mpm(const MatchingProblem& problem, const MpmOptions& options)
{
    const ScaleSchedule& schedule = options.schedule;
    if (schedule.max_scale < 0 || schedule.iterations_per_scale < 1) {
        throw Error(ErrorKind::InvalidArgument, "invalid scale schedule");
    }
    HypothesisMap map =
        random_init(problem, SparseWindow(schedule.max_scale), options.seed, options.thresholds(0));

    std::uint64_t serial = kInitSerial + 1;
    for (int s = schedule.max_scale; s >= 0; --s) {
        const SparseWindow window(s);
        if (s != schedule.max_scale) {
            rescore(map, problem, window, CostMode{});
        }
        for (int t = 0; t < schedule.iterations_per_scale; ++t) {
            IterationParams params;
            params.window = window;
            params.tau = options.thresholds(t);
            params.seed = options.seed;
            params.serial = serial++;
            params.refine_t = t;
            params.refine = options.refine;
            params.observer = options.observer;
            if (options.log) {
                options.log->push_back({s, t, window.edge(), params.tau});
            }
            checkerboard_iteration(map, problem, 0, params);
            checkerboard_iteration(map, problem, 1, params);
        }
    }
    return map;
}

void run_passes(HypothesisMap& map, const MatchingProblem& problem, const CostMode& mode, const PassOptions& options)
{
    const SparseWindow window(0);
    rescore(map, problem, window, mode);
    for (int k = 0; k < options.iterations; ++k) {
        IterationParams params;
        params.window = window;
        params.tau = options.tau;
        params.mode = mode;
        params.seed = options.seed;
        params.serial = options.serial_base + static_cast<std::uint64_t>(k);
        params.refine_t = options.refine_t_base + k;
        params.refine = options.refine;
        params.observer = options.observer;
        checkerboard_iteration(map, problem, 0, params);
        checkerboard_iteration(map, problem, 1, params);
    }
}

void run_geometric_pass(HypothesisMap& map, const MatchingProblem& problem, const GeometricTerm& term,
                        const PassOptions& options)
{
    CostMode mode;
    mode.geometric = &term;
    run_passes(map, problem, mode, options);
}

Raster<double> geometric_costs(const HypothesisMap& map, const MatchingProblem& problem, const GeometricTerm& term)
{
    check_map(map, problem);
    if (term.source_depths.size() != problem.source_count()) {
        throw Error(ErrorKind::InvalidArgument, "geometric term needs one depth map per source view");
    }
    Raster<double> out(map.width(), map.height());
    detail::for_each_row(map.height(), [&](int y) {
        std::vector<double> errors(problem.source_count());
        for (int x = 0; x < map.width(); ++x) {
            for (std::size_t j = 0; j < errors.size(); ++j) {
                errors[j] = problem.pair(j).forward_backward_error(Eigen::Vector2d(x, y), map.planes(x, y).depth,
                                                                   *term.source_depths[j]);
            }
            out(x, y) = cost::geometric_cost(errors, map.weights(x, y));
        }
    });
    return out;
}

int select_smax(int max_dim)
{
    if (max_dim < 64) {
        throw Error(ErrorKind::InvalidArgument, "image dimension must be at least 64");
    }
    if (max_dim >= 2400) {
        return 2;
    }
    if (max_dim >= 1200) {
        return 1;
    }
    return 0;
}

} // namespace patchmatch
} // namespace planemvs
