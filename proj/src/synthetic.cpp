#include "planemvs/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "parallel.hpp"
#include "planemvs/error.hpp"
#include "planemvs/geometry.hpp"

namespace planemvs::synth {

namespace {

std::uint64_t hash64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double lattice(std::int64_t i, std::int64_t j, std::uint64_t seed)
{
    std::uint64_t h = hash64(seed);
    h = hash64(h ^ static_cast<std::uint64_t>(i));
    h = hash64(h ^ static_cast<std::uint64_t>(j));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double quintic(double t)
{
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
}

double value_noise(double u, double v, std::uint64_t seed)
{
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const auto i = static_cast<std::int64_t>(fu);
    const auto j = static_cast<std::int64_t>(fv);
    const double su = quintic(u - fu);
    const double sv = quintic(v - fv);
    const double a = lattice(i, j, seed);
    const double b = lattice(i + 1, j, seed);
    const double c = lattice(i, j + 1, seed);
    const double d = lattice(i + 1, j + 1, seed);
    const double top = a + su * (b - a);
    const double bottom = c + su * (d - c);
    return top + sv * (bottom - top);
}

Eigen::Vector3d orthogonal_u(const SyntheticPlane& plane)
{
    const Eigen::Vector3d n = plane.normal.normalized();
    Eigen::Vector3d u = plane.u_axis - plane.u_axis.dot(n) * n;
    if (u.norm() < 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "plane u_axis is parallel to its normal");
    }
    return u.normalized();
}

} // namespace

double sample_texture(const TextureSpec& texture, double u, double v, std::uint64_t salt)
{
    switch (texture.kind) {
    case TextureKind::Flat:
        return texture.intensity;
    case TextureKind::Checker: {
        const auto a = static_cast<std::int64_t>(std::floor(2.0 * u / texture.period));
        const auto b = static_cast<std::int64_t>(std::floor(2.0 * v / texture.period));
        return ((a + b) & 1) == 0 ? texture.low : texture.high;
    }
    case TextureKind::Noise:
    default: {
        const std::uint64_t seed = hash64(texture.seed) ^ salt;
        double sum = 0.0;
        double norm = 0.0;
        double amp = 1.0;
        double freq = 1.0 / texture.cell;
        for (int o = 0; o < std::max(texture.octaves, 1); ++o) {
            sum += amp * value_noise(u * freq, v * freq, seed + static_cast<std::uint64_t>(o));
            norm += amp;
            amp *= 0.5;
            freq *= 2.0;
        }
        return texture.low + (texture.high - texture.low) * (sum / norm);
    }
    }
}

CameraModel look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target, const Eigen::Vector3d& up,
                    double focal, int width, int height)
{
    const Eigen::Vector3d z = (target - center).normalized();
    Eigen::Vector3d y = -(up - up.dot(z) * z);
    if (y.norm() < 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "look_at up vector is parallel to the viewing direction");
    }
    y.normalize();
    const Eigen::Vector3d x = y.cross(z);
    CameraModel cam;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = (width - 1) / 2.0;
    cam.cy = (height - 1) / 2.0;
    cam.width = width;
    cam.height = height;
    cam.rotation.row(0) = x.transpose();
    cam.rotation.row(1) = y.transpose();
    cam.rotation.row(2) = z.transpose();
    cam.translation = -cam.rotation * center;
    return cam;
}

RenderedScene render(const SyntheticScene& scene, std::uint64_t seed)
{
    if (scene.width < 1 || scene.height < 1) {
        throw Error(ErrorKind::InvalidArgument, "synthetic image size must be positive");
    }
    if (scene.planes.empty() || scene.cameras.empty()) {
        throw Error(ErrorKind::InvalidArgument, "synthetic scene needs planes and cameras");
    }
    std::vector<Eigen::Vector3d> normals;
    std::vector<Eigen::Vector3d> u_axes;
    std::vector<Eigen::Vector3d> v_axes;
    for (const auto& plane : scene.planes) {
        normals.push_back(plane.normal.normalized());
        u_axes.push_back(orthogonal_u(plane));
        v_axes.push_back(normals.back().cross(u_axes.back()));
    }

    RenderedScene out;
    out.scene.depth_range = scene.depth_range;
    for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
        CameraModel cam = scene.cameras[c];
        cam.width = scene.width;
        cam.height = scene.height;
        cam.validate();

        View view;
        char name[32];
        std::snprintf(name, sizeof name, "view_%03zu.png", c);
        view.name = name;
        view.camera = cam;
        view.image = GrayImage(cam.width, cam.height);
        view.color = ColorImage(cam.width, cam.height);
        RenderedView truth{DepthMap(cam.width, cam.height), Raster<Eigen::Vector3d>(cam.width, cam.height),
                           Raster<int>(cam.width, cam.height, -1), Raster<int>(cam.width, cam.height, -1)};

        const Eigen::Vector3d center = cam.center();
        detail::for_each_row(cam.height, [&](int y) {
            for (int x = 0; x < cam.width; ++x) {
                const Eigen::Vector3d ray = geometry::pixel_ray(cam, Eigen::Vector2d(x, y));
                const Eigen::Vector3d dir = cam.rotation.transpose() * ray;
                double best_t = std::numeric_limits<double>::infinity();
                int best = -1;
                for (std::size_t k = 0; k < scene.planes.size(); ++k) {
                    const double den = normals[k].dot(dir);
                    if (std::abs(den) < 1e-12) {
                        continue;
                    }
                    const double t = normals[k].dot(scene.planes[k].point - center) / den;
                    if (t > 1e-9 && t < best_t) {
                        best_t = t;
                        best = static_cast<int>(k);
                    }
                }
                if (best < 0) {
                    continue;
                }
                const auto& plane = scene.planes[static_cast<std::size_t>(best)];
                const Eigen::Vector3d local = center + best_t * dir - plane.point;
                const double u = local.dot(u_axes[static_cast<std::size_t>(best)]);
                const double v = local.dot(v_axes[static_cast<std::size_t>(best)]);
                const TextureSpec* texture = &plane.texture;
                int patch = -1;
                for (std::size_t p = 0; p < plane.patches.size(); ++p) {
                    const auto& r = plane.patches[p];
                    if (u >= r.u_min && u <= r.u_max && v >= r.v_min && v <= r.v_max) {
                        texture = &r.texture;
                        patch = static_cast<int>(p);
                        break;
                    }
                }
                const double value = std::clamp(sample_texture(*texture, u, v, hash64(seed)), 0.0, 1.0);
                view.image(x, y) = static_cast<float>(value);
                const auto g = static_cast<std::uint8_t>(std::lround(value * 255.0));
                view.color(x, y) = {g, g, g};

                Eigen::Vector3d n_cam = cam.rotation * normals[static_cast<std::size_t>(best)];
                if (n_cam.dot(ray) > 0.0) {
                    n_cam = -n_cam;
                }
                truth.depth.set(x, y, best_t);
                truth.normals(x, y) = n_cam;
                truth.plane_id(x, y) = best;
                truth.patch_id(x, y) = patch;
            }
        });
        if (truth.depth.valid_count() == 0) {
            throw Error(ErrorKind::Degenerate, "camera " + std::to_string(c) + " sees no plane");
        }
        out.scene.views.push_back(std::move(view));
        out.truth.push_back(std::move(truth));
    }
    return out;
}

// --- presets ---------------------------------------------------------------

namespace {

constexpr double kPresetFocal = 300.0;
constexpr int kPresetWidth = 320;
constexpr int kPresetHeight = 240;

TextureSpec preset_noise()
{
    TextureSpec t;
    t.kind = TextureKind::Noise;
    t.cell = 0.25;
    t.octaves = 2;
    t.seed = 7;
    return t;
}

void add_parallel_rig(SyntheticScene& scene, std::initializer_list<double> offsets, double depth)
{
    const Eigen::Vector3d up(0.0, -1.0, 0.0);
    for (double x : offsets) {
        const Eigen::Vector3d c(x, 0.0, 0.0);
        scene.cameras.push_back(
            look_at(c, c + Eigen::Vector3d(0.0, 0.0, depth), up, kPresetFocal, scene.width, scene.height));
    }
}

} // namespace

SyntheticScene textured_plane_scene()
{
    SyntheticScene scene;
    scene.width = kPresetWidth;
    scene.height = kPresetHeight;
    SyntheticPlane plane;
    plane.point = Eigen::Vector3d(0.0, 0.0, 5.0);
    plane.normal = Eigen::Vector3d(0.15, 0.2, -1.0).normalized();
    plane.texture = preset_noise();
    scene.planes.push_back(plane);
    add_parallel_rig(scene, {0.0, -0.5, 0.5}, 5.0);
    return scene;
}

SyntheticScene untextured_center_scene()
{
    SyntheticScene scene;
    scene.width = kPresetWidth;
    scene.height = kPresetHeight;
    SyntheticPlane plane;
    plane.point = Eigen::Vector3d(0.0, 0.0, 5.0);
    plane.normal = Eigen::Vector3d(0.0, 0.0, -1.0);
    plane.texture = preset_noise();
    // 80 px at depth 5 and f = 300 spans 80 * 5 / 300 world units, centred on
    // the reference principal point.
    const double half = 40.0 * 5.0 / kPresetFocal;
    TexturePatch patch;
    patch.u_min = -half;
    patch.u_max = half;
    patch.v_min = -half;
    patch.v_max = half;
    patch.texture.kind = TextureKind::Flat;
    patch.texture.intensity = 0.5;
    plane.patches.push_back(patch);
    scene.planes.push_back(plane);
    add_parallel_rig(scene, {0.0, -0.5, 0.5}, 5.0);
    return scene;
}

SyntheticScene two_view_plane_scene()
{
    SyntheticScene scene = textured_plane_scene();
    scene.cameras.clear();
    add_parallel_rig(scene, {-0.25, 0.25}, 5.0);
    return scene;
}

// --- spec files ------------------------------------------------------------

namespace {

using nlohmann::json;

Eigen::Vector3d vec3(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3) {
        throw Error(ErrorKind::Format, std::string(what) + " must be an array of 3 numbers");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

TextureSpec parse_texture(const json& j)
{
    TextureSpec t;
    const std::string type = j.value("type", "noise");
    if (type == "noise") {
        t.kind = TextureKind::Noise;
    } else if (type == "checker") {
        t.kind = TextureKind::Checker;
    } else if (type == "flat") {
        t.kind = TextureKind::Flat;
    } else {
        throw Error(ErrorKind::Format, "unknown texture type '" + type + "'");
    }
    t.cell = j.value("cell", t.cell);
    t.octaves = j.value("octaves", t.octaves);
    t.seed = j.value("seed", t.seed);
    t.period = j.value("period", t.period);
    t.intensity = j.value("intensity", t.intensity);
    t.low = j.value("low", t.low);
    t.high = j.value("high", t.high);
    if (!(t.cell > 0.0) || !(t.period > 0.0)) {
        throw Error(ErrorKind::Format, "texture cell and period must be positive");
    }
    return t;
}

std::pair<double, double> interval(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 2) {
        throw Error(ErrorKind::Format, std::string(what) + " must be [min, max]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

SyntheticScene parse_scene_spec(const std::string& json_text)
{
    SyntheticScene scene;
    try {
        const json doc = json::parse(json_text);
        scene.width = doc.value("width", scene.width);
        scene.height = doc.value("height", scene.height);
        if (doc.contains("depth_range")) {
            const auto [lo, hi] = interval(doc["depth_range"], "depth_range");
            scene.depth_range = {lo, hi};
        }
        for (const auto& jp : doc.at("planes")) {
            SyntheticPlane plane;
            plane.point = vec3(jp.at("point"), "plane point");
            plane.normal = vec3(jp.at("normal"), "plane normal");
            if (jp.contains("u_axis")) {
                plane.u_axis = vec3(jp["u_axis"], "plane u_axis");
            } else if (std::abs(plane.normal.normalized().x()) > 0.9) {
                plane.u_axis = Eigen::Vector3d::UnitY();
            }
            if (jp.contains("texture")) {
                plane.texture = parse_texture(jp["texture"]);
            }
            for (const auto& jr : jp.value("patches", json::array())) {
                TexturePatch patch;
                std::tie(patch.u_min, patch.u_max) = interval(jr.at("u"), "patch u");
                std::tie(patch.v_min, patch.v_max) = interval(jr.at("v"), "patch v");
                patch.texture = parse_texture(jr.at("texture"));
                plane.patches.push_back(patch);
            }
            scene.planes.push_back(plane);
        }
        for (const auto& jc : doc.at("cameras")) {
            const double fx = jc.at("fx").get<double>();
            const double fy = jc.value("fy", fx);
            CameraModel cam;
            if (jc.contains("rotation")) {
                const auto& r = jc["rotation"];
                if (!r.is_array() || r.size() != 9) {
                    throw Error(ErrorKind::Format, "camera rotation must hold 9 numbers, row-major");
                }
                for (int k = 0; k < 9; ++k) {
                    cam.rotation(k / 3, k % 3) = r[static_cast<std::size_t>(k)].get<double>();
                }
                cam.translation = vec3(jc.at("translation"), "camera translation");
            } else {
                const Eigen::Vector3d up = jc.contains("up") ? vec3(jc["up"], "camera up") : Eigen::Vector3d(0, -1, 0);
                cam = look_at(vec3(jc.at("center"), "camera center"), vec3(jc.at("look_at"), "camera look_at"), up,
                              fx, scene.width, scene.height);
            }
            cam.fx = fx;
            cam.fy = fy;
            cam.cx = jc.value("cx", (scene.width - 1) / 2.0);
            cam.cy = jc.value("cy", (scene.height - 1) / 2.0);
            cam.width = scene.width;
            cam.height = scene.height;
            scene.cameras.push_back(cam);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, std::string("scene spec: ") + e.what());
    }
    return scene;
}

SyntheticScene load_scene_spec(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scene_spec(text.str());
}

void write_rendered(const RenderedScene& rendered, const std::filesystem::path& dir)
{
    io::write_scene(rendered.scene, dir);
    std::filesystem::create_directories(dir / "gt");
    for (std::size_t i = 0; i < rendered.truth.size(); ++i) {
        const auto& truth = rendered.truth[i];
        const std::string stem = std::filesystem::path(rendered.scene.views[i].name).stem().string();
        io::write_depth(dir / "gt" / (stem + ".depth.dmap"), truth.depth);
        io::write_normals(dir / "gt" / (stem + ".normal.dmap"), truth.normals);
        Raster<double> region(truth.patch_id.width(), truth.patch_id.height());
        for (std::size_t k = 0; k < region.size(); ++k) {
            region[k] = truth.plane_id[k] < 0 ? std::numeric_limits<double>::quiet_NaN() : truth.patch_id[k];
        }
        io::write_scalar(dir / "gt" / (stem + ".region.dmap"), region);
    }
}

DepthErrorReport depth_error_report(const DepthMap& estimate, const DepthMap& gt, const Raster<std::uint8_t>& mask,
                                    double bad_threshold)
{
    if (estimate.width() != gt.width() || estimate.height() != gt.height() || mask.width() != gt.width() ||
        mask.height() != gt.height()) {
        throw Error(ErrorKind::InvalidArgument, "depth error report needs aligned rasters");
    }
    DepthErrorReport report;
    std::vector<double> errors;
    std::size_t bad = 0;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            const auto truth = gt.at(x, y);
            if (!mask(x, y) || !truth) {
                continue;
            }
            ++report.mask_pixels;
            const auto est = estimate.at(x, y);
            if (!est) {
                ++bad;
                continue;
            }
            const double rel = std::abs(*est - *truth) / *truth;
            errors.push_back(rel);
            if (rel > bad_threshold) {
                ++bad;
            }
        }
    }
    if (report.mask_pixels == 0) {
        throw Error(ErrorKind::InvalidArgument, "depth error report over an empty mask");
    }
    const double total = static_cast<double>(report.mask_pixels);
    report.bad_fraction = static_cast<double>(bad) / total;
    report.coverage = static_cast<double>(errors.size()) / total;
    if (!errors.empty()) {
        const std::size_t mid = errors.size() / 2;
        std::nth_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(mid), errors.end());
        double median = errors[mid];
        if (errors.size() % 2 == 0) {
            median = 0.5 * (median + *std::max_element(errors.begin(), errors.begin() + static_cast<std::ptrdiff_t>(mid)));
        }
        report.median_rel_err = median;
    } else {
        report.median_rel_err = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

} // namespace planemvs::synth
