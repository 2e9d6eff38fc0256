#include "planemvs/scene_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Geometry>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "planemvs/error.hpp"

namespace fs = std::filesystem;

namespace planemvs {

Eigen::Matrix3d CameraModel::intrinsics() const
{
    Eigen::Matrix3d k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
}

Eigen::Matrix3d CameraModel::intrinsics_inverse() const
{
    Eigen::Matrix3d k;
    k << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return k;
}

void CameraModel::validate() const
{
    if (!(fx > 0.0) || !(fy > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "camera focal lengths must be positive");
    }
    if (width <= 0 || height <= 0) {
        throw Error(ErrorKind::InvalidArgument, "camera image size must be positive");
    }
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
        throw Error(ErrorKind::InvalidArgument, "camera principal point outside the image");
    }
    const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (orth >= 1e-9 || rotation.determinant() <= 0.0) {
        throw Error(ErrorKind::InvalidArgument, "camera rotation is not a proper rotation");
    }
}

namespace io {
namespace {

std::ifstream open_text(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    return in;
}

bool is_skippable(const std::string& line)
{
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string::npos || line[first] == '#';
}

std::map<int, CameraModel> parse_cameras(const fs::path& path)
{
    auto in = open_text(path);
    std::map<int, CameraModel> cameras;
    std::string line;
    while (std::getline(in, line)) {
        if (is_skippable(line)) {
            continue;
        }
        std::istringstream ss(line);
        int id = 0;
        std::string model;
        CameraModel cam;
        if (!(ss >> id >> model >> cam.width >> cam.height)) {
            throw Error(ErrorKind::Format, "malformed camera line in " + path.string() + ": " + line);
        }
        if (model != "PINHOLE") {
            throw Error(ErrorKind::Unsupported, "camera model " + model + " is not supported (PINHOLE only)");
        }
        if (!(ss >> cam.fx >> cam.fy >> cam.cx >> cam.cy)) {
            throw Error(ErrorKind::Format, "PINHOLE camera needs fx fy cx cy: " + line);
        }
        cameras[id] = cam;
    }
    return cameras;
}

struct ImageEntry {
    int id = 0;
    Eigen::Quaterniond q;
    Eigen::Vector3d t;
    int camera_id = 0;
    std::string name;
};

std::vector<ImageEntry> parse_images(const fs::path& path)
{
    auto in = open_text(path);
    std::vector<ImageEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (is_skippable(line)) {
            continue;
        }
        std::istringstream ss(line);
        ImageEntry e;
        double qw, qx, qy, qz;
        if (!(ss >> e.id >> qw >> qx >> qy >> qz >> e.t.x() >> e.t.y() >> e.t.z() >> e.camera_id >> e.name)) {
            throw Error(ErrorKind::Format, "malformed image line in " + path.string() + ": " + line);
        }
        e.q = Eigen::Quaterniond(qw, qx, qy, qz);
        entries.push_back(std::move(e));
        // Second line of each record lists 2D observations; unused here.
        std::getline(in, line);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return entries;
}

DepthRange read_range(const fs::path& path)
{
    DepthRange range;
    if (!fs::exists(path)) {
        return range;
    }
    auto in = open_text(path);
    if (!(in >> range.min >> range.max)) {
        throw Error(ErrorKind::Format, "range.txt must contain two numbers");
    }
    if (!(range.min > 0.0 && range.min < range.max)) {
        throw Error(ErrorKind::Format, "range.txt must satisfy 0 < d_min < d_max");
    }
    return range;
}

void read_image(const fs::path& path, GrayImage& gray, ColorImage& color)
{
    if (!fs::exists(path)) {
        throw Error(ErrorKind::Io, "missing image " + path.string());
    }
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) {
        throw Error(ErrorKind::Io, "unreadable image " + path.string());
    }
    const double scale = mat.depth() == CV_16U ? 1.0 / 65535.0 : mat.depth() == CV_8U ? 1.0 / 255.0 : 0.0;
    if (scale == 0.0 || (mat.channels() != 1 && mat.channels() != 3 && mat.channels() != 4)) {
        throw Error(ErrorKind::Unsupported, "unsupported pixel format in " + path.string());
    }
    cv::Mat f;
    mat.convertTo(f, CV_64F, scale);
    const int w = mat.cols;
    const int h = mat.rows;
    gray = GrayImage(w, h);
    color = ColorImage(w, h);
    const int ch = mat.channels();
    for (int y = 0; y < h; ++y) {
        const double* row = f.ptr<double>(y);
        for (int x = 0; x < w; ++x) {
            const double* px = row + static_cast<std::ptrdiff_t>(x) * ch;
            double r, g, b;
            if (ch == 1) {
                r = g = b = px[0];
            } else {
                // OpenCV stores BGR(A)
                b = px[0];
                g = px[1];
                r = px[2];
            }
            gray(x, y) = static_cast<float>(0.299 * r + 0.587 * g + 0.114 * b);
            color(x, y) = {static_cast<std::uint8_t>(std::lround(r * 255.0)),
                           static_cast<std::uint8_t>(std::lround(g * 255.0)),
                           static_cast<std::uint8_t>(std::lround(b * 255.0))};
        }
    }
}

// --- little-endian helpers ---

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr char kMagic[4] = {'D', 'M', 'A', 'P'};

} // namespace

GrayImage luminance(const ColorImage& color)
{
    GrayImage gray(color.width(), color.height());
    for (std::size_t i = 0; i < color.size(); ++i) {
        const auto& c = color[i];
        gray[i] = static_cast<float>((0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0);
    }
    return gray;
}

Scene load_scene(const fs::path& scene_dir)
{
    const auto cameras = parse_cameras(scene_dir / "cameras.txt");
    const auto entries = parse_images(scene_dir / "images.txt");
    if (entries.empty()) {
        throw Error(ErrorKind::Format, "images.txt lists no images");
    }

    Scene scene;
    scene.depth_range = read_range(scene_dir / "range.txt");
    for (const auto& e : entries) {
        const auto it = cameras.find(e.camera_id);
        if (it == cameras.end()) {
            throw Error(ErrorKind::Format,
                        "image " + e.name + " references unknown camera " + std::to_string(e.camera_id));
        }
        View view;
        view.name = e.name;
        view.camera = it->second;
        view.camera.rotation = e.q.normalized().toRotationMatrix();
        view.camera.translation = e.t;
        read_image(scene_dir / "images" / e.name, view.image, view.color);
        if (view.image.width() != view.camera.width || view.image.height() != view.camera.height) {
            throw Error(ErrorKind::Format, "image " + e.name + " size does not match its camera");
        }
        view.camera.validate();
        scene.views.push_back(std::move(view));
    }
    return scene;
}

void write_scene(const Scene& scene, const fs::path& scene_dir)
{
    fs::create_directories(scene_dir / "images");
    std::ofstream cams(scene_dir / "cameras.txt");
    std::ofstream imgs(scene_dir / "images.txt");
    if (!cams || !imgs) {
        throw Error(ErrorKind::Io, "cannot write scene files into " + scene_dir.string());
    }
    cams << std::setprecision(17);
    imgs << std::setprecision(17);
    cams << "# Camera list with one line of data per camera:\n"
         << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    imgs << "# Image list with two lines of data per image:\n"
         << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
         << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";

    for (std::size_t i = 0; i < scene.views.size(); ++i) {
        const auto& v = scene.views[i];
        const auto& c = v.camera;
        const int id = static_cast<int>(i) + 1;
        cams << id << " PINHOLE " << c.width << ' ' << c.height << ' ' << c.fx << ' ' << c.fy << ' ' << c.cx << ' '
             << c.cy << '\n';

        const Eigen::Quaterniond q(c.rotation);
        const std::string name = fs::path(v.name).replace_extension(".png").string();
        imgs << id << ' ' << q.w() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << c.translation.x()
             << ' ' << c.translation.y() << ' ' << c.translation.z() << ' ' << id << ' ' << name << "\n\n";

        cv::Mat mat(v.image.height(), v.image.width(), CV_16UC1);
        for (int y = 0; y < v.image.height(); ++y) {
            auto* row = mat.ptr<std::uint16_t>(y);
            for (int x = 0; x < v.image.width(); ++x) {
                const double value = std::clamp(static_cast<double>(v.image(x, y)), 0.0, 1.0);
                row[x] = static_cast<std::uint16_t>(std::lround(value * 65535.0));
            }
        }
        if (!cv::imwrite((scene_dir / "images" / name).string(), mat)) {
            throw Error(ErrorKind::Io, "cannot write image " + name);
        }
    }

    std::ofstream range(scene_dir / "range.txt");
    range << std::setprecision(17) << scene.depth_range.min << ' ' << scene.depth_range.max << '\n';
}

CameraModel rescale_camera(const CameraModel& camera, int max_dim)
{
    if (max_dim < 64) {
        throw Error(ErrorKind::InvalidArgument, "max_dim must be at least 64");
    }
    const int largest = std::max(camera.width, camera.height);
    if (largest <= max_dim) {
        return camera;
    }
    const double s = static_cast<double>(max_dim) / largest;
    CameraModel out = camera;
    out.fx *= s;
    out.fy *= s;
    out.cx *= s;
    out.cy *= s;
    out.width = static_cast<int>(std::lround(camera.width * s));
    out.height = static_cast<int>(std::lround(camera.height * s));
    return out;
}

Scene rescale_to_max_dim(const Scene& scene, int max_dim)
{
    Scene out;
    out.depth_range = scene.depth_range;
    for (const auto& view : scene.views) {
        View v = view;
        v.camera = rescale_camera(view.camera, max_dim);
        if (v.camera.width != view.camera.width || v.camera.height != view.camera.height) {
            const cv::Size size(v.camera.width, v.camera.height);
            cv::Mat gray(view.image.height(), view.image.width(), CV_32FC1,
                         const_cast<float*>(view.image.values().data()));
            cv::Mat small;
            cv::resize(gray, small, size, 0, 0, cv::INTER_AREA);
            v.image = GrayImage(size.width, size.height);
            for (int y = 0; y < size.height; ++y) {
                std::copy_n(small.ptr<float>(y), size.width, &v.image(0, y));
            }
            if (!view.color.empty()) {
                cv::Mat rgb(view.color.height(), view.color.width(), CV_8UC3,
                            const_cast<Rgb8*>(view.color.values().data()));
                cv::Mat small_rgb;
                cv::resize(rgb, small_rgb, size, 0, 0, cv::INTER_AREA);
                v.color = ColorImage(size.width, size.height);
                for (int y = 0; y < size.height; ++y) {
                    std::memcpy(&v.color(0, y), small_rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(size.width) * 3);
                }
            }
        }
        out.views.push_back(std::move(v));
    }
    return out;
}

// --- rasters ---------------------------------------------------------------

void write_raster(const fs::path& path, const RasterFile& raster)
{
    const std::size_t count = static_cast<std::size_t>(raster.width) * raster.height * raster.channels;
    if (raster.values.size() != count) {
        throw Error(ErrorKind::InvalidArgument, "raster payload does not match its dimensions");
    }
    std::string bytes;
    bytes.reserve(16 + count * 4);
    bytes.append(kMagic, 4);
    put_u32(bytes, raster.width);
    put_u32(bytes, raster.height);
    put_u32(bytes, raster.channels);
    for (float v : raster.values) {
        put_u32(bytes, std::bit_cast<std::uint32_t>(v));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
}

RasterFile read_raster(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
        throw Error(ErrorKind::Format, path.string() + " is not a DMAP raster");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    RasterFile raster;
    raster.width = get_u32(p + 4);
    raster.height = get_u32(p + 8);
    raster.channels = get_u32(p + 12);
    const std::size_t count = static_cast<std::size_t>(raster.width) * raster.height * raster.channels;
    if (bytes.size() != 16 + count * 4) {
        throw Error(ErrorKind::Format, path.string() + " has a truncated or oversized payload");
    }
    raster.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        raster.values[i] = std::bit_cast<float>(get_u32(p + 16 + 4 * i));
    }
    return raster;
}

void write_depth(const fs::path& path, const DepthMap& depth)
{
    RasterFile r{static_cast<std::uint32_t>(depth.width()), static_cast<std::uint32_t>(depth.height()), 1, {}};
    r.values.reserve(static_cast<std::size_t>(depth.width()) * depth.height());
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            r.values.push_back(depth.is_valid(x, y) ? static_cast<float>(depth.raw(x, y))
                                                    : std::numeric_limits<float>::quiet_NaN());
        }
    }
    write_raster(path, r);
}

DepthMap read_depth(const fs::path& path)
{
    const auto r = read_raster(path);
    if (r.channels != 1) {
        throw Error(ErrorKind::Format, path.string() + " is not a single-channel depth raster");
    }
    DepthMap depth(static_cast<int>(r.width), static_cast<int>(r.height));
    for (int y = 0; y < depth.height(); ++y) {
        for (int x = 0; x < depth.width(); ++x) {
            const float v = r.values[static_cast<std::size_t>(y) * r.width + x];
            if (!std::isnan(v)) {
                depth.set(x, y, v);
            }
        }
    }
    return depth;
}

void write_normals(const fs::path& path, const Raster<Eigen::Vector3d>& normals)
{
    RasterFile r{static_cast<std::uint32_t>(normals.width()), static_cast<std::uint32_t>(normals.height()), 3, {}};
    r.values.reserve(normals.size() * 3);
    for (const auto& n : normals.values()) {
        r.values.push_back(static_cast<float>(n.x()));
        r.values.push_back(static_cast<float>(n.y()));
        r.values.push_back(static_cast<float>(n.z()));
    }
    write_raster(path, r);
}

Raster<Eigen::Vector3d> read_normals(const fs::path& path)
{
    const auto r = read_raster(path);
    if (r.channels != 3) {
        throw Error(ErrorKind::Format, path.string() + " is not a 3-channel normal raster");
    }
    Raster<Eigen::Vector3d> normals(static_cast<int>(r.width), static_cast<int>(r.height));
    for (std::size_t i = 0; i < normals.size(); ++i) {
        normals[i] = Eigen::Vector3d(r.values[3 * i], r.values[3 * i + 1], r.values[3 * i + 2]);
    }
    return normals;
}

void write_scalar(const fs::path& path, const Raster<double>& values)
{
    RasterFile r{static_cast<std::uint32_t>(values.width()), static_cast<std::uint32_t>(values.height()), 1, {}};
    r.values.reserve(values.size());
    for (double v : values.values()) {
        r.values.push_back(static_cast<float>(v));
    }
    write_raster(path, r);
}

Raster<double> read_scalar(const fs::path& path)
{
    const auto r = read_raster(path);
    if (r.channels != 1) {
        throw Error(ErrorKind::Format, path.string() + " is not a single-channel raster");
    }
    Raster<double> values(static_cast<int>(r.width), static_cast<int>(r.height));
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = r.values[i];
    }
    return values;
}

} // namespace io
} // namespace planemvs
