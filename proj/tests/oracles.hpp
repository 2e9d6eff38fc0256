#pragma once

// Independent reference implementations used to check the library. They are
// deliberately written from the textbook formulas, in long double where it
// helps, and share no code with the library.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace oracle {

/// cov(x, y) = E[(x - E x)(y - E y)] by direct summation.
inline long double covariance(const std::vector<double>& a, const std::vector<double>& b)
{
    long double ma = 0.0L;
    long double mb = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= a.size();
    mb /= b.size();
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - ma) * (b[i] - mb);
    }
    return s / a.size();
}

inline double ncc(const std::vector<double>& a, const std::vector<double>& b)
{
    return static_cast<double>(covariance(a, b) / std::sqrt(covariance(a, a) * covariance(b, b)));
}

struct Pinhole {
    double fx, fy, cx, cy;
    Eigen::Matrix3d r; // world to camera
    Eigen::Vector3d t;
};

/// Pixel -> camera-frame point at z = depth, written out per coordinate.
inline Eigen::Vector3d lift(const Pinhole& c, double px, double py, double depth)
{
    return {depth * (px - c.cx) / c.fx, depth * (py - c.cy) / c.fy, depth};
}

inline std::optional<Eigen::Vector2d> image_of(const Pinhole& c, const Eigen::Vector3d& world)
{
    const Eigen::Vector3d x = c.r * world + c.t;
    if (x.z() <= 0.0) {
        return std::nullopt;
    }
    return Eigen::Vector2d(c.fx * x.x() / x.z() + c.cx, c.fy * x.y() / x.z() + c.cy);
}

inline Eigen::Vector3d to_world(const Pinhole& c, const Eigen::Vector3d& x_cam)
{
    return c.r.transpose() * (x_cam - c.t);
}

/// Transfer of reference pixel q onto the plane (normal n in the reference
/// frame, through the point seen at pixel p with depth d), then into src.
inline std::optional<Eigen::Vector2d> plane_transfer(const Pinhole& ref, const Pinhole& src, double px, double py,
                                                     double d, const Eigen::Vector3d& n, double qx, double qy)
{
    const Eigen::Vector3d x0 = lift(ref, px, py, d);
    const Eigen::Vector3d ray = lift(ref, qx, qy, 1.0);
    const double s = n.dot(x0) / n.dot(ray);
    return image_of(src, to_world(ref, s * ray));
}

/// Circumcircle of a triangle from perpendicular bisectors, in long double.
inline void circumcircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                         long double& ux, long double& uy, long double& r2)
{
    const long double ax = a.x(), ay = a.y(), bx = b.x(), by = b.y(), cx = c.x(), cy = c.y();
    const long double d = 2.0L * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d;
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d;
    r2 = (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy);
}

/// Number of (triangle, vertex) pairs where a vertex lies strictly inside a
/// circumcircle, with 1e-9 relative slack.
inline std::size_t empty_circle_violations(const std::vector<Eigen::Vector2d>& pts,
                                           const std::vector<std::array<int, 3>>& tris)
{
    std::size_t bad = 0;
    for (const auto& t : tris) {
        long double ux, uy, r2;
        circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], ux, uy, r2);
        for (int v = 0; v < static_cast<int>(pts.size()); ++v) {
            if (v == t[0] || v == t[1] || v == t[2]) {
                continue;
            }
            const long double dx = pts[v].x() - ux;
            const long double dy = pts[v].y() - uy;
            if (dx * dx + dy * dy < r2 * (1.0L - 1e-9L)) {
                ++bad;
            }
        }
    }
    return bad;
}

struct PlyVertex {
    float x, y, z, nx, ny, nz;
    std::uint8_t r, g, b;
};

struct PlyFile {
    std::size_t header_bytes = 0;
    std::vector<PlyVertex> vertices;
};

/// Minimal reader for the binary little-endian layout the library emits.
inline PlyFile read_ply(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    PlyFile ply;
    std::string line;
    std::size_t count = 0;
    std::vector<std::string> props;
    bool binary_le = false;
    std::getline(in, line);
    if (line != "ply") {
        throw std::runtime_error("missing ply magic");
    }
    ply.header_bytes += line.size() + 1;
    while (std::getline(in, line)) {
        ply.header_bytes += line.size() + 1;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (word == "element") {
            std::string name;
            ls >> name >> count;
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(type + " " + name);
        } else if (word == "end_header") {
            break;
        }
    }
    const std::vector<std::string> expected = {"float x",  "float y",     "float z",      "float nx",    "float ny",
                                               "float nz", "uchar red", "uchar green", "uchar blue"};
    if (!binary_le || props != expected) {
        throw std::runtime_error("unexpected ply layout");
    }
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char buf[27];
        if (!in.read(reinterpret_cast<char*>(buf), 27)) {
            throw std::runtime_error("truncated ply");
        }
        PlyVertex v{};
        float f[6];
        for (int k = 0; k < 6; ++k) {
            const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * k]) |
                                       (static_cast<std::uint32_t>(buf[4 * k + 1]) << 8) |
                                       (static_cast<std::uint32_t>(buf[4 * k + 2]) << 16) |
                                       (static_cast<std::uint32_t>(buf[4 * k + 3]) << 24);
            std::memcpy(&f[k], &bits, 4);
        }
        v.x = f[0];
        v.y = f[1];
        v.z = f[2];
        v.nx = f[3];
        v.ny = f[4];
        v.nz = f[5];
        v.r = buf[24];
        v.g = buf[25];
        v.b = buf[26];
        ply.vertices.push_back(v);
    }
    return ply;
}

} // namespace oracle
