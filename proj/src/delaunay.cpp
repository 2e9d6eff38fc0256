#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "planemvs/planar_prior.hpp"

namespace planemvs::prior {

namespace {

double orient(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c)
{
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// True when d lies strictly inside the circumcircle of the CCW triangle abc.
// The relative tolerance keeps cocircular points (e.g. square corners) outside,
// so ties resolve by insertion order.
bool in_circumcircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                     const Eigen::Vector2d& d)
{
    const double adx = a.x() - d.x();
    const double ady = a.y() - d.y();
    const double bdx = b.x() - d.x();
    const double bdy = b.y() - d.y();
    const double cdx = c.x() - d.x();
    const double cdy = c.y() - d.y();
    const double ad = adx * adx + ady * ady;
    const double bd = bdx * bdx + bdy * bdy;
    const double cd = cdx * cdx + cdy * cdy;
    const double det = adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
    const double permanent = std::abs(adx) * (std::abs(bdy) * cd + bd * std::abs(cdy)) +
                             std::abs(ady) * (std::abs(bdx) * cd + bd * std::abs(cdx)) +
                             ad * (std::abs(bdx) * std::abs(cdy) + std::abs(bdy) * std::abs(cdx));
    return det > 1e-12 * permanent;
}

struct Triangle {
    std::array<int, 3> v;
    Eigen::Vector2d center;
    double radius;
};

Triangle make_triangle(const std::vector<Eigen::Vector2d>& pts, int a, int b, int c)
{
    if (orient(pts[a], pts[b], pts[c]) < 0.0) {
        std::swap(b, c);
    }
    const Eigen::Vector2d& pa = pts[a];
    const Eigen::Vector2d& pb = pts[b];
    const Eigen::Vector2d& pc = pts[c];
    const double d = 2.0 * orient(pa, pb, pc);
    Triangle t{{a, b, c}, Eigen::Vector2d::Zero(), std::numeric_limits<double>::infinity()};
    if (d != 0.0) {
        const Eigen::Vector2d ab = pb - pa;
        const Eigen::Vector2d ac = pc - pa;
        const Eigen::Vector2d off((ac.y() * ab.squaredNorm() - ab.y() * ac.squaredNorm()) / d,
                                  (ab.x() * ac.squaredNorm() - ac.x() * ab.squaredNorm()) / d);
        t.center = pa + off;
        t.radius = off.norm();
    }
    return t;
}

TriangleIndices canonical(TriangleIndices t, std::span<const Eigen::Vector2d> pts)
{
    if (orient(pts[t[0]], pts[t[1]], pts[t[2]]) < 0.0) {
        std::swap(t[1], t[2]);
    }
    const auto first = std::min_element(t.begin(), t.end());
    std::rotate(t.begin(), first, t.end());
    return t;
}

} // namespace

std::vector<TriangleIndices> delaunay(std::span<const Eigen::Vector2d> points)
{
    std::vector<int> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& pa = points[a];
        const auto& pb = points[b];
        if (pa.x() != pb.x()) {
            return pa.x() < pb.x();
        }
        if (pa.y() != pb.y()) {
            return pa.y() < pb.y();
        }
        return a < b;
    });
    order.erase(std::unique(order.begin(), order.end(), [&](int a, int b) { return points[a] == points[b]; }),
                order.end());
    if (order.size() < 3) {
        return {};
    }

    std::vector<Eigen::Vector2d> pts;
    pts.reserve(order.size() + 3);
    for (int i : order) {
        pts.push_back(points[i]);
    }
    const int n = static_cast<int>(pts.size());
    bool collinear = true;
    for (int i = 2; i < n && collinear; ++i) {
        collinear = orient(pts[0], pts[1], pts[i]) == 0.0;
    }
    if (collinear) {
        return {};
    }

    Eigen::Vector2d lo = pts[0];
    Eigen::Vector2d hi = pts[0];
    for (const auto& p : pts) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Eigen::Vector2d mid = 0.5 * (lo + hi);
    const double extent = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1.0});
    const double big = 20.0 * extent;
    pts.emplace_back(mid.x() - 2.0 * big, mid.y() - big);
    pts.emplace_back(mid.x() + 2.0 * big, mid.y() - big);
    pts.emplace_back(mid.x(), mid.y() + 2.0 * big);

    // Points arrive sorted by x, so a triangle whose circumcircle lies entirely
    // left of the current point can never be invalidated again.
    std::vector<Triangle> open{make_triangle(pts, n, n + 1, n + 2)};
    std::vector<Triangle> closed;
    std::vector<std::array<int, 2>> edges;
    std::vector<Triangle> keep;

    for (int i = 0; i < n; ++i) {
        const Eigen::Vector2d& p = pts[i];
        edges.clear();
        keep.clear();
        for (const Triangle& t : open) {
            if (t.center.x() + t.radius < p.x()) {
                closed.push_back(t);
                continue;
            }
            if (in_circumcircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], p)) {
                for (int k = 0; k < 3; ++k) {
                    edges.push_back({t.v[k], t.v[(k + 1) % 3]});
                }
            } else {
                keep.push_back(t);
            }
        }
        // Cavity boundary: edges that appear once (a shared edge appears in both directions).
        for (std::size_t e = 0; e < edges.size(); ++e) {
            bool shared = false;
            for (std::size_t f = 0; f < edges.size(); ++f) {
                if (e != f && edges[e][0] == edges[f][1] && edges[e][1] == edges[f][0]) {
                    shared = true;
                    break;
                }
            }
            if (!shared) {
                keep.push_back(make_triangle(pts, edges[e][0], edges[e][1], i));
            }
        }
        open.swap(keep);
    }
    closed.insert(closed.end(), open.begin(), open.end());

    std::vector<TriangleIndices> out;
    for (const Triangle& t : closed) {
        if (t.v[0] >= n || t.v[1] >= n || t.v[2] >= n) {
            continue;
        }
        if (orient(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]]) == 0.0) {
            continue;
        }
        TriangleIndices tri{order[t.v[0]], order[t.v[1]], order[t.v[2]]};
        out.push_back(canonical(tri, points));
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace planemvs::prior
