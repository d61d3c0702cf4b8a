#include "flexagg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace flexagg::geometry {

namespace {

constexpr double kVertexMergeTol = 1e-12;

// Drops consecutive near-duplicates so the loop stays simple.
std::vector<Vec2> dedupe(std::vector<Vec2> pts) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        if (out.empty() || (p - out.back()).cwiseAbs().maxCoeff() > kVertexMergeTol) {
            out.push_back(p);
        }
    }
    while (out.size() > 1 &&
           (out.front() - out.back()).cwiseAbs().maxCoeff() <= kVertexMergeTol) {
        out.pop_back();
    }
    return out;
}

double signed_area(const std::vector<Vec2>& v) {
    double a = 0.0;
    const size_t n = v.size();
    for (size_t i = 0; i < n; ++i) {
        const Vec2& p = v[i];
        const Vec2& q = v[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

double segment_distance(const Vec2& a, const Vec2& b, const Vec2& pt) {
    const Vec2 d = b - a;
    const double len2 = d.squaredNorm();
    if (len2 <= kVertexMergeTol * kVertexMergeTol) return (pt - a).norm();
    double t = (pt - a).dot(d) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return (pt - (a + t * d)).norm();
}

}  // namespace

std::vector<Vec2> BoundingBox::corners() const {
    return {Vec2(p.lo, q.lo), Vec2(p.hi, q.lo), Vec2(p.hi, q.hi), Vec2(p.lo, q.hi)};
}

FlexPolygon intersect_halfspaces(std::span<const HalfSpace> hs, const BoundingBox& seed) {
    std::vector<Vec2> poly = seed.corners();
    for (const auto& h : hs) {
        if (poly.empty()) break;
        std::vector<Vec2> next;
        next.reserve(poly.size() + 1);
        const size_t n = poly.size();
        for (size_t i = 0; i < n; ++i) {
            const Vec2& cur = poly[i];
            const Vec2& nxt = poly[(i + 1) % n];
            const double d_cur = h.normal.dot(cur) - h.offset;
            const double d_nxt = h.normal.dot(nxt) - h.offset;
            const bool in_cur = d_cur <= 0.0;
            const bool in_nxt = d_nxt <= 0.0;
            if (in_cur) next.push_back(cur);
            if (in_cur != in_nxt) {
                // The edge crosses the clip line; d_cur - d_nxt != 0 here.
                const double t = d_cur / (d_cur - d_nxt);
                next.push_back(cur + t * (nxt - cur));
            }
        }
        poly = dedupe(std::move(next));
        if (poly.size() < 3) {
            poly.clear();
            break;
        }
    }
    FlexPolygon out;
    out.vertices = std::move(poly);
    if (!out.vertices.empty() && signed_area(out.vertices) < 0) {
        std::reverse(out.vertices.begin(), out.vertices.end());
    }
    return out;
}

std::vector<HalfSpace> polygon_facets(const FlexPolygon& p) {
    std::vector<HalfSpace> out;
    const size_t n = p.vertices.size();
    if (n < 3) return out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec2& a = p.vertices[i];
        const Vec2& b = p.vertices[(i + 1) % n];
        Vec2 d = b - a;
        const double len = d.norm();
        if (len <= kVertexMergeTol) continue;
        // Interior lies left of each CCW edge; the outward normal is its
        // clockwise perpendicular.
        const Vec2 normal(d.y() / len, -d.x() / len);
        out.push_back({normal, normal.dot(a)});
    }
    return out;
}

double polygon_area(const FlexPolygon& p) {
    if (p.size() < 3) return 0.0;
    return std::abs(signed_area(p.vertices));
}

double distance_to_boundary(const FlexPolygon& p, const Vec2& pt) {
    if (p.empty()) return kInf;
    if (p.size() == 1) return (pt - p.vertices[0]).norm();
    double best = kInf;
    const size_t n = p.vertices.size();
    for (size_t i = 0; i < n; ++i) {
        best = std::min(best, segment_distance(p.vertices[i], p.vertices[(i + 1) % n], pt));
    }
    return best;
}

bool point_in_polygon(const FlexPolygon& p, const Vec2& pt, double tol) {
    if (p.size() < 3) return distance_to_boundary(p, pt) <= tol;
    // Ray crossing with an explicit boundary band for edge-inclusiveness.
    if (distance_to_boundary(p, pt) <= tol) return true;
    bool inside = false;
    const size_t n = p.vertices.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = p.vertices[i];
        const Vec2& b = p.vertices[j];
        const bool straddles = (a.y() > pt.y()) != (b.y() > pt.y());
        if (straddles) {
            const double x_cross = a.x() + (pt.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
            if (pt.x() < x_cross) inside = !inside;
        }
    }
    return inside;
}

PolygonMetrics polygon_metrics(const FlexPolygon& a, std::span<const Vec2> cloud) {
    PolygonMetrics m;
    m.area = polygon_area(a);
    if (m.area < 1e-12) {
        throw DegeneratePolygon("polygon area " + std::to_string(m.area) +
                                " below 1e-12");
    }
    if (cloud.empty()) {
        m.containment = 1.0;
        m.hausdorff = 0.0;
        return m;
    }
    size_t inside = 0;
    double worst = 0.0;
    for (const auto& pt : cloud) {
        if (point_in_polygon(a, pt, 1e-9)) ++inside;
        worst = std::max(worst, distance_to_boundary(a, pt));
    }
    m.containment = static_cast<double>(inside) / static_cast<double>(cloud.size());
    m.hausdorff = worst;
    return m;
}

FlexPolygon densify_boundary(const FlexPolygon& p, double max_edge) {
    if (max_edge <= 0) throw ConfigError("densify_boundary: max_edge must be positive");
    if (p.size() < 2) return p;
    FlexPolygon out;
    out.closed = p.closed;
    const size_t n = p.vertices.size();
    const size_t last = p.closed ? n : n - 1;
    for (size_t i = 0; i < last; ++i) {
        const Vec2& a = p.vertices[i];
        const Vec2& b = p.vertices[(i + 1) % n];
        out.vertices.push_back(a);
        const double len = (b - a).norm();
        const int pieces = static_cast<int>(std::ceil(len / max_edge));
        for (int k = 1; k < pieces; ++k) {
            out.vertices.push_back(a + (static_cast<double>(k) / pieces) * (b - a));
        }
    }
    if (!p.closed) out.vertices.push_back(p.vertices.back());
    return out;
}

std::vector<Vec2> boundary_points(const FlexPolygon& p, double max_edge) {
    return densify_boundary(p, max_edge).vertices;
}

}  // namespace flexagg::geometry
