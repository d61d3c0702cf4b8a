#pragma once

#include <span>
#include <vector>

#include "flexagg/types.hpp"

namespace flexagg::geometry {

/// Region { u : normal . u <= offset }.
struct HalfSpace {
    Vec2 normal = Vec2::Zero();
    double offset = 0.0;
};

struct BoundingBox {
    Interval p;
    Interval q;

    std::vector<Vec2> corners() const;  // counter-clockwise
};

/// Convex (or, for loss-compensated images, mildly nonconvex) 2D region in
/// the (p_pcc, q_pcc) plane, as a counter-clockwise simple vertex loop.
/// An empty vertex list is the explicit "empty region" value.
struct FlexPolygon {
    std::vector<Vec2> vertices;
    bool closed = true;

    bool empty() const { return vertices.empty(); }
    int size() const { return static_cast<int>(vertices.size()); }
};

/// Clips the seed box against every half-space in turn (Sutherland-Hodgman).
/// An infeasible combination yields the empty polygon, not an error.
FlexPolygon intersect_halfspaces(std::span<const HalfSpace> hs, const BoundingBox& seed);

/// Facet half-spaces of a counter-clockwise polygon (one per edge, outward
/// normals, unit length).
std::vector<HalfSpace> polygon_facets(const FlexPolygon& p);

double polygon_area(const FlexPolygon& p);

/// Edge-inclusive point test (tolerance on boundary distance).
bool point_in_polygon(const FlexPolygon& p, const Vec2& pt, double tol = 1e-9);

/// Distance from a point to the polygon's boundary polyline.
double distance_to_boundary(const FlexPolygon& p, const Vec2& pt);

struct PolygonMetrics {
    double area = 0.0;
    double containment = 0.0;  // fraction of cloud points inside, edge-inclusive
    double hausdorff = 0.0;    // directed, cloud -> polygon boundary
};

/// Throws DegeneratePolygon when area(a) < 1e-12.
PolygonMetrics polygon_metrics(const FlexPolygon& a, std::span<const Vec2> cloud);

/// Subdivides every edge so that no segment exceeds max_edge.
FlexPolygon densify_boundary(const FlexPolygon& p, double max_edge);

/// Points of the (closed) boundary polyline, spaced at most max_edge apart.
std::vector<Vec2> boundary_points(const FlexPolygon& p, double max_edge);

}  // namespace flexagg::geometry
