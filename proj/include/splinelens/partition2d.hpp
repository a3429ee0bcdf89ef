#pragma once

#include "splinelens/network.hpp"

#include <string>
#include <vector>

namespace splinelens {

struct Box2 {
    double xmin = -3.0, xmax = 3.0, ymin = -3.0, ymax = 3.0;
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double area() const { return width() * height(); }
};

using Point2 = Eigen::Vector2d;

// Counter-clockwise vertex list; simple and convex.
struct ConvexPolygon {
    std::vector<Point2> vertices;
    double area() const;
    Point2 centroid() const;
    bool contains(const Point2& p, double tol = 1e-12) const;
};

// Half-plane clip of a convex polygon by the line g.x + c = 0.
struct ClipResult {
    ConvexPolygon neg;            // g.x + c < 0 side
    ConvexPolygon pos;            // g.x + c >= 0 side
    Point2 chord_a, chord_b;      // the cut edge when both sides nonempty
    bool cut = false;
};
ClipResult clip_convex(const ConvexPolygon& poly, const Point2& grad, double offset,
                       double tol = 1e-12);

struct Region {
    ConvexPolygon polygon;
    ActivationCode code;      // layers 1..depth
    Matrix A;                 // x -> z_depth on this region
    Vector b;
};

struct LabeledSegment {
    Point2 a, b;
    int layer = 0, unit = 0;
    Point2 midpoint() const { return 0.5 * (a + b); }
    double length() const { return (b - a).norm(); }
};

struct Partition2D {
    Box2 box;
    int depth = 0;
    std::vector<Region> regions;
    std::vector<LabeledSegment> segments;
};

struct TraceOptions {
    double classify_tol = 1e-12;       // signed-distance vertex classification
    double sliver_area_rel = 1e-12;    // cuts producing a piece below this (relative to box) are skipped
    std::size_t region_budget = 1000000;
};

// Exact subdivision of the box by the folded hyperplanes of layers 1..upto,
// layer-major, unit-minor. D_0 must be 2.
Partition2D trace(const NetworkSpec& net, const BNState& bn, int upto, const Box2& box,
                  const TraceOptions& opts = {});

std::vector<LabeledSegment> folded_hyperplane(const Partition2D& partition, int layer, int unit);

// F_{L,1} of a scalar-head network traced to full depth.
std::vector<LabeledSegment> decision_boundary(const Partition2D& partition);

struct SvgStyle {
    int width_px = 640;
    std::string earlier_color = "#9e9e9e";
    std::string current_color = "#1565c0";
    std::string point_color = "#d32f2f";
    int current_layer = 0;    // segments of this layer get current_color; 0 = all earlier style
};

std::string to_svg(const Partition2D& partition, const SvgStyle& style = {},
                   const Matrix* points = nullptr);

// CSV dumps: regions (id, code, vertex list) and segments (id, endpoints, label).
std::string regions_csv(const Partition2D& partition);
std::string segments_csv(const Partition2D& partition);

} // namespace splinelens
