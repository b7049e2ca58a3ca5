#pragma once
#include <array>

#include "mtvcbf/linalg.hpp"

namespace mtvcbf {

// Wrap an angle into (-pi, pi].
double wrap_angle(double a);

// Rectangular footprint: center pose plus body dimensions.
// length extends along the body x axis (heading), width along body y.
struct OrientedRectangle {
    double center_x;
    double center_y;
    double heading;  // normalized to (-pi, pi] at construction
    double length;   // > 0
    double width;    // > 0

    // Throws std::invalid_argument on non-positive dimensions or non-finite pose.
    OrientedRectangle(double cx, double cy, double psi, double len, double wid);

    Vec2 axis_x() const;  // unit body x axis
    Vec2 axis_y() const;  // unit body y axis
};

struct MarginResult {
    double value = 0.0;    // signed margin [m]; > 0 means separated
    // Unit body axis whose gap realized the value, oriented so that moving
    // the second rectangle along +axis widens the achieved gap.
    Vec2 achieving_axis;
    bool separated = false;
};

// Corner positions, counter-clockwise starting at the front-left corner.
std::array<Vec2, 4> rectangle_vertices(const OrientedRectangle& rect);

// Signed gap between the two rectangles' vertex projections on a unit axis:
// positive separation distance if the projection intervals are disjoint,
// otherwise minus the smallest shift along the axis that separates them (the
// overlap length; the shorter escape when one interval contains the other).
double project_gap(const OrientedRectangle& rect_a, const OrientedRectangle& rect_b, Vec2 axis);

// Heading-aware safety margin over the four body axes of the pair.
// Per rectangle k the two axis gaps (g_x, g_y) fold into d_k:
//   both > 0 -> sqrt(g_x^2 + g_y^2), both < 0 -> -min(|g_x|, |g_y|),
//   mixed -> max(g_x, g_y);
// the pair margin is max(d_i, d_j), which equals -min(|d_i|, |d_j|) for
// overlapping pairs (the cheapest escape over all four axes) and keeps the
// stronger separation evidence otherwise, so the margin stays continuous and
// below the true clearance. Ties resolve to the x axis / first rectangle so
// results are reproducible.
MarginResult mtv_margin(const OrientedRectangle& rect_i, const OrientedRectangle& rect_j);

// Exact closed-rectangle intersection test. Independent of the axis
// projection machinery above (vertex containment + segment crossings);
// used as the oracle the margin's sign is checked against.
bool exact_intersect(const OrientedRectangle& rect_i, const OrientedRectangle& rect_j);

// Enclosing-circle baseline: center distance minus twice the radius of the
// smallest circle containing the footprint, sqrt(length^2 + width^2) / 2.
double c2c_margin(double rel_x, double rel_y, double length, double width);

}  // namespace mtvcbf
