#include "mtvcbf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtvcbf {

double wrap_angle(double a) {
    double r = std::remainder(a, 6.283185307179586477);  // [-pi, pi]
    if (r <= -3.141592653589793238) r += 6.283185307179586477;
    return r;
}

OrientedRectangle::OrientedRectangle(double cx, double cy, double psi, double len, double wid)
    : center_x(cx), center_y(cy), heading(wrap_angle(psi)), length(len), width(wid) {
    if (!(len > 0.0) || !(wid > 0.0))
        throw std::invalid_argument("OrientedRectangle: length and width must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(psi))
        throw std::invalid_argument("OrientedRectangle: pose must be finite");
}

Vec2 OrientedRectangle::axis_x() const { return {std::cos(heading), std::sin(heading)}; }
Vec2 OrientedRectangle::axis_y() const { return {-std::sin(heading), std::cos(heading)}; }

std::array<Vec2, 4> rectangle_vertices(const OrientedRectangle& rect) {
    const Vec2 ex = rect.axis_x();
    const Vec2 ey = rect.axis_y();
    const Vec2 c{rect.center_x, rect.center_y};
    const double hl = 0.5 * rect.length;
    const double hw = 0.5 * rect.width;
    return {c + hl * ex + hw * ey,    // front-left
            c - hl * ex + hw * ey,    // rear-left
            c - hl * ex - hw * ey,    // rear-right
            c + hl * ex - hw * ey};   // front-right
}

namespace {

struct Interval {
    double lo, hi;
};

Interval project(const OrientedRectangle& rect, Vec2 axis) {
    const auto verts = rectangle_vertices(rect);
    double lo = dot(verts[0], axis);
    double hi = lo;
    for (int k = 1; k < 4; ++k) {
        const double p = dot(verts[k], axis);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    return {lo, hi};
}

}  // namespace

double project_gap(const OrientedRectangle& rect_a, const OrientedRectangle& rect_b, Vec2 axis) {
    const Interval ia = project(rect_a, axis);
    const Interval ib = project(rect_b, axis);
    const double separation = std::max(ib.lo - ia.hi, ia.lo - ib.hi);
    if (separation >= 0.0) return separation;
    // Overlapping: the smallest shift of either interval that separates them.
    // For partial overlap this is the intersection length; when one interval
    // contains the other it is the shorter escape, which keeps the margin a
    // true translation distance.
    return -std::min(ia.hi - ib.lo, ib.hi - ia.lo);
}

namespace {

// Fold the two axis gaps of one rectangle; ties pick the x axis.
void fold_gaps(double g_x, double g_y, Vec2 ax, Vec2 ay, double& d_out, Vec2& axis_out) {
    if (g_x > 0.0 && g_y > 0.0) {
        d_out = std::sqrt(g_x * g_x + g_y * g_y);
        axis_out = (g_x >= g_y) ? ax : ay;
    } else if (g_x < 0.0 && g_y < 0.0) {
        d_out = -std::min(-g_x, -g_y);
        axis_out = (-g_x <= -g_y) ? ax : ay;
    } else {
        if (g_x >= g_y) {
            d_out = g_x;
            axis_out = ax;
        } else {
            d_out = g_y;
            axis_out = ay;
        }
    }
}

}  // namespace

MarginResult mtv_margin(const OrientedRectangle& rect_i, const OrientedRectangle& rect_j) {
    double d_i, d_j;
    Vec2 axis_i, axis_j;
    {
        const Vec2 ax = rect_i.axis_x(), ay = rect_i.axis_y();
        fold_gaps(project_gap(rect_i, rect_j, ax), project_gap(rect_i, rect_j, ay), ax, ay, d_i, axis_i);
    }
    {
        const Vec2 ax = rect_j.axis_x(), ay = rect_j.axis_y();
        fold_gaps(project_gap(rect_i, rect_j, ax), project_gap(rect_i, rect_j, ay), ax, ay, d_j, axis_j);
    }

    // Fold across the pair by keeping the stronger estimate. For overlapping
    // pairs this equals -min(|d_i|, |d_j|), the cheapest escape over all four
    // axes; for separated pairs it keeps the better separation evidence,
    // which is what makes the margin continuous across the touching set (a
    // min there would collapse to zero whenever the other rectangle's axes
    // stop witnessing the separation). Ties resolve to the first rectangle.
    MarginResult result;
    if (d_i >= d_j) {
        result.value = d_i;
        result.achieving_axis = axis_i;
    } else {
        result.value = d_j;
        result.achieving_axis = axis_j;
    }
    result.separated = result.value > 0.0;

    // Orient the axis so that translating rect_j along +axis widens the
    // achieved gap (or escapes the overlap by |value|).
    {
        const Interval ii = project(rect_i, result.achieving_axis);
        const Interval ij = project(rect_j, result.achieving_axis);
        bool flip;
        if (ij.lo <= ii.hi && ii.lo <= ij.hi)
            flip = ij.hi - ii.lo < ii.hi - ij.lo;  // downward escape is shorter
        else
            flip = ij.hi <= ii.lo;  // rect_j sits below rect_i
        if (flip) result.achieving_axis = -1.0 * result.achieving_axis;
    }
    return result;
}

namespace {

bool point_in_rect(Vec2 p, const OrientedRectangle& rect) {
    const Vec2 d = p - Vec2{rect.center_x, rect.center_y};
    const double lx = dot(d, rect.axis_x());
    const double ly = dot(d, rect.axis_y());
    return std::abs(lx) <= 0.5 * rect.length && std::abs(ly) <= 0.5 * rect.width;
}

// Closed segment intersection including touching endpoints and collinear overlap.
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    const auto orient = [](Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); };
    const double o1 = orient(p1, p2, q1);
    const double o2 = orient(p1, p2, q2);
    const double o3 = orient(q1, q2, p1);
    const double o4 = orient(q1, q2, p2);

    if (((o1 > 0.0) != (o2 > 0.0)) && ((o3 > 0.0) != (o4 > 0.0)) &&
        o1 != 0.0 && o2 != 0.0 && o3 != 0.0 && o4 != 0.0)
        return true;

    const auto on_segment = [](Vec2 a, Vec2 b, Vec2 c) {
        return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) &&
               std::min(a.y, b.y) <= c.y && c.y <= std::max(a.y, b.y);
    };
    if (o1 == 0.0 && on_segment(p1, p2, q1)) return true;
    if (o2 == 0.0 && on_segment(p1, p2, q2)) return true;
    if (o3 == 0.0 && on_segment(q1, q2, p1)) return true;
    if (o4 == 0.0 && on_segment(q1, q2, p2)) return true;
    return false;
}

}  // namespace

bool exact_intersect(const OrientedRectangle& rect_i, const OrientedRectangle& rect_j) {
    const auto vi = rectangle_vertices(rect_i);
    const auto vj = rectangle_vertices(rect_j);
    for (int k = 0; k < 4; ++k) {
        if (point_in_rect(vi[k], rect_j)) return true;
        if (point_in_rect(vj[k], rect_i)) return true;
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
            if (segments_intersect(vi[a], vi[(a + 1) % 4], vj[b], vj[(b + 1) % 4])) return true;
    return false;
}

double c2c_margin(double rel_x, double rel_y, double length, double width) {
    if (!(length > 0.0) || !(width > 0.0))
        throw std::invalid_argument("c2c_margin: dimensions must be positive");
    return std::sqrt(rel_x * rel_x + rel_y * rel_y) - std::sqrt(length * length + width * width);
}

}  // namespace mtvcbf
