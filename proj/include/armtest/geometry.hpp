#pragma once

#include <array>
#include <span>
#include <vector>

namespace armtest {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 v);
Vec2 rotate(Vec2 v, double deg);

// Oriented box on the work plane. Lengths in meters, rotation in degrees
// counterclockwise about +z.
struct ObbPose {
  double cx = 0.0;
  double cy = 0.0;
  double rot_deg = 0.0;
  double width = 0.0;
  double height = 0.0;

  Vec2 center() const { return {cx, cy}; }
  double area() const { return width * height; }
  bool operator==(const ObbPose&) const = default;
};

using Quad = std::array<Vec2, 4>;

// Axis-aligned rectangle in world coordinates.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  bool contains(Vec2 p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double diagonal() const;
  bool operator==(const Rect&) const = default;
};

// Wraps an angle into [-180, 180). Values already in range are returned
// unchanged, bit for bit.
double canonical_deg(double deg);

// Signed difference a - b wrapped into [-180, 180).
double angle_diff_deg(double a, double b);

// Orientation error of a rectangle, which is symmetric under a half turn:
// the wrapped difference folded into [-90, 90).
double half_turn_error_deg(double a, double b);

bool is_valid(const ObbPose& pose);

// Corners in counterclockwise order, starting from the local (-w/2, -h/2).
Quad obb_corners(const ObbPose& pose);

// Separating-axis test. Touching boundaries count as intersecting.
bool obb_intersect(const ObbPose& a, const ObbPose& b);

// Intersection over union via convex clipping; touching boxes give 0.
double obb_iou(const ObbPose& a, const ObbPose& b);

// Smallest distance between the two rectangles; 0 when they intersect.
double obb_distance(const ObbPose& a, const ObbPose& b);

bool obb_contains(const ObbPose& pose, Vec2 p);

// Same box grown by `margin` on every side.
ObbPose inflate(const ObbPose& pose, double margin);

// Shoelace area, positive for counterclockwise polygons.
double polygon_area(std::span<const Vec2> poly);

// Sutherland-Hodgman clip of `subject` against the convex counterclockwise
// polygon `clip`.
std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip);

}  // namespace armtest
