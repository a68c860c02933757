#include "armtest/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace armtest {

namespace {

constexpr double kCrossEps = 1e-12;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

}  // namespace

double norm(Vec2 v) { return std::hypot(v.x, v.y); }

Vec2 rotate(Vec2 v, double deg) {
  const double r = deg2rad(deg);
  const double c = std::cos(r);
  const double s = std::sin(r);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double Rect::diagonal() const { return std::hypot(width(), height()); }

double canonical_deg(double deg) {
  if (deg >= -180.0 && deg < 180.0) return deg;
  double r = std::fmod(deg + 180.0, 360.0);
  if (r < 0.0) r += 360.0;
  r -= 180.0;
  // fmod can round 359.999... up to exactly 180
  return r >= 180.0 ? -180.0 : r;
}

double angle_diff_deg(double a, double b) { return canonical_deg(a - b); }

double half_turn_error_deg(double a, double b) {
  double d = angle_diff_deg(a, b);
  if (d >= 90.0) d -= 180.0;
  if (d < -90.0) d += 180.0;
  return d;
}

bool is_valid(const ObbPose& pose) {
  return std::isfinite(pose.cx) && std::isfinite(pose.cy) && std::isfinite(pose.rot_deg) &&
         pose.width > 0.0 && pose.height > 0.0 && std::isfinite(pose.width) &&
         std::isfinite(pose.height);
}

Quad obb_corners(const ObbPose& pose) {
  const double hw = 0.5 * pose.width;
  const double hh = 0.5 * pose.height;
  const Vec2 c = pose.center();
  return {c + rotate({-hw, -hh}, pose.rot_deg), c + rotate({hw, -hh}, pose.rot_deg),
          c + rotate({hw, hh}, pose.rot_deg), c + rotate({-hw, hh}, pose.rot_deg)};
}

bool obb_intersect(const ObbPose& a, const ObbPose& b) {
  const Quad qa = obb_corners(a);
  const Quad qb = obb_corners(b);
  const std::array<Vec2, 4> axes = {rotate({1, 0}, a.rot_deg), rotate({0, 1}, a.rot_deg),
                                    rotate({1, 0}, b.rot_deg), rotate({0, 1}, b.rot_deg)};
  for (const Vec2& axis : axes) {
    double a_lo = std::numeric_limits<double>::infinity();
    double a_hi = -a_lo;
    double b_lo = a_lo;
    double b_hi = -a_lo;
    for (int k = 0; k < 4; ++k) {
      const double pa = dot(qa[k], axis);
      const double pb = dot(qb[k], axis);
      a_lo = std::min(a_lo, pa);
      a_hi = std::max(a_hi, pa);
      b_lo = std::min(b_lo, pb);
      b_hi = std::max(b_hi, pb);
    }
    if (a_hi < b_lo - kCrossEps || b_hi < a_lo - kCrossEps) return false;
  }
  return true;
}

double polygon_area(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) twice += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * twice;
}

std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !output.empty(); ++e) {
    const Vec2 p0 = clip[e];
    const Vec2 p1 = clip[(e + 1) % m];
    const Vec2 edge = p1 - p0;
    auto side = [&](Vec2 q) { return cross(edge, q - p0); };

    std::vector<Vec2> input;
    input.swap(output);
    const std::size_t n = input.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 cur = input[i];
      const Vec2 prev = input[(i + n - 1) % n];
      const double s_cur = side(cur);
      const double s_prev = side(prev);
      const bool in_cur = s_cur >= -kCrossEps;
      const bool in_prev = s_prev >= -kCrossEps;
      if (in_cur) {
        if (!in_prev) {
          const double t = s_prev / (s_prev - s_cur);
          output.push_back(prev + t * (cur - prev));
        }
        output.push_back(cur);
      } else if (in_prev) {
        const double t = s_prev / (s_prev - s_cur);
        output.push_back(prev + t * (cur - prev));
      }
    }
  }
  return output;
}

double obb_iou(const ObbPose& a, const ObbPose& b) {
  const Quad qa = obb_corners(a);
  const Quad qb = obb_corners(b);
  const std::vector<Vec2> inter = clip_convex(qa, qb);
  const double ia = std::max(0.0, polygon_area(inter));
  if (ia <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - ia;
  return std::clamp(ia / uni, 0.0, 1.0);
}

double obb_distance(const ObbPose& a, const ObbPose& b) {
  if (obb_intersect(a, b)) return 0.0;
  const Quad qa = obb_corners(a);
  const Quad qb = obb_corners(b);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_distance(qa[i], qb[j], qb[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(qb[i], qa[j], qa[(j + 1) % 4]));
    }
  }
  return best;
}

bool obb_contains(const ObbPose& pose, Vec2 p) {
  const Vec2 local = rotate(p - pose.center(), -pose.rot_deg);
  return std::abs(local.x) <= 0.5 * pose.width && std::abs(local.y) <= 0.5 * pose.height;
}

ObbPose inflate(const ObbPose& pose, double margin) {
  ObbPose out = pose;
  out.width += 2.0 * margin;
  out.height += 2.0 * margin;
  return out;
}

}  // namespace armtest
