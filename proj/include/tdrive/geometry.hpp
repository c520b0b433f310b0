#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <vector>

#include "tdrive/error.hpp"

namespace tdrive {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend Vec2 operator*(Vec2 v, double s) { return {s * v.x, s * v.y}; }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline Vec2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Rotates a world-frame offset into a frame whose x axis points along `heading`.
inline Vec2 to_local(Vec2 offset, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * offset.x + s * offset.y, -s * offset.x + c * offset.y};
}

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

struct Segment {
  Vec2 a;
  Vec2 b;
};

inline double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

/// Rectangle with centre, heading of its long axis, and half extents.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;

  std::array<Vec2, 2> axes() const {
    const Vec2 u = unit_from_heading(heading);
    return {u, Vec2{-u.y, u.x}};
  }

  /// Counter-clockwise: front-left, rear-left, rear-right, front-right.
  std::array<Vec2, 4> corners() const {
    const auto [u, v] = axes();
    const Vec2 l = half_length * u;
    const Vec2 w = half_width * v;
    return {center + l + w, center - l + w, center - l - w, center + l - w};
  }

  bool contains(Vec2 p) const {
    const Vec2 local = to_local(p - center, heading);
    return std::abs(local.x) <= half_length && std::abs(local.y) <= half_width;
  }

  /// Half of the box's projected extent on a unit axis.
  double projected_radius(Vec2 axis) const {
    const auto [u, v] = axes();
    return half_length * std::abs(dot(u, axis)) + half_width * std::abs(dot(v, axis));
  }
};

struct Disc {
  Vec2 center;
  double radius = 0.0;
};

/// Separating-axis test over the four edge normals of the two boxes.
/// Touching boxes count as overlapping.
inline bool detect_collision(const OrientedBox& a, const OrientedBox& b) {
  if (a.half_length <= 0 || a.half_width <= 0 || b.half_length <= 0 || b.half_width <= 0)
    throw Error("detect_collision: boxes need positive extents");
  const Vec2 d = b.center - a.center;
  const auto axes_a = a.axes();
  const auto axes_b = b.axes();
  for (const auto& axis : {axes_a[0], axes_a[1], axes_b[0], axes_b[1]}) {
    if (std::abs(dot(d, axis)) > a.projected_radius(axis) + b.projected_radius(axis)) return false;
  }
  return true;
}

inline bool detect_collision(const OrientedBox& box, const Disc& disc) {
  if (box.half_length <= 0 || box.half_width <= 0 || disc.radius <= 0)
    throw Error("detect_collision: shapes need positive extents");
  if (box.contains(disc.center)) return true;
  const auto c = box.corners();
  for (std::size_t i = 0; i < 4; ++i) {
    if (point_segment_distance(disc.center, c[i], c[(i + 1) % 4]) <= disc.radius) return true;
  }
  return false;
}

/// Result of projecting a point onto a polyline.
struct PolylineProjection {
  double arc_length = 0.0;  // from the first vertex to the foot point
  double lateral = 0.0;     // signed, positive to the left of travel
  double tangent_heading = 0.0;
  Vec2 foot;
  std::size_t segment = 0;
};

/// Open polyline with cumulative arc-length lookup.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw Error("Polyline: needs at least two points");
    cumulative_.resize(points_.size(), 0.0);
    for (std::size_t i = 1; i < points_.size(); ++i)
      cumulative_[i] = cumulative_[i - 1] + distance(points_[i - 1], points_[i]);
  }

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  double arc_length_at_vertex(std::size_t i) const { return cumulative_.at(i); }

  double segment_heading(std::size_t i) const {
    const Vec2 d = points_[i + 1] - points_[i];
    return std::atan2(d.y, d.x);
  }

  /// Closest point on the polyline; ties resolve to the earliest segment.
  PolylineProjection project(Vec2 p) const {
    PolylineProjection best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
      const Vec2 a = points_[i];
      const Vec2 ab = points_[i + 1] - a;
      const double len2 = dot(ab, ab);
      if (len2 == 0.0) continue;
      const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
      const Vec2 foot = a + t * ab;
      const double dist = distance(p, foot);
      if (dist < best_dist) {
        best_dist = dist;
        best.segment = i;
        best.foot = foot;
        best.arc_length = cumulative_[i] + t * std::sqrt(len2);
        best.tangent_heading = std::atan2(ab.y, ab.x);
        best.lateral = cross(ab, p - a) >= 0.0 ? dist : -dist;
      }
    }
    return best;
  }

  /// Point at arc length s; beyond either end the end segment is extended.
  Vec2 point_at(double s) const {
    if (s <= 0.0) {
      const Vec2 u = unit_from_heading(segment_heading(0));
      return points_.front() + s * u;
    }
    if (s >= length()) {
      const Vec2 u = unit_from_heading(segment_heading(points_.size() - 2));
      return points_.back() + (s - length()) * u;
    }
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
    const double seg = cumulative_[i + 1] - cumulative_[i];
    const double t = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
    return points_[i] + t * (points_[i + 1] - points_[i]);
  }

  double heading_at(double s) const {
    if (s <= 0.0) return segment_heading(0);
    if (s >= length()) return segment_heading(points_.size() - 2);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
    return segment_heading(static_cast<std::size_t>(it - cumulative_.begin()) - 1);
  }

 private:
  std::vector<Vec2> points_;
  std::vector<double> cumulative_;

 public:
  friend bool operator==(const Polyline&, const Polyline&) = default;
};

}  // namespace tdrive
