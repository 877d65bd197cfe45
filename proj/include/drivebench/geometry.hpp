#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace drivebench::geom {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2 & o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2 & o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2 &) const = default;

  double dot(const Vec2 & o) const { return x * o.x + y * o.y; }
  double cross(const Vec2 & o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2 & a, const Vec2 & b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

inline Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Left-pointing unit normal for a heading.
inline Vec2 left_normal(double heading) { return {-std::sin(heading), std::cos(heading)}; }

struct Projection {
  double s = 0.0;        // arc length of the foot point
  double lateral = 0.0;  // signed offset, positive to the left of travel direction
  double distance = 0.0; // unsigned distance to the foot point
  std::size_t segment = 0;
};

/// Arc-length parameterized polyline.
///
/// Queries outside [0, length()] extrapolate linearly along the first or
/// last segment, which keeps lookahead and projection well defined near the
/// ends of a lane.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2> & points() const { return points_; }
  const std::vector<double> & stations() const { return stations_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double length() const { return stations_.empty() ? 0.0 : stations_.back(); }

  Vec2 point_at(double s) const;
  double heading_at(double s) const;

  /// Nearest-point projection over the whole polyline. Foot points are
  /// clamped to the polyline except on the two end segments, where the
  /// segment line is extended.
  Projection project(const Vec2 & p) const;

  /// Projection restricted to stations within [s_min, s_max].
  Projection project_in_window(const Vec2 & p, double s_min, double s_max) const;

  /// Arc length at which the segment [a, b] first crosses the polyline.
  std::optional<double> intersect_segment(const Vec2 & a, const Vec2 & b) const;

 private:
  std::size_t segment_index(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> stations_;
};

/// Rectangle centered at `center`, `length` along `heading`.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
};

/// Separating-axis overlap test. Touching boxes do not overlap.
bool overlaps(const OrientedBox & a, const OrientedBox & b);

/// Proper or touching intersection of segments [p1, p2] and [q1, q2].
bool segments_intersect(const Vec2 & p1, const Vec2 & p2, const Vec2 & q1, const Vec2 & q2);

}  // namespace drivebench::geom
