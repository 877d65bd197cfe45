#include "drivebench/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace drivebench::geom {

double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("polyline needs at least two points");
  stations_.resize(points_.size());
  stations_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double d = distance(points_[i - 1], points_[i]);
    if (!(d > 0.0)) throw std::invalid_argument("polyline has coincident consecutive points");
    stations_[i] = stations_[i - 1] + d;
  }
}

std::size_t Polyline::segment_index(double s) const {
  if (s <= stations_.front()) return 0;
  if (s >= stations_.back()) return points_.size() - 2;
  auto it = std::upper_bound(stations_.begin(), stations_.end(), s);
  return static_cast<std::size_t>(std::distance(stations_.begin(), it)) - 1;
}

Vec2 Polyline::point_at(double s) const {
  const std::size_t i = segment_index(s);
  const Vec2 & a = points_[i];
  const Vec2 & b = points_[i + 1];
  const double seg = stations_[i + 1] - stations_[i];
  const double t = (s - stations_[i]) / seg;
  return a + (b - a) * t;
}

double Polyline::heading_at(double s) const {
  const std::size_t i = segment_index(s);
  const Vec2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

Projection Polyline::project(const Vec2 & p) const {
  return project_in_window(p, -std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity());
}

Projection Polyline::project_in_window(const Vec2 & p, double s_min, double s_max) const {
  Projection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const std::size_t n = points_.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (stations_[i + 1] < s_min || stations_[i] > s_max) continue;
    const Vec2 & a = points_[i];
    const Vec2 & b = points_[i + 1];
    const Vec2 ab = b - a;
    const double seg = stations_[i + 1] - stations_[i];
    double t = (p - a).dot(ab) / (seg * seg);
    const double lo = (i == 0) ? -std::numeric_limits<double>::infinity() : 0.0;
    const double hi = (i + 1 == n) ? std::numeric_limits<double>::infinity() : 1.0;
    t = std::clamp(t, lo, hi);
    double s = stations_[i] + t * seg;
    if (s < s_min || s > s_max) {
      s = std::clamp(s, s_min, s_max);
      t = (s - stations_[i]) / seg;
    }
    const Vec2 foot = a + ab * t;
    const Vec2 diff = p - foot;
    const double d2 = diff.dot(diff);
    if (d2 < best_d2) {
      best_d2 = d2;
      best.s = s;
      best.segment = i;
      best.distance = std::sqrt(d2);
      best.lateral = ab.cross(diff) / seg;
    }
  }
  return best;
}

std::optional<double> Polyline::intersect_segment(const Vec2 & a, const Vec2 & b) const {
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 & p = points_[i];
    const Vec2 & q = points_[i + 1];
    const Vec2 r = q - p;
    const Vec2 s = b - a;
    const double denom = r.cross(s);
    if (std::abs(denom) < 1e-12) continue;
    const double t = (a - p).cross(s) / denom;
    const double u = (a - p).cross(r) / denom;
    if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
      return stations_[i] + t * (stations_[i + 1] - stations_[i]);
    }
  }
  return std::nullopt;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f = heading_vector(heading) * (length / 2.0);
  const Vec2 l = left_normal(heading) * (width / 2.0);
  return {center + f + l, center + f - l, center - f - l, center - f + l};
}

namespace {

bool separated_on(const Vec2 & axis, const std::array<Vec2, 4> & a, const std::array<Vec2, 4> & b) {
  double amin = std::numeric_limits<double>::infinity(), amax = -amin;
  double bmin = amin, bmax = -amin;
  for (const auto & c : a) {
    const double v = axis.dot(c);
    amin = std::min(amin, v);
    amax = std::max(amax, v);
  }
  for (const auto & c : b) {
    const double v = axis.dot(c);
    bmin = std::min(bmin, v);
    bmax = std::max(bmax, v);
  }
  return amax <= bmin || bmax <= amin;
}

}  // namespace

bool overlaps(const OrientedBox & a, const OrientedBox & b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const Vec2 axes[4] = {heading_vector(a.heading), left_normal(a.heading), heading_vector(b.heading),
                        left_normal(b.heading)};
  for (const auto & axis : axes) {
    if (separated_on(axis, ca, cb)) return false;
  }
  return true;
}

bool segments_intersect(const Vec2 & p1, const Vec2 & p2, const Vec2 & q1, const Vec2 & q2) {
  const Vec2 r = p2 - p1;
  const Vec2 s = q2 - q1;
  const double denom = r.cross(s);
  if (std::abs(denom) < 1e-12) return false;
  const double t = (q1 - p1).cross(s) / denom;
  const double u = (q1 - p1).cross(r) / denom;
  return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

}  // namespace drivebench::geom
