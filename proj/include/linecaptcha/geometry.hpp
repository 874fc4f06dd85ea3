#pragma once

// Pixel-space geometry: cubic Bezier splines, arc-length resampling and
// point-to-polyline projection. Everything here is a pure function of its
// arguments and works in double precision; rasterization lives elsewhere.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace linecaptcha {

struct Point {
  double x{0.0};
  double y{0.0};

  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
  friend constexpr Point operator*(Point p, double s) { return {s * p.x, s * p.y}; }
  friend constexpr Point operator/(Point p, double s) { return {p.x / s, p.y / s}; }
  friend constexpr bool operator==(Point, Point) = default;
};

constexpr double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(Point p) { return dot(p, p); }
inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double distance(Point a, Point b) { return norm(a - b); }
inline bool is_finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

/// Cubic Bezier segment given by its four control points.
struct CubicSegment {
  Point p0, p1, p2, p3;

  friend bool operator==(const CubicSegment&, const CubicSegment&) = default;
};

/// Bernstein-form evaluation. Endpoints are reproduced exactly at t = 0 and 1.
inline Point eval_cubic(const CubicSegment& seg, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::domain_error("eval_cubic: parameter outside [0, 1]");
  }
  const double u = 1.0 - t;
  const double b0 = u * u * u;
  const double b1 = 3.0 * u * u * t;
  const double b2 = 3.0 * u * t * t;
  const double b3 = t * t * t;
  return {b0 * seg.p0.x + b1 * seg.p1.x + b2 * seg.p2.x + b3 * seg.p3.x,
          b0 * seg.p0.y + b1 * seg.p1.y + b2 * seg.p2.y + b3 * seg.p3.y};
}

/// Chord subdivisions per cubic used for arc-length estimates.
inline constexpr int kArcSubdivisions = 32;

inline double arc_length(const CubicSegment& seg) {
  double total = 0.0;
  Point prev = seg.p0;
  for (int k = 1; k <= kArcSubdivisions; ++k) {
    const Point cur = eval_cubic(seg, static_cast<double>(k) / kArcSubdivisions);
    total += distance(prev, cur);
    prev = cur;
  }
  return total;
}

/// Piecewise cubic curve. Adjacent segments share their joint bit-for-bit.
class Spline {
 public:
  explicit Spline(std::vector<CubicSegment> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) {
      throw std::invalid_argument("Spline: needs at least one segment");
    }
    for (const auto& s : segments_) {
      if (!is_finite(s.p0) || !is_finite(s.p1) || !is_finite(s.p2) || !is_finite(s.p3)) {
        throw std::invalid_argument("Spline: non-finite control point");
      }
    }
    for (std::size_t i = 0; i + 1 < segments_.size(); ++i) {
      if (!(segments_[i].p3 == segments_[i + 1].p0)) {
        throw std::invalid_argument("Spline: segments are not C0-continuous");
      }
    }
  }

  const std::vector<CubicSegment>& segments() const { return segments_; }
  Point front() const { return segments_.front().p0; }
  Point back() const { return segments_.back().p3; }

  double length() const {
    double total = 0.0;
    for (const auto& s : segments_) total += arc_length(s);
    return total;
  }

  /// Dense point sequence along the curve; joints and ends are exact.
  /// Sub-chords are at most `max_chord` long in control-polygon measure,
  /// and never fewer than kArcSubdivisions per segment.
  std::vector<Point> flatten(double max_chord = 0.5) const {
    std::vector<Point> out;
    out.push_back(segments_.front().p0);
    for (const auto& s : segments_) {
      const double hull =
          distance(s.p0, s.p1) + distance(s.p1, s.p2) + distance(s.p2, s.p3);
      const int n = std::max(kArcSubdivisions, static_cast<int>(std::ceil(hull / max_chord)));
      for (int k = 1; k < n; ++k) {
        out.push_back(eval_cubic(s, static_cast<double>(k) / n));
      }
      out.push_back(s.p3);
    }
    return out;
  }

 private:
  std::vector<CubicSegment> segments_;
};

/// Interpolating spline through `waypoints` with Catmull-Rom style tangents
/// m_i = tension * (W[i+1] - W[i-1]) (one-sided at the ends), converted to
/// Bezier controls. tension = 0.5 is the classic Catmull-Rom curve.
inline Spline spline_through(std::span<const Point> waypoints, double tension = 0.5) {
  if (waypoints.size() < 3) {
    throw std::invalid_argument("spline_through: needs at least 3 waypoints");
  }
  if (!std::isfinite(tension)) {
    throw std::invalid_argument("spline_through: non-finite tension");
  }
  for (const auto& w : waypoints) {
    if (!is_finite(w)) throw std::invalid_argument("spline_through: non-finite waypoint");
  }
  const std::size_t n = waypoints.size();
  std::vector<Point> tangents(n);
  tangents[0] = tension * (waypoints[1] - waypoints[0]);
  tangents[n - 1] = tension * (waypoints[n - 1] - waypoints[n - 2]);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    tangents[i] = tension * (waypoints[i + 1] - waypoints[i - 1]);
  }
  std::vector<CubicSegment> segments;
  segments.reserve(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    segments.push_back({waypoints[i], waypoints[i] + tangents[i] / 3.0,
                        waypoints[i + 1] - tangents[i + 1] / 3.0, waypoints[i + 1]});
  }
  return Spline(std::move(segments));
}

inline double path_length(std::span<const Point> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += distance(pts[i - 1], pts[i]);
  return total;
}

/// Ordered point sequence with a nominal sample spacing. Instances produced
/// by resample() have consecutive distances equal to the spacing (the final
/// step may be shorter).
class Polyline {
 public:
  Polyline(std::vector<Point> points, double spacing)
      : points_(std::move(points)), spacing_(spacing) {
    if (points_.size() < 2) throw std::invalid_argument("Polyline: needs at least 2 points");
    if (!(spacing_ > 0.0) || !std::isfinite(spacing_)) {
      throw std::invalid_argument("Polyline: spacing must be positive");
    }
    for (const auto& p : points_) {
      if (!is_finite(p)) throw std::invalid_argument("Polyline: non-finite point");
    }
  }

  const std::vector<Point>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double spacing() const { return spacing_; }
  double length() const { return path_length(points_); }

  Polyline reversed() const {
    return Polyline(std::vector<Point>(points_.rbegin(), points_.rend()), spacing_);
  }

  operator std::span<const Point>() const { return points_; }

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<Point> points_;
  double spacing_;
};

namespace detail {

// Walks `path` emitting points whose chord distance to the previously
// emitted point is exactly `spacing` (first crossing along the path).
inline std::vector<Point> chord_walk(std::span<const Point> path, double spacing) {
  std::vector<Point> out{path.front()};
  Point cur = path.front();
  Point from = path.front();
  const double r2 = spacing * spacing;
  std::size_t seg = 0;
  while (seg + 1 < path.size()) {
    const Point to = path[seg + 1];
    if (squared_norm(to - cur) < r2) {
      ++seg;
      from = to;
      continue;
    }
    // |from - cur| < spacing <= |to - cur|: exactly one outward crossing.
    const Point d = to - from;
    const Point f = from - cur;
    const double a = dot(d, d);
    const double b = 2.0 * dot(f, d);
    const double c = dot(f, f) - r2;
    const double disc = std::max(0.0, b * b - 4.0 * a * c);
    const double u = std::clamp((-b + std::sqrt(disc)) / (2.0 * a), 0.0, 1.0);
    cur = from + u * d;
    from = cur;
    out.push_back(cur);
  }
  const Point end = path.back();
  if (distance(out.back(), end) > 1e-9 * spacing) {
    out.push_back(end);
  } else if (out.size() > 1) {
    out.back() = end;
  }
  return out;
}

}  // namespace detail

/// Uniform chord-length resampling of a raw point path. The first and last
/// input points are preserved.
inline Polyline resample(std::span<const Point> path, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw std::invalid_argument("resample: spacing must be positive");
  }
  if (path.size() < 2 || !(path_length(path) > 0.0)) {
    throw std::invalid_argument("resample: input has zero length");
  }
  auto pts = detail::chord_walk(path, spacing);
  if (pts.size() < 2) throw std::invalid_argument("resample: input has zero extent");
  return Polyline(std::move(pts), spacing);
}

inline Polyline resample(const Polyline& line, double spacing) {
  return resample(std::span<const Point>(line.points()), spacing);
}

inline Polyline resample(const Spline& spline, double spacing) {
  const auto dense = spline.flatten();
  return resample(std::span<const Point>(dense), spacing);
}

struct Projection {
  double distance;
  double arc_param;  // arc length from the polyline start to the foot point
};

inline double point_segment_distance(Point p, Point a, Point b) {
  const Point d = b - a;
  const double len2 = dot(d, d);
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + u * d);
}

/// Closest point on a polyline (brute force over segments). Ties keep the
/// earliest segment.
inline Projection nearest_on_polyline(Point p, std::span<const Point> line) {
  if (line.empty()) throw std::invalid_argument("nearest_on_polyline: empty polyline");
  if (line.size() == 1) return {distance(p, line[0]), 0.0};
  double best_d2 = std::numeric_limits<double>::infinity();
  double best_arc = 0.0;
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point a = line[i];
    const Point d = line[i + 1] - a;
    const double len2 = dot(d, d);
    const double len = std::sqrt(len2);
    double u = 0.0;
    if (len2 > 0.0) u = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
    const double d2 = squared_norm(p - (a + u * d));
    if (d2 < best_d2) {
      best_d2 = d2;
      best_arc = cum + u * len;
    }
    cum += len;
  }
  return {std::sqrt(best_d2), best_arc};
}

/// Point at arc length `s` along the path, clamped to its ends.
inline Point point_at_arc(std::span<const Point> line, double s) {
  if (line.empty()) throw std::invalid_argument("point_at_arc: empty polyline");
  if (s <= 0.0) return line.front();
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double len = distance(line[i], line[i + 1]);
    if (cum + len >= s && len > 0.0) {
      return line[i] + ((s - cum) / len) * (line[i + 1] - line[i]);
    }
    cum += len;
  }
  return line.back();
}

}  // namespace linecaptcha
