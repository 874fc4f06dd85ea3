#pragma once

// Trace grading: a pointer trace passes when it covers the reference line,
// stays on it, and follows it in one direction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/geometry.hpp"

namespace linecaptcha {

struct TracePoint {
  double x{0.0};
  double y{0.0};
  double t{0.0};  // milliseconds since the challenge was issued

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

struct Trace {
  std::vector<TracePoint> points;

  /// Throws std::invalid_argument on non-finite values or decreasing time.
  /// Point count is a grading matter (TraceTooShort), not a validity one.
  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.t)) {
        throw std::invalid_argument("Trace: non-finite value");
      }
      if (i > 0 && p.t < points[i - 1].t) {
        throw std::invalid_argument("Trace: timestamps decrease");
      }
    }
  }

  std::vector<Point> positions() const {
    std::vector<Point> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back({p.x, p.y});
    return out;
  }

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Trace sampling `path` with a fixed time step.
inline Trace make_trace(std::span<const Point> path, double dt_ms = 10.0) {
  Trace t;
  t.points.reserve(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) {
    t.points.push_back({path[i].x, path[i].y, dt_ms * static_cast<double>(i)});
  }
  return t;
}

struct GradingPolicy {
  double epsilon{10.0};
  double coverage_min{0.90};
  double precision_min{0.80};
  double monotone_min{0.90};
  double backtrack_allowance{6.0};
  double resample_spacing{2.0};
  int min_trace_points{8};

  void validate() const {
    auto fraction = [](double f) { return f > 0.0 && f <= 1.0; };
    if (!(epsilon > 0.0)) throw std::invalid_argument("GradingPolicy: epsilon must be > 0");
    if (!fraction(coverage_min) || !fraction(precision_min) || !fraction(monotone_min)) {
      throw std::invalid_argument("GradingPolicy: thresholds must be in (0, 1]");
    }
    if (!(resample_spacing > 0.0)) {
      throw std::invalid_argument("GradingPolicy: resample_spacing must be > 0");
    }
    if (!(backtrack_allowance >= 0.0)) {
      throw std::invalid_argument("GradingPolicy: backtrack_allowance must be >= 0");
    }
  }
};

enum class VerdictReason { Ok, LowCoverage, LowPrecision, NonMonotone, TraceTooShort, OutOfBounds };

constexpr std::string_view to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::Ok: return "ok";
    case VerdictReason::LowCoverage: return "low_coverage";
    case VerdictReason::LowPrecision: return "low_precision";
    case VerdictReason::NonMonotone: return "non_monotone";
    case VerdictReason::TraceTooShort: return "trace_too_short";
    case VerdictReason::OutOfBounds: return "out_of_bounds";
  }
  return "unknown";
}

struct Verdict {
  bool pass{false};
  double coverage{0.0};
  double precision{0.0};
  double monotonicity{0.0};
  VerdictReason reason{VerdictReason::TraceTooShort};

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Fraction of `reference` points with some `trace` point within epsilon.
inline double coverage_metric(std::span<const Point> trace, std::span<const Point> reference,
                              double epsilon) {
  if (reference.empty()) return 0.0;
  const double eps2 = epsilon * epsilon;
  std::size_t hit = 0;
  for (const auto& r : reference) {
    for (const auto& p : trace) {
      if (squared_norm(p - r) <= eps2) {
        ++hit;
        break;
      }
    }
  }
  return static_cast<double>(hit) / static_cast<double>(reference.size());
}

/// Fraction of `trace` points with some `reference` point within epsilon.
inline double precision_metric(std::span<const Point> trace, std::span<const Point> reference,
                               double epsilon) {
  return coverage_metric(reference, trace, epsilon);
}

/// Best of forward and reversed traversal: fraction of consecutive trace
/// points whose projected arc position does not fall back by more than
/// `backtrack`.
inline double monotonicity_metric(std::span<const Point> trace, std::span<const Point> reference,
                                  double backtrack) {
  if (trace.size() < 2) return 0.0;
  std::vector<double> s;
  s.reserve(trace.size());
  for (const auto& p : trace) s.push_back(nearest_on_polyline(p, reference).arc_param);
  std::size_t forward = 0, backward = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (s[i + 1] >= s[i] - backtrack) ++forward;
    if (s[i] >= s[i + 1] - backtrack) ++backward;
  }
  const auto pairs = static_cast<double>(s.size() - 1);
  return static_cast<double>(std::max(forward, backward)) / pairs;
}

namespace detail {

// Lexicographically smaller of the path and its reversal, so that both
// traversal directions resample to the same point set.
inline std::vector<Point> canonical_direction(std::vector<Point> pts) {
  std::vector<Point> rev(pts.rbegin(), pts.rend());
  const bool rev_smaller = std::lexicographical_compare(
      rev.begin(), rev.end(), pts.begin(), pts.end(),
      [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  return rev_smaller ? rev : pts;
}

}  // namespace detail

/// Grades `trace` against the stored reference. Timestamps are only
/// validated; they never influence the metrics.
inline Verdict grade(const Trace& trace, const GroundTruth& truth, const GradingPolicy& policy = {}) {
  policy.validate();
  trace.validate();
  Verdict v;
  if (trace.points.size() < static_cast<std::size_t>(std::max(policy.min_trace_points, 2))) {
    v.reason = VerdictReason::TraceTooShort;
    return v;
  }
  for (const auto& p : trace.points) {
    if (p.x < 0.0 || p.y < 0.0 || p.x > truth.image_width || p.y > truth.image_height) {
      v.reason = VerdictReason::OutOfBounds;
      return v;
    }
  }
  const auto raw = detail::canonical_direction(trace.positions());
  if (!(path_length(raw) > 0.0)) {
    v.reason = VerdictReason::TraceTooShort;
    return v;
  }
  const Polyline sampled = resample(std::span<const Point>(raw), policy.resample_spacing);
  const auto& pts = sampled.points();
  const auto& ref = truth.reference.points();

  v.coverage = coverage_metric(pts, ref, policy.epsilon);
  v.precision = precision_metric(pts, ref, policy.epsilon);
  v.monotonicity = monotonicity_metric(pts, ref, policy.backtrack_allowance);

  const bool cov_ok = v.coverage >= policy.coverage_min;
  const bool prec_ok = v.precision >= policy.precision_min;
  const bool mono_ok = v.monotonicity >= policy.monotone_min;
  v.pass = cov_ok && prec_ok && mono_ok;
  if (v.pass) {
    v.reason = VerdictReason::Ok;
  } else if (!cov_ok) {
    v.reason = VerdictReason::LowCoverage;
  } else if (!prec_ok) {
    v.reason = VerdictReason::LowPrecision;
  } else {
    v.reason = VerdictReason::NonMonotone;
  }
  return v;
}

}  // namespace linecaptcha
