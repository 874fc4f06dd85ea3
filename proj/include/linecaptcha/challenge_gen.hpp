#pragma once

// Seed-driven challenge synthesis: background, reference line, distraction
// (blur or segmentation) and the ground truth kept for grading.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "linecaptcha/geometry.hpp"
#include "linecaptcha/image.hpp"
#include "linecaptcha/rng.hpp"

namespace linecaptcha {

using TimePoint = std::chrono::system_clock::time_point;

enum class ChallengeKind { BlurredLine, SegmentedLine, MultiColorSegmentedLine, MultiLineColored };

inline constexpr ChallengeKind kAllKinds[] = {
    ChallengeKind::BlurredLine, ChallengeKind::SegmentedLine,
    ChallengeKind::MultiColorSegmentedLine, ChallengeKind::MultiLineColored};

/// Wire name used by the HTTP API, the CLI and JSON files.
constexpr std::string_view to_string(ChallengeKind kind) {
  switch (kind) {
    case ChallengeKind::BlurredLine: return "blurred";
    case ChallengeKind::SegmentedLine: return "segmented";
    case ChallengeKind::MultiColorSegmentedLine: return "multicolor_segmented";
    case ChallengeKind::MultiLineColored: return "multiline";
  }
  return "unknown";
}

inline std::optional<ChallengeKind> parse_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

constexpr bool is_segmented(ChallengeKind kind) {
  return kind == ChallengeKind::SegmentedLine || kind == ChallengeKind::MultiColorSegmentedLine;
}

template <typename T>
struct Range {
  T min;
  T max;

  bool valid() const { return min <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Reference samples keep this distance from every image border.
inline constexpr double kReferenceMargin = 10.0;
/// Waypoints are drawn this far inside the borders so spline overshoot
/// rarely violates kReferenceMargin.
inline constexpr double kWaypointMargin = 20.0;
inline constexpr double kReferenceSpacing = 2.0;
inline constexpr double kMinLengthFraction = 0.7;
inline constexpr int kMaxLineAttempts = 20;
inline constexpr int kMaxDistractorAttempts = 50;
/// Distractor midpoints stay at least this far from the reference (the
/// default grading epsilon).
inline constexpr double kDistractorClearance = 10.0;
/// Samples further apart than this multiple of the self-approach threshold
/// (in arc length) count as non-adjacent.
inline constexpr double kNonAdjacentArcFactor = 3.0;

struct ChallengeSpec {
  ChallengeKind kind{ChallengeKind::BlurredLine};
  std::uint64_t seed{0};
  int width{400};
  int height{200};
  Range<int> background_shape_count{15, 40};
  int waypoint_count{5};
  double stroke_width{3.0};
  double blur_sigma{2.0};
  Range<double> segment_len{12.0, 24.0};
  Range<double> gap_len{6.0, 14.0};
  Range<int> distractor_count{120, 200};
  int line_count{5};
  double tension{0.5};

  static ChallengeSpec defaults(ChallengeKind kind, std::uint64_t seed = 0) {
    ChallengeSpec s;
    s.kind = kind;
    s.seed = seed;
    return s;
  }

  void validate() const {
    auto fail = [](const char* what) {
      throw std::invalid_argument(std::string("ChallengeSpec: ") + what);
    };
    if (width < 200 || height < 100) fail("canvas must be at least 200x100");
    if (waypoint_count < 4) fail("waypoint_count must be >= 4");
    if (!(stroke_width >= 2.0)) fail("stroke_width must be >= 2");
    if (!background_shape_count.valid() || background_shape_count.min < 0) {
      fail("bad background_shape_count range");
    }
    if (!(blur_sigma >= 0.0)) fail("blur_sigma must be >= 0");
    if (!segment_len.valid() || !(segment_len.min > 0.0)) fail("bad segment_len range");
    if (!gap_len.valid() || !(gap_len.min >= 0.0)) fail("bad gap_len range");
    if (!distractor_count.valid() || distractor_count.min < 0) fail("bad distractor_count range");
    if (line_count < 1) fail("line_count must be >= 1");
  }

  friend bool operator==(const ChallengeSpec&, const ChallengeSpec&) = default;
};

struct TraceTheLine {
  friend bool operator==(TraceTheLine, TraceTheLine) = default;
};
struct TraceColor {
  Rgb swatch;
  friend bool operator==(TraceColor, TraceColor) = default;
};
using InstructionHint = std::variant<TraceTheLine, TraceColor>;

struct GroundTruth {
  std::string challenge_id;
  ChallengeKind kind;
  Polyline reference;
  std::optional<Rgb> target_color;
  int image_width;
  int image_height;
  std::uint64_t seed;
  TimePoint created_at;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Challenge {
  std::string id;
  RasterImage image;
  InstructionHint instruction;
  TimePoint expires_at;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Background

struct EllipseShape {
  Point center;
  double rx, ry;
  Rgb color;
};
struct RectShape {
  Point top_left;
  double w, h;
  Rgb color;
};
struct ArcShape {
  Point center;
  double radius, start, sweep, width;
  Rgb color;
};
using BackgroundShape = std::variant<EllipseShape, RectShape, ArcShape>;

struct BackgroundPlan {
  Rgb base;
  std::vector<BackgroundShape> shapes;
};

/// HSV color with saturation and value in [0.3, 1].
inline Rgb random_color(Rng& rng) {
  const double h = rng.uniform(0.0, 360.0);
  const double s = rng.uniform(0.3, 1.0);
  const double v = rng.uniform(0.3, 1.0);
  return hsv_to_rgb(h, s, v);
}

/// The shape count is always the first draw from `rng`.
inline BackgroundPlan plan_background(Rng& rng, const ChallengeSpec& spec) {
  const auto n = rng.uniform_int(spec.background_shape_count.min, spec.background_shape_count.max);
  BackgroundPlan plan{random_color(rng), {}};
  plan.shapes.reserve(static_cast<std::size_t>(n));
  const double w = spec.width, h = spec.height;
  for (std::int64_t i = 0; i < n; ++i) {
    const Point c{rng.uniform(0.0, w), rng.uniform(0.0, h)};
    switch (rng.uniform_int(0, 2)) {
      case 0: {
        const double rx = rng.uniform(8.0, 60.0);
        const double ry = rng.uniform(8.0, 40.0);
        plan.shapes.emplace_back(EllipseShape{c, rx, ry, random_color(rng)});
        break;
      }
      case 1: {
        const double rw = rng.uniform(12.0, 100.0);
        const double rh = rng.uniform(10.0, 70.0);
        plan.shapes.emplace_back(RectShape{{c.x - rw / 2, c.y - rh / 2}, rw, rh, random_color(rng)});
        break;
      }
      default: {
        const double radius = rng.uniform(12.0, 60.0);
        const double start = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double sweep = rng.uniform(0.5, 1.5) * std::numbers::pi;
        const double width = rng.uniform(2.0, 5.0);
        plan.shapes.emplace_back(ArcShape{c, radius, start, sweep, width, random_color(rng)});
        break;
      }
    }
  }
  return plan;
}

inline RasterImage paint_background(const BackgroundPlan& plan, int width, int height) {
  RasterImage img(width, height, plan.base);
  for (const auto& shape : plan.shapes) {
    std::visit(
        [&](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, EllipseShape>) {
            fill_ellipse(img, s.center, s.rx, s.ry, s.color);
          } else if constexpr (std::is_same_v<S, RectShape>) {
            fill_rect(img, s.top_left, s.w, s.h, s.color);
          } else {
            stroke_arc(img, s.center, s.radius, s.start, s.sweep, s.width, s.color);
          }
        },
        shape);
  }
  return img;
}

inline RasterImage generate_background(Rng& rng, const ChallengeSpec& spec) {
  return paint_background(plan_background(rng, spec), spec.width, spec.height);
}

// ---------------------------------------------------------------------------
// Line

struct GeneratedLine {
  Spline spline;
  Polyline reference;
};

/// Waypoints spread left to right: x strictly increasing from the left
/// waypoint margin to the right one, y uniform within the margins.
inline std::vector<Point> sample_waypoints(Rng& rng, const ChallengeSpec& spec) {
  const int n = spec.waypoint_count;
  const double x0 = kWaypointMargin;
  const double x1 = spec.width - kWaypointMargin;
  const double step = (x1 - x0) / (n - 1);
  std::vector<Point> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    double x = x0 + step * i;
    if (i > 0 && i + 1 < n) x += step * rng.uniform(-0.3, 0.3);
    const double y = rng.uniform(kWaypointMargin, spec.height - kWaypointMargin);
    pts.push_back({x, y});
  }
  return pts;
}

/// True if two samples more than kNonAdjacentArcFactor * min_gap apart in
/// arc length come closer than min_gap.
inline bool has_self_approach(std::span<const Point> pts, double min_gap) {
  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) arc[i] = arc[i - 1] + distance(pts[i - 1], pts[i]);
  const double min_arc = kNonAdjacentArcFactor * min_gap;
  const double gap2 = min_gap * min_gap;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (arc[j] - arc[i] <= min_arc) continue;
      if (squared_norm(pts[i] - pts[j]) < gap2) return true;
    }
  }
  return false;
}

inline bool within_margins(std::span<const Point> pts, int width, int height) {
  for (const auto& p : pts) {
    if (p.x < kReferenceMargin || p.x > width - kReferenceMargin || p.y < kReferenceMargin ||
        p.y > height - kReferenceMargin) {
      return false;
    }
  }
  return true;
}

inline GeneratedLine generate_line(Rng& rng, const ChallengeSpec& spec) {
  for (int attempt = 0; attempt < kMaxLineAttempts; ++attempt) {
    const auto waypoints = sample_waypoints(rng, spec);
    Spline spline = spline_through(waypoints, spec.tension);
    Polyline ref = resample(spline, kReferenceSpacing);
    if (!within_margins(ref.points(), spec.width, spec.height)) continue;
    if (ref.length() < kMinLengthFraction * spec.width) continue;
    if (has_self_approach(ref.points(), 2.0 * spec.stroke_width)) continue;
    return {std::move(spline), std::move(ref)};
  }
  throw GenerationError("generate_line: too many rejected candidates");
}

inline RasterImage render_line(RasterImage image, std::span<const Point> line, double stroke_width,
                               Rgb color) {
  stroke_path(image, line, stroke_width, color);
  return image;
}

/// Separable Gaussian blur, kernel radius ceil(3 sigma), clamped edges.
inline RasterImage apply_blur(const RasterImage& img, double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("apply_blur: sigma must be a non-negative number");
  }
  if (sigma == 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const int w = img.width(), h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, b = 0;
      for (int i = -radius; i <= radius; ++i) {
        const Rgb& c = img.at(std::clamp(x + i, 0, w - 1), y);
        const double k = kernel[i + radius];
        r += k * c.r;
        g += k * c.g;
        b += k * c.b;
      }
      double* t = &tmp[(static_cast<std::size_t>(y) * w + x) * 3];
      t[0] = r;
      t[1] = g;
      t[2] = b;
    }
  }
  RasterImage out(w, h);
  auto to8 = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double r = 0, g = 0, b = 0;
      for (int i = -radius; i <= radius; ++i) {
        const double* t = &tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * 3];
        const double k = kernel[i + radius];
        r += k * t[0];
        g += k * t[1];
        b += k * t[2];
      }
      out.at(x, y) = {to8(r), to8(g), to8(b)};
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation and distractors

struct Chord {
  Point a, b;

  double length() const { return distance(a, b); }
  Point midpoint() const { return 0.5 * (a + b); }
  friend bool operator==(const Chord&, const Chord&) = default;
};

struct ArcInterval {
  double begin, end;
  double length() const { return end - begin; }
};

struct Segmentation {
  std::vector<Chord> kept;
  std::vector<ArcInterval> kept_arcs;
  std::vector<ArcInterval> gaps;
};

/// Alternating kept/gap intervals tiling [0, length], starting with a kept
/// one. Each kept interval becomes a straight chord between its endpoints
/// on the curve.
inline Segmentation segment_line(const Polyline& line, Rng& rng, const ChallengeSpec& spec) {
  if (!(spec.segment_len.min > 0.0) || !spec.segment_len.valid() || !(spec.gap_len.min >= 0.0) ||
      !spec.gap_len.valid()) {
    throw std::invalid_argument("segment_line: bad segment/gap ranges");
  }
  Segmentation out;
  const double total = line.length();
  double s = 0.0;
  bool kept = true;
  while (s < total) {
    const auto& range = kept ? spec.segment_len : spec.gap_len;
    const double e = std::min(total, s + rng.uniform(range.min, range.max));
    if (e > s) {
      if (kept) {
        out.kept_arcs.push_back({s, e});
        out.kept.push_back({point_at_arc(line, s), point_at_arc(line, e)});
      } else {
        out.gaps.push_back({s, e});
      }
    }
    s = e;
    kept = !kept;
  }
  return out;
}

/// Straight decoys with the real segment length distribution, uniform
/// orientation, and midpoints at least kDistractorClearance from the
/// reference. Placements that fail kMaxDistractorAttempts times are dropped,
/// so the result may hold fewer than the drawn count.
inline std::vector<Chord> generate_distractors(Rng& rng, const ChallengeSpec& spec,
                                               const Polyline& reference) {
  if (!spec.distractor_count.valid() || spec.distractor_count.min < 0) {
    throw std::invalid_argument("generate_distractors: bad count range");
  }
  const auto n = rng.uniform_int(spec.distractor_count.min, spec.distractor_count.max);
  std::vector<Chord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < kMaxDistractorAttempts; ++attempt) {
      const double len = rng.uniform(spec.segment_len.min, spec.segment_len.max);
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const Point half{0.5 * len * std::cos(theta), 0.5 * len * std::sin(theta)};
      const double hx = std::fabs(half.x), hy = std::fabs(half.y);
      const double mx = rng.uniform(kReferenceMargin + hx, spec.width - kReferenceMargin - hx);
      const double my = rng.uniform(kReferenceMargin + hy, spec.height - kReferenceMargin - hy);
      const Point mid{mx, my};
      if (nearest_on_polyline(mid, reference).distance < kDistractorClearance) continue;
      out.push_back({mid - half, mid + half});
      break;
    }
  }
  return out;
}

/// Colors shared by segmented-kind lines and distractors.
inline const std::vector<Rgb>& segment_palette() {
  static const std::vector<Rgb> palette = [] {
    std::vector<Rgb> p;
    for (int i = 0; i < 8; ++i) p.push_back(hsv_to_rgb(45.0 * i, 0.85, 0.8));
    return p;
  }();
  return palette;
}

inline constexpr Rgb kSegmentedBase{236, 234, 226};

/// Hues for `count` lines: evenly spaced from a random offset, each nudged
/// by at most a fifth of the spacing, so neighbours stay more than half a
/// spacing apart even after 8-bit quantization.
inline std::vector<double> spaced_hues(Rng& rng, int count) {
  const double step = 360.0 / count;
  const double offset = rng.uniform(0.0, 360.0);
  std::vector<double> hues;
  hues.reserve(count);
  for (int k = 0; k < count; ++k) {
    double h = std::fmod(offset + k * step + rng.uniform(-0.2, 0.2) * step, 360.0);
    if (h < 0.0) h += 360.0;
    hues.push_back(h);
  }
  return hues;
}

// ---------------------------------------------------------------------------
// Full challenge

struct GeneratedChallenge {
  Challenge challenge;
  GroundTruth truth;
};

namespace stream {
inline constexpr std::uint64_t kBackground = 1;
inline constexpr std::uint64_t kLine = 2;
inline constexpr std::uint64_t kSegments = 3;
inline constexpr std::uint64_t kDistractors = 4;
inline constexpr std::uint64_t kColors = 5;
inline constexpr std::uint64_t kId = 6;
inline constexpr std::uint64_t kExtraLines = 100;
}  // namespace stream

inline std::string seed_token(std::uint64_t seed) {
  static constexpr char kHex[] = "0123456789abcdef";
  const std::uint64_t v = derive_seed(seed, stream::kId);
  std::string s(16, '0');
  for (int i = 0; i < 16; ++i) s[15 - i] = kHex[(v >> (4 * i)) & 0xF];
  return s;
}

/// Pure function of (spec, issued_at): the same spec always yields the same
/// image bytes and ground truth. The id is derived from the seed; the
/// service replaces it with a fresh random token.
inline GeneratedChallenge generate_challenge(const ChallengeSpec& spec, TimePoint issued_at = {}) {
  spec.validate();
  const std::uint64_t seed = spec.seed;
  Rng line_rng = Rng::derive(seed, stream::kLine);
  Rng color_rng = Rng::derive(seed, stream::kColors);
  GeneratedLine line = generate_line(line_rng, spec);

  RasterImage image;
  InstructionHint instruction = TraceTheLine{};
  std::optional<Rgb> target_color;
  Polyline reference = line.reference;

  switch (spec.kind) {
    case ChallengeKind::BlurredLine: {
      Rng bg_rng = Rng::derive(seed, stream::kBackground);
      image = generate_background(bg_rng, spec);
      const Rgb ink = hsv_to_rgb(color_rng.uniform(0.0, 360.0), color_rng.uniform(0.5, 1.0),
                                 color_rng.uniform(0.1, 0.3));
      stroke_path(image, reference.points(), spec.stroke_width, ink);
      image = apply_blur(image, spec.blur_sigma);
      break;
    }
    case ChallengeKind::SegmentedLine:
    case ChallengeKind::MultiColorSegmentedLine: {
      const auto& palette = segment_palette();
      const auto pick = [&] {
        return palette[static_cast<std::size_t>(
            color_rng.uniform_int(0, static_cast<std::int64_t>(palette.size()) - 1))];
      };
      Rng seg_rng = Rng::derive(seed, stream::kSegments);
      Rng dis_rng = Rng::derive(seed, stream::kDistractors);
      const Segmentation seg = segment_line(reference, seg_rng, spec);
      const auto distractors = generate_distractors(dis_rng, spec, reference);
      image = RasterImage(spec.width, spec.height, kSegmentedBase);
      for (const auto& d : distractors) {
        const Point pts[] = {d.a, d.b};
        stroke_path(image, pts, spec.stroke_width, pick());
      }
      const Rgb line_color = pick();
      for (const auto& c : seg.kept) {
        const Point pts[] = {c.a, c.b};
        const Rgb ink = spec.kind == ChallengeKind::SegmentedLine ? line_color : pick();
        stroke_path(image, pts, spec.stroke_width, ink);
      }
      break;
    }
    case ChallengeKind::MultiLineColored: {
      Rng bg_rng = Rng::derive(seed, stream::kBackground);
      image = generate_background(bg_rng, spec);
      const auto hues = spaced_hues(color_rng, spec.line_count);
      const auto target = static_cast<std::size_t>(color_rng.uniform_int(0, spec.line_count - 1));
      for (int k = 0; k < spec.line_count; ++k) {
        const Rgb ink = hsv_to_rgb(hues[k], 0.9, 0.85);
        if (static_cast<std::size_t>(k) == target) {
          stroke_path(image, reference.points(), spec.stroke_width, ink);
          target_color = ink;
          instruction = TraceColor{ink};
        } else {
          Rng other_rng = Rng::derive(seed, stream::kExtraLines + k);
          const GeneratedLine other = generate_line(other_rng, spec);
          stroke_path(image, other.reference.points(), spec.stroke_width, ink);
        }
      }
      break;
    }
  }

  const std::string id = seed_token(seed);
  GroundTruth truth{id,           spec.kind,   std::move(reference), target_color,
                    spec.width,   spec.height, seed,                 issued_at};
  Challenge challenge{id, std::move(image), instruction, issued_at};
  return {std::move(challenge), std::move(truth)};
}

}  // namespace linecaptcha
