#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/grader.hpp"

namespace lc = linecaptcha;
using lc::ChallengeKind;
using lc::Point;

namespace {

double min_distance_to_points(Point p, const std::vector<Point>& pts) {
  double best = 1e300;
  for (const auto& q : pts) best = std::min(best, lc::distance(p, q));
  return best;
}

// O(n^2) scan using cumulative arc length for adjacency.
bool brute_force_self_approach(const std::vector<Point>& pts, double gap) {
  std::vector<double> arc{0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) arc.push_back(arc.back() + lc::distance(pts[i - 1], pts[i]));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (std::fabs(arc[j] - arc[i]) > 3.0 * gap && lc::distance(pts[i], pts[j]) < gap) return true;
    }
  }
  return false;
}

lc::Polyline test_curve(double length) {
  // Gentle arc, resampled at the reference spacing.
  std::vector<Point> pts;
  for (int i = 0; i <= 1000; ++i) {
    const double x = 50 + length * i / 1000.0;
    pts.push_back({x, 100 + 20 * std::sin(x / 40.0)});
  }
  const auto raw = lc::resample(pts, 0.5);
  const double scale = length / raw.length();
  for (auto& p : pts) p.x = 50 + (p.x - 50) * scale;
  return lc::resample(pts, 2.0);
}

}  // namespace

TEST(ChallengeSpec, ValidatesInvariants) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  EXPECT_NO_THROW(spec.validate());
  auto bad = spec;
  bad.width = 199;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.waypoint_count = 3;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.stroke_width = 1.5;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.segment_len = {20, 10};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = spec;
  bad.blur_sigma = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(ChallengeKind, WireNamesRoundTrip) {
  for (auto k : lc::kAllKinds) EXPECT_EQ(lc::parse_kind(lc::to_string(k)), k);
  EXPECT_FALSE(lc::parse_kind("wavy").has_value());
}

TEST(Background, ZeroShapesIsUniformFill) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  spec.background_shape_count = {0, 0};
  lc::Rng rng(5);
  const auto img = lc::generate_background(rng, spec);
  ASSERT_EQ(img.width(), 400);
  ASSERT_EQ(img.height(), 200);
  for (const auto& p : img.pixels()) ASSERT_EQ(p, img.pixels()[0]);
}

TEST(Background, SameSeedSameBytes) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  lc::Rng a(99), b(99);
  EXPECT_EQ(lc::generate_background(a, spec), lc::generate_background(b, spec));
}

TEST(Background, ShapeCountMatchesReplayedDraw) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  spec.background_shape_count = {15, 40};
  lc::Rng rng(42);
  const auto plan = lc::plan_background(rng, spec);
  lc::Rng replay(42);
  const auto expected = replay.uniform_int(15, 40);
  EXPECT_EQ(static_cast<std::int64_t>(plan.shapes.size()), expected);
  EXPECT_GE(plan.shapes.size(), 15u);
  EXPECT_LE(plan.shapes.size(), 40u);
}

TEST(GenerateLine, FourWaypointsSpanTheCanvas) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  spec.waypoint_count = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    lc::Rng rng(seed);
    const auto line = lc::generate_line(rng, spec);
    double lo = 1e9, hi = -1e9;
    for (const auto& p : line.reference.points()) {
      lo = std::min(lo, p.x);
      hi = std::max(hi, p.x);
    }
    EXPECT_GE(hi - lo, 0.7 * 400);
  }
}

TEST(GenerateLine, Deterministic) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  lc::Rng a(17), b(17);
  EXPECT_EQ(lc::generate_line(a, spec).reference, lc::generate_line(b, spec).reference);
}

TEST(GenerateLine, AcceptedLinesNeverApproachThemselves) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    lc::Rng rng(seed);
    const auto line = lc::generate_line(rng, spec);
    const auto& pts = line.reference.points();
    ASSERT_FALSE(brute_force_self_approach(pts, 2.0 * spec.stroke_width)) << "seed " << seed;
    ASSERT_TRUE(lc::within_margins(pts, spec.width, spec.height));
    ASSERT_GE(line.reference.length(), 0.7 * spec.width);
    ASSERT_EQ(line.reference.spacing(), 2.0);
  }
}

TEST(GenerateLine, FailsAfterRepeatedRejection) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  spec.tension = 50.0;  // huge overshoot: every candidate leaves the canvas
  lc::Rng rng(1);
  EXPECT_THROW(lc::generate_line(rng, spec), lc::GenerationError);
}

TEST(RenderLine, HorizontalStrokeBand) {
  const lc::RasterImage blank(100, 50, {255, 255, 255});
  const std::vector<Point> pts{{10, 25}, {90, 25}};
  const auto line = lc::resample(pts, 2.0);
  const auto img = lc::render_line(blank, line, 3.0, {200, 0, 0});
  for (int x = 12; x <= 88; ++x) {
    int n = 0;
    for (int y = 0; y < 50; ++y) n += img.at(x, y) == lc::Rgb{200, 0, 0};
    EXPECT_GE(n, 2);
    EXPECT_LE(n, 4);
  }
  EXPECT_EQ(img, lc::render_line(blank, line, 3.0, {200, 0, 0}));
}

TEST(RenderLine, EveryReferencePointHasStrokePixelNearby) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  const lc::Rgb ink{1, 2, 3};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    lc::Rng rng(seed);
    const auto line = lc::generate_line(rng, spec);
    const auto img = lc::render_line(lc::RasterImage(400, 200, {250, 250, 250}), line.reference, 3.0, ink);
    for (const auto& p : line.reference.points()) {
      bool found = false;
      for (int y = static_cast<int>(std::floor(p.y - 1)); y <= static_cast<int>(std::ceil(p.y + 1)) && !found; ++y) {
        for (int x = static_cast<int>(std::floor(p.x - 1)); x <= static_cast<int>(std::ceil(p.x + 1)) && !found; ++x) {
          if (img.contains(x, y) && img.at(x, y) == ink && std::hypot(x - p.x, y - p.y) <= 1.0) found = true;
        }
      }
      ASSERT_TRUE(found) << "seed " << seed << " at " << p.x << "," << p.y;
    }
  }
}

TEST(Blur, ZeroSigmaIsIdentity) {
  lc::Rng rng(3);
  const auto img = lc::generate_background(rng, lc::ChallengeSpec::defaults(ChallengeKind::BlurredLine));
  EXPECT_EQ(lc::apply_blur(img, 0.0), img);
}

TEST(Blur, UniformImageUnchanged) {
  const lc::RasterImage img(40, 30, {17, 130, 244});
  for (double sigma : {0.5, 1.0, 2.0, 3.7}) EXPECT_EQ(lc::apply_blur(img, sigma), img);
}

TEST(Blur, ImpulseCenterMatchesKernelSum) {
  lc::RasterImage img(5, 5, {0, 0, 0});
  img.at(2, 2) = {255, 255, 255};
  const auto out = lc::apply_blur(img, 1.0);
  // Explicit 2D kernel over the radius-3 support.
  double total = 0.0;
  for (int i = -3; i <= 3; ++i) {
    for (int j = -3; j <= 3; ++j) total += std::exp(-(i * i + j * j) / 2.0);
  }
  const double expected = 255.0 / total;
  EXPECT_NEAR(out.at(2, 2).r, expected, 1.0);
  EXPECT_NEAR(out.at(2, 2).g, expected, 1.0);
}

TEST(Blur, NegativeSigmaRejected) {
  const lc::RasterImage img(10, 10);
  EXPECT_THROW(lc::apply_blur(img, -0.5), std::invalid_argument);
}

TEST(SegmentLine, ZeroGapsCoverWholeCurve) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  spec.gap_len = {0, 0};
  const auto curve = test_curve(300);
  lc::Rng rng(4);
  const auto seg = lc::segment_line(curve, rng, spec);
  ASSERT_FALSE(seg.kept.empty());
  EXPECT_TRUE(seg.gaps.empty());
  EXPECT_EQ(seg.kept.front().a, curve.points().front());
  EXPECT_NEAR(lc::distance(seg.kept.back().b, curve.points().back()), 0.0, 1e-9);
  for (std::size_t i = 1; i < seg.kept.size(); ++i) {
    EXPECT_NEAR(lc::distance(seg.kept[i - 1].b, seg.kept[i].a), 0.0, 1e-9);
  }
}

TEST(SegmentLine, IntervalsTileTheCurve) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  const auto curve = test_curve(300);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    lc::Rng rng(seed);
    const auto seg = lc::segment_line(curve, rng, spec);
    double sum = 0.0;
    for (const auto& k : seg.kept_arcs) {
      sum += k.length();
      EXPECT_LE(k.length(), 24.0 + 1e-9);
    }
    for (const auto& g : seg.gaps) {
      sum += g.length();
      EXPECT_LE(g.length(), 14.0 + 1e-9);
    }
    EXPECT_NEAR(sum, curve.length(), 1.0);
    for (const auto& c : seg.kept) {
      EXPECT_LT(lc::nearest_on_polyline(c.a, curve).distance, 0.5);
      EXPECT_LT(lc::nearest_on_polyline(c.b, curve).distance, 0.5);
    }
  }
}

TEST(SegmentLine, KeptFractionWithinBounds) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  const auto curve = test_curve(300);
  double acc = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    lc::Rng rng(seed);
    const auto seg = lc::segment_line(curve, rng, spec);
    double kept = 0.0;
    for (const auto& k : seg.kept_arcs) kept += k.length();
    acc += kept / curve.length();
  }
  const double mean = acc / 1000.0;
  EXPECT_GE(mean, 12.0 / (12.0 + 14.0));
  EXPECT_LE(mean, 24.0 / (24.0 + 6.0));
}

TEST(Distractors, ZeroCountIsEmpty) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  spec.distractor_count = {0, 0};
  lc::Rng rng(1);
  EXPECT_TRUE(lc::generate_distractors(rng, spec, test_curve(300)).empty());
}

TEST(Distractors, KeepClearOfReferenceAndInsideMargins) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    lc::Rng line_rng(seed);
    const auto line = lc::generate_line(line_rng, spec);
    lc::Rng rng(seed + 1000);
    const auto ds = lc::generate_distractors(rng, spec, line.reference);
    EXPECT_LE(ds.size(), 200u);
    for (const auto& d : ds) {
      EXPECT_GE(lc::nearest_on_polyline(d.midpoint(), line.reference).distance, 10.0);
      for (Point p : {d.a, d.b}) {
        EXPECT_GE(p.x, 10.0 - 1e-9);
        EXPECT_LE(p.x, 390.0 + 1e-9);
        EXPECT_GE(p.y, 10.0 - 1e-9);
        EXPECT_LE(p.y, 190.0 + 1e-9);
      }
    }
  }
}

TEST(Distractors, LengthDistributionMatchesSegments) {
  const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine);
  const auto curve = test_curve(300);
  std::vector<double> lengths;
  for (std::uint64_t seed = 0; lengths.size() < 10'000; ++seed) {
    lc::Rng rng(seed);
    for (const auto& d : lc::generate_distractors(rng, spec, curve)) lengths.push_back(d.length());
  }
  double sum = 0.0, lo = 1e9, hi = 0.0;
  for (double l : lengths) {
    sum += l;
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  EXPECT_GE(lo, 12.0 - 1e-9);
  EXPECT_LE(hi, 24.0 + 1e-9);
  EXPECT_NEAR(sum / lengths.size(), 18.0, 0.05 * 18.0);
}

TEST(MultiLine, HuesArePairwiseSeparated) {
  for (int count : {1, 2, 3, 5, 8}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      lc::Rng rng(seed);
      const auto hues = lc::spaced_hues(rng, count);
      for (int i = 0; i < count; ++i) {
        for (int j = i + 1; j < count; ++j) {
          const double a = lc::hue_of(lc::hsv_to_rgb(hues[i], 0.9, 0.85));
          const double b = lc::hue_of(lc::hsv_to_rgb(hues[j], 0.9, 0.85));
          EXPECT_GE(lc::hue_distance(a, b), 360.0 / (2.0 * count));
        }
      }
    }
  }
}

TEST(GenerateChallenge, SameSpecSameBytesForEveryKind) {
  for (auto kind : lc::kAllKinds) {
    const auto spec = lc::ChallengeSpec::defaults(kind, 1234);
    const auto a = lc::generate_challenge(spec);
    const auto b = lc::generate_challenge(spec);
    EXPECT_EQ(a.challenge.image, b.challenge.image);
    EXPECT_EQ(lc::encode_png(a.challenge.image), lc::encode_png(b.challenge.image));
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.challenge.id, a.truth.challenge_id);
    EXPECT_EQ(a.challenge.instruction, b.challenge.instruction);
  }
}

TEST(GenerateChallenge, DifferentSeedsDiffer) {
  const auto a = lc::generate_challenge(lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine, 1));
  const auto b = lc::generate_challenge(lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine, 2));
  EXPECT_NE(a.challenge.image, b.challenge.image);
  EXPECT_NE(a.truth.challenge_id, b.truth.challenge_id);
}

TEST(GenerateChallenge, SingleLineSwatchIsTheLineColor) {
  auto spec = lc::ChallengeSpec::defaults(ChallengeKind::MultiLineColored, 77);
  spec.line_count = 1;
  const auto gen = lc::generate_challenge(spec);
  const auto* hint = std::get_if<lc::TraceColor>(&gen.challenge.instruction);
  ASSERT_NE(hint, nullptr);
  ASSERT_TRUE(gen.truth.target_color.has_value());
  EXPECT_EQ(*gen.truth.target_color, hint->swatch);
  for (const auto& p : gen.truth.reference.points()) {
    EXPECT_EQ(gen.challenge.image.at(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))),
              hint->swatch);
  }
}

TEST(GenerateChallenge, InstructionMatchesKind) {
  for (auto kind : lc::kAllKinds) {
    const auto gen = lc::generate_challenge(lc::ChallengeSpec::defaults(kind, 5));
    const bool color = std::holds_alternative<lc::TraceColor>(gen.challenge.instruction);
    EXPECT_EQ(color, kind == ChallengeKind::MultiLineColored);
    EXPECT_EQ(gen.truth.target_color.has_value(), color);
  }
}

TEST(GenerateChallenge, SegmentedChordPixelsStayInTube) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto spec = lc::ChallengeSpec::defaults(ChallengeKind::SegmentedLine, seed);
    const auto gen = lc::generate_challenge(spec);
    lc::Rng seg_rng = lc::Rng::derive(seed, lc::stream::kSegments);
    const auto seg = lc::segment_line(gen.truth.reference, seg_rng, spec);
    lc::RasterImage mask(spec.width, spec.height, {0, 0, 0});
    for (const auto& c : seg.kept) {
      const Point pts[] = {c.a, c.b};
      lc::stroke_path(mask, pts, spec.stroke_width, {255, 255, 255});
    }
    const auto& ref = gen.truth.reference.points();
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (mask.at(x, y).r == 0) continue;
        ASSERT_LE(min_distance_to_points({double(x), double(y)}, ref), 10.0);
        // The chord pixels carry ink in the real image, not the base fill.
        ASSERT_NE(gen.challenge.image.at(x, y), lc::kSegmentedBase);
      }
    }
  }
}

TEST(GenerateChallenge, ReferenceSelfGradesForEveryKind) {
  for (auto kind : lc::kAllKinds) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const auto gen = lc::generate_challenge(lc::ChallengeSpec::defaults(kind, seed));
      const auto v = lc::grade(lc::make_trace(gen.truth.reference.points()), gen.truth);
      ASSERT_TRUE(v.pass) << lc::to_string(kind) << " seed " << seed;
    }
  }
}
