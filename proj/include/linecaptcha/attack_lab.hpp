#pragma once

// Automated attackers and a synthetic human, plus a Monte Carlo harness
// that measures how often each one passes the grader.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/geometry.hpp"
#include "linecaptcha/grader.hpp"
#include "linecaptcha/image.hpp"
#include "linecaptcha/rng.hpp"

namespace linecaptcha {

struct RandomCurve {};
struct StraightLine {};
struct ColorClusterChain {};
struct SyntheticHuman {
  double jitter_sigma{2.0};
};
using Strategy = std::variant<RandomCurve, StraightLine, ColorClusterChain, SyntheticHuman>;

struct Attacker {
  std::string name;
  Strategy strategy;

  static Attacker random_curve() { return {"random_curve", RandomCurve{}}; }
  static Attacker straight_line() { return {"straight_line", StraightLine{}}; }
  static Attacker color_cluster_chain() { return {"color_cluster_chain", ColorClusterChain{}}; }
  static Attacker synthetic_human(double jitter_sigma) {
    if (!(jitter_sigma >= 0.0)) {
      throw std::invalid_argument("synthetic_human: jitter_sigma must be >= 0");
    }
    std::ostringstream name;
    name << "synthetic_human(" << jitter_sigma << ")";
    return {name.str(), SyntheticHuman{jitter_sigma}};
  }
};

struct EvalReport {
  ChallengeKind kind{ChallengeKind::BlurredLine};
  std::string attacker;
  std::int64_t trials{0};
  std::int64_t successes{0};
  double success_rate{0.0};
  double wall_time_seconds{0.0};

  double seconds_per_attempt() const {
    return trials > 0 ? wall_time_seconds / static_cast<double>(trials) : 0.0;
  }
};

// ---------------------------------------------------------------------------
// No-effort attackers

/// A guess drawn from the generator's own line distribution.
inline Trace random_curve_trace(Rng& rng, const ChallengeSpec& spec) {
  const GeneratedLine line = generate_line(rng, spec);
  return make_trace(line.reference.points());
}

inline Trace random_curve_trace(Rng& rng, int width, int height) {
  ChallengeSpec spec = ChallengeSpec::defaults(ChallengeKind::BlurredLine);
  spec.width = width;
  spec.height = height;
  return random_curve_trace(rng, spec);
}

/// Straight stroke from a random point on the left margin to one on the right.
inline Trace straight_line_trace(Rng& rng, int width, int height) {
  const Point a{kWaypointMargin, rng.uniform(kWaypointMargin, height - kWaypointMargin)};
  const Point b{width - kWaypointMargin, rng.uniform(kWaypointMargin, height - kWaypointMargin)};
  const Point ends[] = {a, b};
  return make_trace(resample(std::span<const Point>(ends), kReferenceSpacing).points());
}

// ---------------------------------------------------------------------------
// Color-separation attacker

struct ChainAttackParams {
  int levels_per_channel{16};
  std::size_t min_area{5};
  std::size_t max_area{800};
  double min_length{6.0};
  /// Components thicker than this (std-dev across the main axis) are not chords.
  double max_minor_std{1.6};
  double max_gap{24.0};
  double max_turn_deg{45.0};
};

/// A connected single-color blob that looks like a straight stroke.
struct ChordComponent {
  Point a;
  Point b;
  std::uint32_t color_class;

  double length() const { return distance(a, b); }
};

inline std::uint32_t color_class(Rgb c, int levels) {
  const int shift = 8 - static_cast<int>(std::log2(levels));
  return (static_cast<std::uint32_t>(c.r >> shift) << 16) |
         (static_cast<std::uint32_t>(c.g >> shift) << 8) | static_cast<std::uint32_t>(c.b >> shift);
}

/// Connected components of identical quantized color (4-connectivity),
/// keeping the ones whose principal-axis shape is a thin straight stroke.
inline std::vector<ChordComponent> extract_chord_components(const RasterImage& img,
                                                            const ChainAttackParams& params = {}) {
  const int w = img.width(), h = img.height();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<std::uint32_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = color_class(img.pixels()[i], params.levels_per_channel);

  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> members;
  std::vector<ChordComponent> out;
  for (std::size_t start = 0; start < n; ++start) {
    if (seen[start]) continue;
    const std::uint32_t key = cls[start];
    members.clear();
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      members.push_back(i);
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      const std::size_t nb[4] = {i - 1, i + 1, i - w, i + w};
      const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
      for (int k = 0; k < 4; ++k) {
        if (ok[k] && !seen[nb[k]] && cls[nb[k]] == key) {
          seen[nb[k]] = 1;
          stack.push_back(nb[k]);
        }
      }
    }
    if (members.size() < params.min_area || members.size() > params.max_area) continue;

    double mx = 0, my = 0;
    for (auto i : members) {
      mx += static_cast<double>(i % w);
      my += static_cast<double>(i / w);
    }
    const double cnt = static_cast<double>(members.size());
    mx /= cnt;
    my /= cnt;
    double sxx = 0, syy = 0, sxy = 0;
    for (auto i : members) {
      const double dx = static_cast<double>(i % w) - mx;
      const double dy = static_cast<double>(i / w) - my;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
    sxx /= cnt;
    syy /= cnt;
    sxy /= cnt;
    const double half_tr = 0.5 * (sxx + syy);
    const double root = std::sqrt(0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy);
    const double minor = std::max(0.0, half_tr - root);
    if (std::sqrt(minor) > params.max_minor_std) continue;
    const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
    const Point axis{std::cos(theta), std::sin(theta)};
    double lo = 0.0, hi = 0.0;
    for (auto i : members) {
      const double proj = (static_cast<double>(i % w) - mx) * axis.x +
                          (static_cast<double>(i / w) - my) * axis.y;
      lo = std::min(lo, proj);
      hi = std::max(hi, proj);
    }
    if (hi - lo < params.min_length) continue;
    const Point c{mx, my};
    out.push_back({c + lo * axis, c + hi * axis, key});
  }
  return out;
}

namespace detail {

inline double angle_between(Point u, Point v) {
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::acos(std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0));
}

// Greedy end-to-end chaining of one color class's chords.
class ChordChainer {
 public:
  ChordChainer(std::vector<ChordComponent> comps, const ChainAttackParams& params)
      : comps_(std::move(comps)), params_(params), cell_(std::max(1.0, params.max_gap)) {
    for (std::size_t i = 0; i < comps_.size(); ++i) {
      grid_[cell_key(comps_[i].a)].push_back(i);
      grid_[cell_key(comps_[i].b)].push_back(i);
    }
  }

  /// Longest chain found from any seed, as an ordered point path.
  std::pair<double, std::vector<Point>> longest() const {
    double best_len = -1.0;
    std::vector<Point> best;
    for (std::size_t s = 0; s < comps_.size(); ++s) {
      auto [len, path] = grow(s);
      if (len > best_len) {
        best_len = len;
        best = std::move(path);
      }
    }
    return {best_len, best};
  }

 private:
  struct Link {
    std::size_t index;
    Point near;
    Point far;
    double gap;
  };

  std::int64_t cell_key(Point p) const {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell_));
    return (cx << 32) ^ (cy & 0xffffffff);
  }

  std::optional<Link> best_link(Point end, Point dir, const std::vector<char>& used) const {
    const double max_turn = params_.max_turn_deg * std::numbers::pi / 180.0;
    std::optional<Link> best;
    double best_score = 0.0;
    const auto cx = static_cast<std::int64_t>(std::floor(end.x / cell_));
    const auto cy = static_cast<std::int64_t>(std::floor(end.y / cell_));
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = grid_.find(((cx + dx) << 32) ^ ((cy + dy) & 0xffffffff));
        if (it == grid_.end()) continue;
        for (std::size_t k : it->second) {
          if (used[k]) continue;
          const auto& c = comps_[k];
          for (int flip = 0; flip < 2; ++flip) {
            const Point near = flip ? c.b : c.a;
            const Point far = flip ? c.a : c.b;
            const double gap = distance(end, near);
            if (gap > params_.max_gap) continue;
            const double turn = angle_between(dir, far - near);
            if (turn > max_turn) continue;
            if (gap > 3.0 && angle_between(dir, near - end) > max_turn) continue;
            const double score = gap + 10.0 * turn;
            if (!best || score < best_score) {
              best_score = score;
              best = Link{k, near, far, gap};
            }
          }
        }
      }
    }
    return best;
  }

  std::pair<double, std::vector<Point>> grow(std::size_t seed) const {
    std::vector<char> used(comps_.size(), 0);
    used[seed] = 1;
    std::vector<Point> tail{comps_[seed].a, comps_[seed].b};
    std::vector<Point> head;  // built outward from the seed, reversed at the end
    double total = comps_[seed].length();
    extend(tail, used, total);
    head = {comps_[seed].b, comps_[seed].a};
    extend(head, used, total);
    std::vector<Point> path(head.rbegin(), head.rend() - 2);
    path.insert(path.end(), tail.begin(), tail.end());
    return {total, path};
  }

  void extend(std::vector<Point>& chain, std::vector<char>& used, double& total) const {
    while (true) {
      const Point end = chain.back();
      const Point dir = end - chain[chain.size() - 2];
      const auto link = best_link(end, dir, used);
      if (!link) return;
      used[link->index] = 1;
      chain.push_back(link->near);
      chain.push_back(link->far);
      total += link->gap + distance(link->near, link->far);
    }
  }

  std::vector<ChordComponent> comps_;
  ChainAttackParams params_;
  double cell_;
  std::unordered_map<std::int64_t, std::vector<std::size_t>> grid_;
};

}  // namespace detail

/// Color-separation attack: split the image into quantized color classes,
/// find straight chord-like blobs in each, chain them end to end under a
/// turn-angle bound, and trace the longest chain. With a TraceColor hint
/// only the class closest to the swatch is searched. Returns an empty trace
/// when nothing chord-like is found.
inline Trace color_cluster_chain(const RasterImage& image, const InstructionHint& instruction,
                                 const ChainAttackParams& params = {}) {
  auto comps = extract_chord_components(image, params);
  if (comps.empty()) return {};

  std::map<std::uint32_t, std::vector<ChordComponent>> by_class;
  for (const auto& c : comps) by_class[c.color_class].push_back(c);

  if (const auto* hint = std::get_if<TraceColor>(&instruction)) {
    const int shift = 8 - static_cast<int>(std::log2(params.levels_per_channel));
    const double half = 0.5 * (1 << shift);
    auto center_distance = [&](std::uint32_t key) {
      const double r = ((key >> 16) & 0xff) * (1 << shift) + half;
      const double g = ((key >> 8) & 0xff) * (1 << shift) + half;
      const double b = (key & 0xff) * (1 << shift) + half;
      return std::hypot(r - hint->swatch.r, g - hint->swatch.g, b - hint->swatch.b);
    };
    auto best = by_class.begin();
    for (auto it = by_class.begin(); it != by_class.end(); ++it) {
      if (center_distance(it->first) < center_distance(best->first)) best = it;
    }
    auto keep = std::move(best->second);
    by_class.clear();
    by_class.emplace(keep.front().color_class, std::move(keep));
  }

  double best_len = -1.0;
  std::vector<Point> best_path;
  for (auto& [key, members] : by_class) {
    auto [len, path] = detail::ChordChainer(std::move(members), params).longest();
    if (len > best_len) {
      best_len = len;
      best_path = std::move(path);
    }
  }
  if (best_path.size() < 2 || !(path_length(best_path) > 0.0)) return {};
  return make_trace(resample(std::span<const Point>(best_path), kReferenceSpacing).points());
}

// ---------------------------------------------------------------------------
// Synthetic human

/// Reference path plus per-point Gaussian jitter and a slow sinusoidal drift
/// (amplitude at most jitter_sigma), traced in a random direction and
/// clamped to the canvas like a real pointer.
inline Trace synthetic_human(const GroundTruth& truth, Rng& rng, double jitter_sigma) {
  if (!(jitter_sigma >= 0.0)) throw std::invalid_argument("synthetic_human: jitter_sigma < 0");
  const auto& ref = truth.reference.points();
  const double total = std::max(truth.reference.length(), 1.0);
  const double amp = jitter_sigma * rng.uniform();
  const double freq = rng.uniform(0.5, 2.0);
  const double phase_x = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double phase_y = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const bool reverse = rng.bernoulli(0.5);

  std::vector<Point> pts;
  pts.reserve(ref.size());
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (i > 0) s += distance(ref[i - 1], ref[i]);
    const double w = 2.0 * std::numbers::pi * freq * s / total;
    const double nx = rng.normal();
    const double ny = rng.normal();
    Point p{ref[i].x + jitter_sigma * nx + amp * std::sin(w + phase_x),
            ref[i].y + jitter_sigma * ny + amp * std::sin(w + phase_y)};
    p.x = std::clamp(p.x, 0.0, static_cast<double>(truth.image_width));
    p.y = std::clamp(p.y, 0.0, static_cast<double>(truth.image_height));
    pts.push_back(p);
  }
  if (reverse) std::reverse(pts.begin(), pts.end());

  Trace trace;
  trace.points.reserve(pts.size());
  double t = 0.0;
  for (const auto& p : pts) {
    trace.points.push_back({p.x, p.y, t});
    t += rng.uniform(6.0, 14.0);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Evaluation harness

namespace detail {

struct PoolEntry {
  GroundTruth truth;
  std::optional<RasterImage> image;
  InstructionHint instruction;
};

template <typename Fn>
void parallel_for(std::int64_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::int64_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

inline constexpr std::uint64_t kAttackStream = 0xA77AC;

}  // namespace detail

inline Trace attack_once(const Attacker& attacker, const detail::PoolEntry& entry, Rng& rng,
                         const ChallengeSpec& spec) {
  return std::visit(
      [&](const auto& s) -> Trace {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RandomCurve>) {
          return random_curve_trace(rng, spec.width, spec.height);
        } else if constexpr (std::is_same_v<S, StraightLine>) {
          return straight_line_trace(rng, spec.width, spec.height);
        } else if constexpr (std::is_same_v<S, ColorClusterChain>) {
          return color_cluster_chain(*entry.image, entry.instruction);
        } else {
          return synthetic_human(entry.truth, rng, s.jitter_sigma);
        }
      },
      attacker.strategy);
}

/// Generates `pool_size` challenges with seeds split from `master_seed`,
/// runs `trials` attempts round-robin over them and grades each with
/// `policy`. Per-attempt seeds are split from the master seed too, so the
/// report does not depend on `threads`.
inline EvalReport evaluate(const Attacker& attacker, const ChallengeSpec& spec, std::int64_t trials,
                           std::int64_t pool_size, std::uint64_t master_seed,
                           const GradingPolicy& policy = {}, unsigned threads = 0) {
  if (trials < 1) throw std::invalid_argument("evaluate: trials must be >= 1");
  if (pool_size < 1) throw std::invalid_argument("evaluate: pool size must be >= 1");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  const auto started = std::chrono::steady_clock::now();
  const bool needs_image = std::holds_alternative<ColorClusterChain>(attacker.strategy);

  std::vector<std::optional<detail::PoolEntry>> pool(static_cast<std::size_t>(pool_size));
  detail::parallel_for(pool_size, threads, [&](std::int64_t i) {
    ChallengeSpec s = spec;
    s.seed = derive_seed(master_seed, static_cast<std::uint64_t>(i));
    auto gen = generate_challenge(s);
    std::optional<RasterImage> image;
    if (needs_image) image = std::move(gen.challenge.image);
    pool[static_cast<std::size_t>(i)] =
        detail::PoolEntry{std::move(gen.truth), std::move(image), gen.challenge.instruction};
  });

  const std::uint64_t attack_seed = derive_seed(master_seed, detail::kAttackStream);
  std::vector<char> passed(static_cast<std::size_t>(trials), 0);
  detail::parallel_for(trials, threads, [&](std::int64_t j) {
    const auto& entry = *pool[static_cast<std::size_t>(j % pool_size)];
    Rng rng = Rng::derive(attack_seed, static_cast<std::uint64_t>(j));
    const Trace trace = attack_once(attacker, entry, rng, spec);
    passed[static_cast<std::size_t>(j)] = grade(trace, entry.truth, policy).pass ? 1 : 0;
  });

  EvalReport report;
  report.kind = spec.kind;
  report.attacker = attacker.name;
  report.trials = trials;
  report.successes = std::count(passed.begin(), passed.end(), 1);
  report.success_rate = static_cast<double>(report.successes) / static_cast<double>(trials);
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

/// Aligned-column text table, one row per report.
inline std::string format_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << std::left << std::setw(22) << "kind" << std::setw(26) << "attacker" << std::right
     << std::setw(9) << "trials" << std::setw(11) << "successes" << std::setw(11) << "rate"
     << std::setw(11) << "wall_s" << std::setw(13) << "ms/attempt" << '\n';
  for (const auto& r : reports) {
    os << std::left << std::setw(22) << to_string(r.kind) << std::setw(26) << r.attacker
       << std::right << std::setw(9) << r.trials << std::setw(11) << r.successes << std::setw(11)
       << std::fixed << std::setprecision(5) << r.success_rate << std::setw(11)
       << std::setprecision(3) << r.wall_time_seconds << std::setw(13) << std::setprecision(3)
       << 1000.0 * r.seconds_per_attempt() << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace linecaptcha
