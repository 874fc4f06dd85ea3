#pragma once

// JSON forms of the public types (nlohmann/json). Timestamps are integer
// milliseconds since the Unix epoch; points are [x, y] pairs.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>  // nlohmann/json, vendored

#include "linecaptcha/attack_lab.hpp"
#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/geometry.hpp"
#include "linecaptcha/grader.hpp"
#include "linecaptcha/image.hpp"

namespace linecaptcha {

using json = nlohmann::json;

inline std::int64_t to_epoch_ms(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

inline TimePoint from_epoch_ms(std::int64_t ms) {
  return TimePoint(std::chrono::duration_cast<TimePoint::duration>(std::chrono::milliseconds(ms)));
}

inline void to_json(json& j, const Point& p) { j = json::array({p.x, p.y}); }
inline void from_json(const json& j, Point& p) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be [x, y]");
  p = {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline void to_json(json& j, const Rgb& c) { j = json::array({c.r, c.g, c.b}); }
inline void from_json(const json& j, Rgb& c) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("rgb must be [r, g, b]");
  auto channel = [&](int i) {
    const int v = j.at(i).get<int>();
    if (v < 0 || v > 255) throw std::invalid_argument("rgb channel outside 0-255");
    return static_cast<std::uint8_t>(v);
  };
  c = {channel(0), channel(1), channel(2)};
}

inline void to_json(json& j, ChallengeKind k) { j = std::string(to_string(k)); }
inline void from_json(const json& j, ChallengeKind& k) {
  const auto parsed = parse_kind(j.get<std::string>());
  if (!parsed) throw std::invalid_argument("unknown challenge kind: " + j.get<std::string>());
  k = *parsed;
}

template <typename T>
void to_json(json& j, const Range<T>& r) {
  j = json::array({r.min, r.max});
}
template <typename T>
void from_json(const json& j, Range<T>& r) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range must be [min, max]");
  r = {j.at(0).get<T>(), j.at(1).get<T>()};
}

inline void to_json(json& j, const ChallengeSpec& s) {
  j = {{"kind", s.kind},
       {"seed", s.seed},
       {"width", s.width},
       {"height", s.height},
       {"background_shape_count", s.background_shape_count},
       {"waypoint_count", s.waypoint_count},
       {"stroke_width", s.stroke_width},
       {"blur_sigma", s.blur_sigma},
       {"segment_len", s.segment_len},
       {"gap_len", s.gap_len},
       {"distractor_count", s.distractor_count},
       {"line_count", s.line_count},
       {"tension", s.tension}};
}

/// Missing fields keep the value already in `s`, so a partial object
/// overrides defaults.
inline void from_json(const json& j, ChallengeSpec& s) {
  s.kind = j.value("kind", s.kind);
  s.seed = j.value("seed", s.seed);
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.background_shape_count = j.value("background_shape_count", s.background_shape_count);
  s.waypoint_count = j.value("waypoint_count", s.waypoint_count);
  s.stroke_width = j.value("stroke_width", s.stroke_width);
  s.blur_sigma = j.value("blur_sigma", s.blur_sigma);
  s.segment_len = j.value("segment_len", s.segment_len);
  s.gap_len = j.value("gap_len", s.gap_len);
  s.distractor_count = j.value("distractor_count", s.distractor_count);
  s.line_count = j.value("line_count", s.line_count);
  s.tension = j.value("tension", s.tension);
}

inline void to_json(json& j, const InstructionHint& hint) {
  if (const auto* c = std::get_if<TraceColor>(&hint)) {
    j = {{"type", "trace_color"}, {"rgb", c->swatch}};
  } else {
    j = {{"type", "trace_line"}};
  }
}

inline void to_json(json& j, const Verdict& v) {
  j = {{"pass", v.pass},
       {"coverage", v.coverage},
       {"precision", v.precision},
       {"monotonicity", v.monotonicity},
       {"reason", std::string(to_string(v.reason))}};
}

inline void to_json(json& j, const Trace& t) {
  j = json::object();
  auto& pts = j["points"] = json::array();
  for (const auto& p : t.points) pts.push_back({{"x", p.x}, {"y", p.y}, {"t", p.t}});
}

/// Parses {"points": [{"x", "y", "t"}, ...]}. Any structural problem or
/// invalid value throws std::invalid_argument.
inline Trace parse_trace(const json& j) {
  if (!j.is_object() || !j.contains("points") || !j["points"].is_array()) {
    throw std::invalid_argument("trace must be an object with a points array");
  }
  Trace t;
  for (const auto& p : j["points"]) {
    if (!p.is_object()) throw std::invalid_argument("trace point must be an object");
    for (const char* key : {"x", "y", "t"}) {
      if (!p.contains(key) || !p[key].is_number()) {
        throw std::invalid_argument(std::string("trace point missing numeric ") + key);
      }
    }
    t.points.push_back({p["x"].get<double>(), p["y"].get<double>(), p["t"].get<double>()});
  }
  t.validate();
  return t;
}

inline void to_json(json& j, const EvalReport& r) {
  j = {{"kind", r.kind},
       {"attacker", r.attacker},
       {"trials", r.trials},
       {"successes", r.successes},
       {"success_rate", r.success_rate},
       {"wall_time_seconds", r.wall_time_seconds},
       {"seconds_per_attempt", r.seconds_per_attempt()}};
}

}  // namespace linecaptcha

namespace nlohmann {

template <>
struct adl_serializer<linecaptcha::Polyline> {
  static void to_json(json& j, const linecaptcha::Polyline& line) {
    j = {{"points", line.points()}, {"spacing", line.spacing()}};
  }
  static linecaptcha::Polyline from_json(const json& j) {
    return linecaptcha::Polyline(j.at("points").get<std::vector<linecaptcha::Point>>(),
                                 j.at("spacing").get<double>());
  }
};

template <>
struct adl_serializer<linecaptcha::GroundTruth> {
  static void to_json(json& j, const linecaptcha::GroundTruth& t) {
    j = {{"challenge_id", t.challenge_id},
         {"kind", t.kind},
         {"reference", t.reference},
         {"target_color", t.target_color ? json(*t.target_color) : json(nullptr)},
         {"image_width", t.image_width},
         {"image_height", t.image_height},
         {"seed", t.seed},
         {"created_at", linecaptcha::to_epoch_ms(t.created_at)}};
  }
  static linecaptcha::GroundTruth from_json(const json& j) {
    std::optional<linecaptcha::Rgb> target;
    if (j.contains("target_color") && !j["target_color"].is_null()) {
      target = j["target_color"].get<linecaptcha::Rgb>();
    }
    return {j.at("challenge_id").get<std::string>(),
            j.at("kind").get<linecaptcha::ChallengeKind>(),
            j.at("reference").get<linecaptcha::Polyline>(),
            target,
            j.at("image_width").get<int>(),
            j.at("image_height").get<int>(),
            j.at("seed").get<std::uint64_t>(),
            linecaptcha::from_epoch_ms(j.at("created_at").get<std::int64_t>())};
  }
};

}  // namespace nlohmann

namespace linecaptcha {

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return json::parse(f);
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << '\n';
}

}  // namespace linecaptcha
