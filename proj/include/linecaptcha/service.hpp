#pragma once

// Single-use challenge/verify service. Transport-independent: handlers take
// request bodies and return status + JSON, and http_server.hpp wires them
// to cpp-httplib routes.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "linecaptcha/challenge_gen.hpp"
#include "linecaptcha/grader.hpp"
#include "linecaptcha/image.hpp"
#include "linecaptcha/json_io.hpp"

namespace linecaptcha {

using Clock = std::function<TimePoint()>;

inline TimePoint system_now() { return std::chrono::system_clock::now(); }

inline std::uint64_t entropy_u64() {
  thread_local std::random_device device;
  return (static_cast<std::uint64_t>(device()) << 32) ^ static_cast<std::uint64_t>(device());
}

/// 128 bits from the OS entropy source, base64url without padding.
inline std::string random_token() {
  std::uint8_t bytes[16];
  for (int i = 0; i < 16; i += 8) {
    const std::uint64_t v = entropy_u64();
    for (int k = 0; k < 8; ++k) bytes[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return base64_encode(bytes, /*url_safe=*/true);
}

struct Session {
  std::string id;
  GroundTruth truth;
  std::vector<std::uint8_t> png;
  TimePoint issued_at;
  TimePoint expires_at;
  bool consumed{false};
};

enum class TakeStatus { Taken, NotFound, Expired, AlreadyConsumed };

struct TakeResult {
  TakeStatus status;
  std::optional<GroundTruth> truth;  // set when Taken
};

/// Storage behind the service. take_once must check and consume in one
/// atomic step.
class SessionStore {
 public:
  virtual ~SessionStore() = default;
  /// False when the store is at capacity even after dropping expired entries.
  virtual bool put(Session session, TimePoint now) = 0;
  virtual TakeResult take_once(const std::string& id, TimePoint now) = 0;
  /// PNG bytes of a pending (unconsumed, unexpired) session.
  virtual std::optional<std::vector<std::uint8_t>> image(const std::string& id,
                                                         TimePoint now) const = 0;
  virtual std::size_t sweep(TimePoint now) = 0;
  virtual std::size_t size() const = 0;
};

/// Consumed sessions stay as tombstones until they expire, so replays get
/// a distinct answer from unknown ids. Tombstones count toward capacity.
class InMemorySessionStore final : public SessionStore {
 public:
  explicit InMemorySessionStore(std::size_t capacity) : capacity_(capacity) {}

  bool put(Session session, TimePoint now) override {
    std::lock_guard lock(mutex_);
    if (sessions_.size() >= capacity_) sweep_locked(now);
    if (sessions_.size() >= capacity_) return false;
    std::string id = session.id;
    sessions_.insert_or_assign(std::move(id), std::move(session));
    return true;
  }

  TakeResult take_once(const std::string& id, TimePoint now) override {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) return {TakeStatus::NotFound, std::nullopt};
    Session& s = it->second;
    if (s.consumed) return {TakeStatus::AlreadyConsumed, std::nullopt};
    if (now >= s.expires_at) return {TakeStatus::Expired, std::nullopt};
    s.consumed = true;
    s.png = {};
    return {TakeStatus::Taken, s.truth};
  }

  std::optional<std::vector<std::uint8_t>> image(const std::string& id,
                                                 TimePoint now) const override {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end() || it->second.consumed || now >= it->second.expires_at) {
      return std::nullopt;
    }
    return it->second.png;
  }

  std::size_t sweep(TimePoint now) override {
    std::lock_guard lock(mutex_);
    return sweep_locked(now);
  }

  std::size_t size() const override {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  std::size_t sweep_locked(TimePoint now) {
    return std::erase_if(sessions_, [&](const auto& kv) { return now >= kv.second.expires_at; });
  }

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Session> sessions_;
};

struct ServiceConfig {
  std::string bind_address{"127.0.0.1:8080"};
  int ttl_seconds{120};
  std::size_t max_pending_sessions{10'000};
  bool dev_seed_allowed{false};
  std::map<ChallengeKind, ChallengeSpec> specs;

  ChallengeSpec spec_for(ChallengeKind kind) const {
    const auto it = specs.find(kind);
    ChallengeSpec s = it != specs.end() ? it->second : ChallengeSpec::defaults(kind);
    s.kind = kind;
    return s;
  }

  void validate() const {
    if (ttl_seconds <= 0) throw std::invalid_argument("ServiceConfig: ttl_seconds must be > 0");
    if (max_pending_sessions == 0) {
      throw std::invalid_argument("ServiceConfig: max_pending_sessions must be > 0");
    }
    for (const auto& [kind, spec] : specs) spec_for(kind).validate();
  }

  /// "host:port"; a bare host means port 8080.
  std::pair<std::string, int> host_port() const {
    const auto colon = bind_address.rfind(':');
    if (colon == std::string::npos) return {bind_address, 8080};
    return {bind_address.substr(0, colon), std::stoi(bind_address.substr(colon + 1))};
  }
};

/// Reads {"bind_address", "ttl_seconds", "max_pending_sessions",
/// "dev_seed_allowed", "specs": {"<kind>": {partial ChallengeSpec}}}.
inline ServiceConfig config_from_json(const json& j) {
  ServiceConfig c;
  c.bind_address = j.value("bind_address", c.bind_address);
  c.ttl_seconds = j.value("ttl_seconds", c.ttl_seconds);
  c.max_pending_sessions = j.value("max_pending_sessions", c.max_pending_sessions);
  c.dev_seed_allowed = j.value("dev_seed_allowed", c.dev_seed_allowed);
  if (j.contains("specs")) {
    for (const auto& [name, override_json] : j["specs"].items()) {
      const auto kind = parse_kind(name);
      if (!kind) throw std::invalid_argument("config: unknown kind " + name);
      ChallengeSpec s = ChallengeSpec::defaults(*kind);
      from_json(override_json, s);
      s.kind = *kind;
      c.specs[*kind] = s;
    }
  }
  c.validate();
  return c;
}

/// LINECAPTCHA_BIND_ADDRESS, LINECAPTCHA_TTL_SECONDS,
/// LINECAPTCHA_MAX_PENDING_SESSIONS and LINECAPTCHA_DEV_SEED_ALLOWED
/// override the file values.
inline void apply_env_overrides(ServiceConfig& c,
                                const std::function<const char*(const char*)>& getenv_fn =
                                    [](const char* k) { return std::getenv(k); }) {
  if (const char* v = getenv_fn("LINECAPTCHA_BIND_ADDRESS")) c.bind_address = v;
  if (const char* v = getenv_fn("LINECAPTCHA_TTL_SECONDS")) c.ttl_seconds = std::stoi(v);
  if (const char* v = getenv_fn("LINECAPTCHA_MAX_PENDING_SESSIONS")) {
    c.max_pending_sessions = static_cast<std::size_t>(std::stoull(v));
  }
  if (const char* v = getenv_fn("LINECAPTCHA_DEV_SEED_ALLOWED")) {
    const std::string s = v;
    c.dev_seed_allowed = (s == "1" || s == "true" || s == "yes");
  }
  c.validate();
}

class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct HttpReply {
  int status{200};
  std::string content_type{"application/json"};
  std::string body;
};

class ChallengeService {
 public:
  struct Issued {
    Challenge challenge;
    std::vector<std::uint8_t> png;
    std::optional<GroundTruth> dev_truth;  // only in dev mode
  };

  explicit ChallengeService(ServiceConfig config, Clock clock = system_now,
                            std::unique_ptr<SessionStore> store = nullptr)
      : config_(std::move(config)), clock_(std::move(clock)), store_(std::move(store)) {
    config_.validate();
    if (!store_) store_ = std::make_unique<InMemorySessionStore>(config_.max_pending_sessions);
  }

  const ServiceConfig& config() const { return config_; }
  std::size_t pending() const { return store_->size(); }

  Issued create_challenge(ChallengeKind kind, std::optional<std::uint64_t> dev_seed = {}) {
    if (dev_seed && !config_.dev_seed_allowed) {
      throw ServiceError(403, "seeded challenges are disabled");
    }
    const TimePoint now = clock_();
    if (store_->size() >= config_.max_pending_sessions && store_->sweep(now) == 0) {
      throw ServiceError(503, "too many pending challenges");
    }
    ChallengeSpec spec = config_.spec_for(kind);
    std::optional<GeneratedChallenge> gen;
    for (int attempt = 0; attempt < 3 && !gen; ++attempt) {
      spec.seed = dev_seed ? *dev_seed : entropy_u64();
      try {
        gen = generate_challenge(spec, now);
      } catch (const GenerationError&) {
        if (dev_seed) throw ServiceError(500, "generation failed for this seed");
      }
    }
    if (!gen) throw ServiceError(500, "generation failed");

    Session session{random_token(), std::move(gen->truth), encode_png(gen->challenge.image), now,
                    now + std::chrono::seconds(config_.ttl_seconds)};
    session.truth.challenge_id = session.id;
    Issued issued{std::move(gen->challenge), session.png, std::nullopt};
    issued.challenge.id = session.id;
    issued.challenge.expires_at = session.expires_at;
    if (config_.dev_seed_allowed) issued.dev_truth = session.truth;
    if (!store_->put(std::move(session), now)) {
      throw ServiceError(503, "too many pending challenges");
    }
    return issued;
  }

  /// The session is consumed before grading starts; every later call for
  /// the same id gets 409.
  Verdict verify(const std::string& id, const Trace& trace) {
    const TakeResult taken = store_->take_once(id, clock_());
    switch (taken.status) {
      case TakeStatus::NotFound: throw ServiceError(404, "unknown challenge");
      case TakeStatus::Expired: throw ServiceError(410, "challenge expired");
      case TakeStatus::AlreadyConsumed: throw ServiceError(409, "challenge already used");
      case TakeStatus::Taken: break;
    }
    return grade(trace, *taken.truth, policy_);
  }

  std::vector<std::uint8_t> image(const std::string& id) {
    auto png = store_->image(id, clock_());
    if (!png) throw ServiceError(404, "no pending challenge with this id");
    return std::move(*png);
  }

  std::size_t sweep_expired() { return store_->sweep(clock_()); }

  // JSON handlers ----------------------------------------------------------

  HttpReply handle_create(std::string_view body) {
    return guarded([&] {
      const json req = parse_body(body);
      if (!req.is_object() || !req.contains("kind") || !req["kind"].is_string()) {
        throw ServiceError(400, "body must contain a string kind");
      }
      const auto kind = parse_kind(req["kind"].get<std::string>());
      if (!kind) throw ServiceError(400, "unknown kind");
      std::optional<std::uint64_t> seed;
      if (req.contains("seed") && !req["seed"].is_null()) {
        if (!req["seed"].is_number_unsigned()) {
          throw ServiceError(400, "seed must be a non-negative integer");
        }
        seed = req["seed"].get<std::uint64_t>();
      }
      const Issued issued = create_challenge(*kind, seed);
      json out = {{"id", issued.challenge.id},
                  {"image_b64", base64_encode(issued.png)},
                  {"width", issued.challenge.image.width()},
                  {"height", issued.challenge.image.height()},
                  {"instruction", issued.challenge.instruction},
                  {"expires_at", to_epoch_ms(issued.challenge.expires_at)}};
      if (issued.dev_truth) out["truth"] = *issued.dev_truth;
      return HttpReply{200, "application/json", out.dump()};
    });
  }

  HttpReply handle_image(const std::string& id) {
    return guarded([&] {
      const auto png = image(id);
      return HttpReply{200, "image/png", std::string(png.begin(), png.end())};
    });
  }

  HttpReply handle_verify(std::string_view body) {
    return guarded([&] {
      const json req = parse_body(body);
      if (!req.is_object() || !req.contains("id") || !req["id"].is_string() ||
          !req.contains("trace")) {
        throw ServiceError(400, "body must contain id and trace");
      }
      Trace trace;
      try {
        trace = parse_trace(req["trace"]);
      } catch (const std::exception& e) {
        throw ServiceError(400, std::string("malformed trace: ") + e.what());
      }
      const Verdict v = verify(req["id"].get<std::string>(), trace);
      return HttpReply{200, "application/json", json(v).dump()};
    });
  }

  HttpReply handle_health() const { return {200, "application/json", R"({"status":"ok"})"}; }

 private:
  static json parse_body(std::string_view body) {
    json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ServiceError(400, "body is not valid JSON");
    return j;
  }

  template <typename Fn>
  static HttpReply guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const ServiceError& e) {
      return {e.status(), "application/json", json{{"error", e.what()}}.dump()};
    } catch (const std::invalid_argument& e) {
      return {400, "application/json", json{{"error", e.what()}}.dump()};
    } catch (const std::exception& e) {
      return {500, "application/json", json{{"error", "internal error"}}.dump()};
    }
  }

  ServiceConfig config_;
  Clock clock_;
  std::unique_ptr<SessionStore> store_;
  GradingPolicy policy_{};
};

}  // namespace linecaptcha
