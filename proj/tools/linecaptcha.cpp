// linecaptcha: generate, grade, attack and serve line-tracing challenges.
//
//   linecaptcha gen --kind segmented --seed 7 --out img.png --truth truth.json
//   linecaptcha grade --truth truth.json --trace trace.json
//   linecaptcha attack --attacker random_curve --kind blurred --trials 10000 --pool 500 --seed 1
//   linecaptcha serve --config service.json

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "linecaptcha/http_server.hpp"
#include "linecaptcha/linecaptcha.hpp"

namespace lc = linecaptcha;

namespace {

const std::vector<std::string> kKindNames = {"blurred", "segmented", "multicolor_segmented",
                                             "multiline"};

lc::ChallengeKind kind_named(const std::string& name) { return *lc::parse_kind(name); }

int run_gen(lc::ChallengeKind kind, std::uint64_t seed, int width, int height,
            const std::string& out, const std::string& truth_path) {
  auto spec = lc::ChallengeSpec::defaults(kind, seed);
  spec.width = width;
  spec.height = height;
  const auto gen = lc::generate_challenge(spec, lc::system_now());
  lc::write_file(out, lc::encode_png(gen.challenge.image));
  lc::write_json_file(truth_path, lc::json(gen.truth));
  std::cout << lc::json{{"id", gen.challenge.id}, {"instruction", gen.challenge.instruction}}.dump()
            << '\n';
  return 0;
}

int run_grade(const std::string& truth_path, const std::string& trace_path) {
  const auto truth = lc::read_json_file(truth_path).get<lc::GroundTruth>();
  const auto trace = lc::parse_trace(lc::read_json_file(trace_path));
  const lc::Verdict v = lc::grade(trace, truth);
  std::cout << lc::json(v).dump() << '\n';
  return v.pass ? 0 : 1;
}

lc::Attacker make_attacker(const std::string& name, double jitter) {
  if (name == "random_curve") return lc::Attacker::random_curve();
  if (name == "straight_line") return lc::Attacker::straight_line();
  if (name == "color_cluster_chain") return lc::Attacker::color_cluster_chain();
  if (name == "synthetic_human") return lc::Attacker::synthetic_human(jitter);
  throw CLI::ValidationError("--attacker", "unknown attacker " + name);
}

int run_attack(const std::string& attacker, double jitter, lc::ChallengeKind kind,
               std::int64_t trials, std::int64_t pool, std::uint64_t seed, bool as_json) {
  const auto report = lc::evaluate(make_attacker(attacker, jitter),
                                   lc::ChallengeSpec::defaults(kind), trials, pool, seed);
  if (as_json) {
    std::cout << lc::json(report).dump(2) << '\n';
  } else {
    std::cout << lc::format_table({report});
  }
  return 0;
}

std::atomic<httplib::Server*> g_server{nullptr};

int run_serve(const std::string& config_path) {
  lc::ServiceConfig config;
  if (!config_path.empty()) config = lc::config_from_json(lc::read_json_file(config_path));
  lc::apply_env_overrides(config);
  lc::ChallengeService service(config);

  httplib::Server server;
  lc::mount_routes(server, service);
  server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    std::clog << req.method << ' ' << req.path << ' ' << res.status << '\n';
  });

  std::mutex m;
  std::condition_variable cv;
  bool stopping = false;
  std::thread sweeper([&] {
    std::unique_lock lock(m);
    while (!cv.wait_for(lock, std::chrono::seconds(10), [&] { return stopping; })) {
      service.sweep_expired();
    }
  });

  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (auto* s = g_server.load()) s->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (auto* s = g_server.load()) s->stop();
  });

  const auto [host, port] = config.host_port();
  std::clog << "listening on " << host << ':' << port
            << (config.dev_seed_allowed ? " (dev mode)" : "") << '\n';
  const bool ok = server.listen(host, port);
  {
    std::lock_guard lock(m);
    stopping = true;
  }
  cv.notify_all();
  sweeper.join();
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line CAPTCHA generator, grader, attack harness and service"};
  app.require_subcommand(1);

  std::string kind;
  std::uint64_t seed = 0;

  auto* gen = app.add_subcommand("gen", "Generate a challenge image and its ground truth");
  std::string out = "challenge.png", truth_out = "truth.json";
  int width = 400, height = 200;
  gen->add_option("--kind", kind, "Challenge kind")
      ->required()
      ->check(CLI::IsMember(kKindNames));
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", out, "PNG output path");
  gen->add_option("--truth", truth_out, "Ground-truth JSON output path");
  gen->add_option("--width", width, "Canvas width")->check(CLI::Range(200, 4096));
  gen->add_option("--height", height, "Canvas height")->check(CLI::Range(100, 4096));

  auto* grade = app.add_subcommand("grade", "Grade a trace; exit 0 on pass, 1 on fail");
  std::string truth_in, trace_in;
  grade->add_option("--truth", truth_in, "Ground-truth JSON")->required()->check(CLI::ExistingFile);
  grade->add_option("--trace", trace_in, "Trace JSON")->required()->check(CLI::ExistingFile);

  auto* attack = app.add_subcommand("attack", "Run an attacker against generated challenges");
  std::string attacker = "random_curve";
  double jitter = 2.0;
  std::int64_t trials = 1000, pool = 100;
  bool as_json = false;
  attack->add_option("--attacker", attacker,
                     "random_curve | straight_line | color_cluster_chain | synthetic_human");
  attack->add_option("--jitter", jitter, "Jitter sigma for synthetic_human (px)");
  attack->add_option("--kind", kind, "Challenge kind")
      ->required()
      ->check(CLI::IsMember(kKindNames));
  attack->add_option("--trials", trials, "Number of attempts")->check(CLI::PositiveNumber);
  attack->add_option("--pool", pool, "Number of distinct challenges")->check(CLI::PositiveNumber);
  attack->add_option("--seed", seed, "Master seed");
  attack->add_flag("--json", as_json, "Print the report as JSON instead of a table");

  auto* serve = app.add_subcommand("serve", "Run the HTTP challenge service");
  std::string config_path;
  serve->add_option("--config", config_path, "Service config JSON")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen(kind_named(kind), seed, width, height, out, truth_out);
    if (*grade) return run_grade(truth_in, trace_in);
    if (*attack) return run_attack(attacker, jitter, kind_named(kind), trials, pool, seed, as_json);
    if (*serve) return run_serve(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
