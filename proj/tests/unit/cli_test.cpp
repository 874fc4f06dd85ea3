#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "linecaptcha/json_io.hpp"

namespace fs = std::filesystem;
namespace lc = linecaptcha;
using lc::json;

namespace {

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(LINECAPTCHA_CLI) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, {}};
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("linecaptcha_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, GenThenGradeReference) {
  const auto gen = run("gen --kind segmented --seed 7 --out " + path("c.png") + " --truth " + path("t.json"));
  ASSERT_EQ(gen.exit_code, 0) << gen.out;
  EXPECT_EQ(json::parse(gen.out)["instruction"]["type"], "trace_line");
  ASSERT_TRUE(fs::exists(path("c.png")));

  const json truth = lc::read_json_file(path("t.json"));
  const auto pts = truth["reference"]["points"].get<std::vector<lc::Point>>();
  lc::write_json_file(path("trace.json"), lc::make_trace(pts));

  const auto graded = run("grade --truth " + path("t.json") + " --trace " + path("trace.json"));
  EXPECT_EQ(graded.exit_code, 0) << graded.out;
  EXPECT_EQ(json::parse(graded.out)["pass"], true);
}

TEST_F(CliTest, ScribbleFailsWithExitOne) {
  ASSERT_EQ(run("gen --kind blurred --seed 3 --out " + path("c.png") + " --truth " + path("t.json")).exit_code, 0);
  std::vector<lc::Point> scribble;
  for (int i = 0; i < 20; ++i) scribble.push_back({10.0 + 5 * i, i % 2 ? 20.0 : 180.0});
  lc::write_json_file(path("trace.json"), lc::make_trace(scribble));
  const auto graded = run("grade --truth " + path("t.json") + " --trace " + path("trace.json"));
  EXPECT_EQ(graded.exit_code, 1);
  EXPECT_EQ(json::parse(graded.out)["pass"], false);
}

TEST_F(CliTest, SameSeedSamePng) {
  ASSERT_EQ(run("gen --kind multiline --seed 9 --out " + path("a.png") + " --truth " + path("a.json")).exit_code, 0);
  ASSERT_EQ(run("gen --kind multiline --seed 9 --out " + path("b.png") + " --truth " + path("b.json")).exit_code, 0);
  EXPECT_EQ(lc::read_file(path("a.png")), lc::read_file(path("b.png")));
}

TEST_F(CliTest, AttackReportsJson) {
  const auto r = run("attack --attacker synthetic_human --jitter 0 --kind blurred --trials 10 --pool 5 --seed 1 --json");
  ASSERT_EQ(r.exit_code, 0) << r.out;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["trials"], 10);
  EXPECT_EQ(j["successes"], 10);
  EXPECT_EQ(j["kind"], "blurred");
}

TEST_F(CliTest, BadArgumentsFail) {
  EXPECT_NE(run("gen --kind wavy --seed 1").exit_code, 0);
  EXPECT_NE(run("attack --attacker nobody --kind blurred --trials 1").exit_code, 0);
  EXPECT_NE(run("").exit_code, 0);
}
