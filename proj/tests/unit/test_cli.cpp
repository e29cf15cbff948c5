#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const fs::path kCases = PORFLOW_CASES_DIR;

std::string cli() {
  const char* p = std::getenv("PORFLOW_CLI");
  return p ? p : "";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const fs::path& dir) {
  const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "'" + cli() + "' " + args + " --quiet > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("porflow_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// tiny_8 with one section replaced.
fs::path tiny_variant(const fs::path& dir, const std::string& from, const std::string& to) {
  std::string text = slurp(kCases / "tiny_8.case");
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  text.replace(pos, from.size(), to);
  const fs::path p = dir / "variant.case";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("cli binary is available") {
  REQUIRE_MESSAGE(!cli().empty(), "PORFLOW_CLI must point at the porflow executable");
  CHECK(fs::exists(cli()));
}

TEST_CASE("simulate succeeds with a json status record") {
  if (cli().empty()) return;
  const auto dir = scratch_dir("ok");
  const auto r = run("simulate --config '" + (kCases / "tiny_8.case").string() + "' --out '" + dir.string() + "'", dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("\"status\":\"ok\"") != std::string::npos);
  CHECK(fs::exists(dir / "simulate" / "fields.csv"));
  CHECK(fs::exists(dir / "resolved.case"));
  fs::remove_all(dir);
}

TEST_CASE("config errors exit with 2") {
  if (cli().empty()) return;
  const auto dir = scratch_dir("config");
  SUBCASE("missing file") {
    CHECK(run("simulate --config '" + (dir / "nope.case").string() + "'", dir).code == 2);
  }
  SUBCASE("syntax error") {
    const auto p = tiny_variant(dir, "\"name\": \"tiny_8\",", "\"name\": tiny_8,");
    const auto r = run("simulate --config '" + p.string() + "' --out '" + dir.string() + "'", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("\"error\":\"ParseError\"") != std::string::npos);
  }
  SUBCASE("validation error") {
    const auto p = tiny_variant(dir, "\"nx\": 8", "\"nx\": -8");
    const auto r = run("simulate --config '" + p.string() + "' --out '" + dir.string() + "'", dir);
    CHECK(r.code == 2);
    CHECK(r.err.find("grid.nx") != std::string::npos);
  }
  SUBCASE("unknown subcommand") {
    CHECK(run("explode --config x", dir).code == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("newton failure exits with 3") {
  if (cli().empty()) return;
  const auto dir = scratch_dir("newton");
  const auto p = tiny_variant(dir, "\"seed\": 11", "\"seed\": 11, \"solver\": { \"max_newton_iters\": 1, \"max_step_cuts\": 0 }");
  const auto r = run("simulate --config '" + p.string() + "' --out '" + dir.string() + "'", dir);
  CHECK(r.code == 3);
  CHECK(r.err.find("NonConvergence") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("diverging training exits with 4") {
  if (cli().empty()) return;
  const auto dir = scratch_dir("diverge");
  const auto p = tiny_variant(dir, "\"max_epochs\": 40", "\"max_epochs\": 40, \"lr0\": 1e30");
  const auto r = run("train --config '" + p.string() + "' --out '" + dir.string() + "' --sigma 1e-9", dir);
  CHECK(r.code == 4);
  CHECK(r.err.find("DivergedTraining") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train then infer replays the training-time states") {
  if (cli().empty()) return;
  const auto dir = scratch_dir("replay");
  const std::string cfg = " --config '" + (kCases / "tiny_8.case").string() + "' --out '" + dir.string() + "'";
  REQUIRE(run("train" + cfg + " --max-epochs 5", dir).code == 0);
  REQUIRE(run("infer" + cfg, dir).code == 0);
  CHECK(slurp(dir / "train" / "fields.csv") == slurp(dir / "infer" / "fields.csv"));
  CHECK(run("infer" + cfg + " --checkpoints '" + (dir / "missing").string() + "'", dir).code == 1);
  fs::remove_all(dir);
}

}  // TEST_SUITE
