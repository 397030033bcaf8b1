#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mim/io.hpp"
#include "mim/pipeline.hpp"

using namespace mim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mim_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig tiny(const fs::path& out) {
  RunConfig c;
  c.grid = GridSpec{1, 64, 32, 1.0 / 16, 1.0};
  c.mc.n_samples = 6;
  c.mc.gamma_samples = 3;
  c.out = out.string();
  return c;
}

std::size_t csv_rows(const std::string& path) {
  std::ifstream is(path);
  std::size_t n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n - 1;
}

int run_cli(const std::string& args) {
  int st = std::system((std::string(MIM_CLI_PATH) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("config: comments, defaults, unknown keys, round trip") {
  fs::path d = scratch("config");
  write_text((d / "c.json").string(), "{\n  // grid\n  \"grid\": {\"N1\": 64}, /* block */ \"mc\": {\"seed\": 9}\n}\n");
  RunConfig c = load_run_config((d / "c.json").string());
  CHECK(c.grid.N1 == 64);
  CHECK(c.grid.N0 == GridSpec{}.N0);
  CHECK(c.mc.seed == 9);
  RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  CHECK_THROWS_AS(run_config_from_json({{"grdi", nlohmann::json::object()}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"params", {{"alpah", 0.4}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"mc", {{"n_samples", "many"}}}}), ConfigError);
  write_text((d / "broken.json").string(), "{ \"grid\": ");
  CHECK_THROWS_AS(load_run_config((d / "broken.json").string()), ConfigError);
}

TEST_CASE("config: cross-field validation") {
  RunConfig c = tiny(scratch("validate"));
  CHECK_NOTHROW(c.validate());
  RunConfig bad = c;
  bad.mc.n_samples = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mc.probe_radii = {0.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mc.tau_ladder = {1e-3, 1e-12, 1e-13};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.max_grid_points = 100;
  CHECK_THROWS_AS(bad.validate(), ResourceError);
  bad = c;
  bad.params.d = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("enumerate") {
  RunConfig c = tiny(scratch("enumerate"));
  auto r = cmd_enumerate(c);
  CHECK(r.hard_ok());
  CHECK(csv_rows(c.out + "/enumerate.csv") == enumerate_populated(c.params, c.ordering).size());

  c.params.homogeneity_cutoff = c.params.alpha + 1e-6;
  c.params.ordinal_cutoff = 0.4;
  cmd_enumerate(c);
  CHECK(csv_rows(c.out + "/enumerate.csv") == 1);
  std::string text = read_text(c.out + "/enumerate.csv");
  CHECK(text.substr(text.find('\n') + 1, 2) == "0,");
}

TEST_CASE("build needs a calibration") {
  RunConfig c = tiny(scratch("build"));
  try {
    cmd_build(c);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("calibrate") != std::string::npos);
  }
  CHECK(cmd_calibrate(c).hard_ok());
  auto r = cmd_build(c);
  CHECK(r.hard_ok());
  CHECK(fs::exists(c.out + "/report.json"));
  std::string first = read_text(c.out + "/model/pi_k1.bin");
  cmd_build(c);
  CHECK(read_text(c.out + "/model/pi_k1.bin") == first);
}

TEST_CASE("mc output does not depend on the worker count") {
  RunConfig a = tiny(scratch("mc1")), b = tiny(scratch("mc3"));
  b.mc.workers = 3;
  CHECK(cmd_mc(a).hard_ok());
  CHECK(cmd_mc(b).hard_ok());
  for (const char* f : {"/moments.csv", "/exponents.csv"}) CHECK(read_text(a.out + f) == read_text(b.out + f));
}

TEST_CASE("converge emits one row per (beta, rung pair)") {
  RunConfig c = tiny(scratch("converge"));
  auto r = cmd_converge(c);
  CHECK(r.hard_ok());
  std::size_t betas = 0;
  auto U = make_universe(c.params, c.ordering);
  for (const auto& b : U->indices())
    if (!b.is_purely_polynomial() && homogeneity(b, c.params) < 2) ++betas;
  CHECK(csv_rows(c.out + "/cauchy.csv") == betas * (c.mc.taus(c.grid).size() - 1));
  CHECK(fs::exists(c.out + "/finite_volume.json"));
}

TEST_CASE("verify passes every exact check on a tiny grid") {
  RunConfig c = tiny(scratch("verify"));
  auto r = cmd_verify(c);
  for (const auto& ch : r.checks) {
    CAPTURE(ch.name);
    CAPTURE(ch.detail);
    CHECK(ch.passed);
  }
}

TEST_CASE("cli exit codes and manifest") {
  fs::path d = scratch("cli");
  write_text((d / "tiny.json").string(),
             "{\"grid\": {\"N0\": 64, \"N1\": 32}, \"mc\": {\"n_samples\": 4, \"gamma_samples\": 3}}");
  write_text((d / "unknown.json").string(), "{\"grid\": {\"N2\": 64}}");
  write_text((d / "huge.json").string(), "{\"limits\": {\"max_grid_points\": 1000}}");
  const std::string out = " --out " + (d / "o").string();
  CHECK(run_cli("enumerate" + out) == 0);
  CHECK(run_cli("verify --config " + (d / "tiny.json").string() + out) == 0);
  CHECK(run_cli("mc --config " + (d / "unknown.json").string() + out) == 2);
  CHECK(run_cli("mc --config " + (d / "huge.json").string() + out) == 4);
  CHECK(run_cli("build --config " + (d / "tiny.json").string() + " --out " + (d / "nocal").string()) == 2);
  CHECK(run_cli("nosuchcommand") == 2);

  auto m = nlohmann::json::parse(read_text((d / "o" / "manifest.json").string()));
  CHECK(m.at("command") == "verify");
  CHECK(m.at("files").at("checks.json") == git_blob_hash(read_text((d / "o" / "checks.json").string())));
  CHECK(m.at("config_hash") == git_blob_hash(read_text((d / "o" / "config.json").string())));
  // the echoed config reproduces the run
  RunConfig echo = load_run_config((d / "o" / "config.json").string());
  CHECK(echo.grid.N0 == 64);
}
