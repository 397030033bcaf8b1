// mim: command line front end for the multi-index model pipelines.
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <new>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mim/io.hpp"
#include "mim/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kResource = 4 };

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  bool strict = false;
};

int run(const std::string& name, const std::function<mim::CommandResult(const mim::RunConfig&)>& cmd,
        const Flags& f) {
  mim::RunConfig c;
  try {
    if (!f.config.empty()) c = mim::load_run_config(f.config);
    if (!f.out.empty()) c.out = f.out;
    if (f.seed) c.mc.seed = *f.seed;
    if (f.workers) c.mc.workers = *f.workers;
    c.validate();
  } catch (const mim::ResourceError& e) {
    std::fprintf(stderr, "resource limit: %s\n", e.what());
    return kResource;
  } catch (const mim::Error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  }

  mim::CommandResult r;
  try {
    std::filesystem::create_directories(c.out);
    r = cmd(c);
    mim::write_checks(c.out, r);
    mim::write_manifest(c.out, name, mim::to_json(c), {{"strict", f.strict}});
  } catch (const mim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const mim::ResourceError& e) {
    std::fprintf(stderr, "resource limit: %s\n", e.what());
    return kResource;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "resource limit: out of memory\n");
    return kResource;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "resource limit: %s\n", e.what());
    return kResource;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  }

  for (const auto& ch : r.checks) {
    const char* status = ch.passed ? "PASS" : (ch.hard || f.strict ? "FAIL" : "WARN");
    std::printf("%s [%s] %s%s%s\n", status, ch.hard ? "hard" : "soft", ch.name.c_str(), ch.detail.empty() ? "" : ": ",
                ch.detail.c_str());
  }
  if (!r.hard_ok()) return kNumerical;
  if (f.strict && !r.soft_ok()) return kNumerical;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-index models of a singular SPDE: enumeration, construction, Monte Carlo studies"};
  app.require_subcommand(1);
  Flags f;
  const std::map<std::string, std::pair<std::string, std::function<mim::CommandResult(const mim::RunConfig&)>>>
      commands{
          {"enumerate", {"List the populated multi-indices below the cutoffs", mim::cmd_enumerate}},
          {"calibrate", {"Calibrate the counterterms along the tau ladder", mim::cmd_calibrate}},
          {"build", {"Build one model sample and its verification report", mim::cmd_build}},
          {"mc", {"Moments and scaling exponents at one tau", mim::cmd_mc}},
          {"converge", {"Counterterm divergence and Cauchy study along the tau ladder", mim::cmd_converge}},
          {"universality", {"Two-ensemble comparison and spectral gap diagnostic", mim::cmd_universality}},
          {"verify", {"Exact model identities on one sample", mim::cmd_verify}},
      };
  std::string chosen;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", f.config, "JSON config (comments allowed)")->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Seed (overrides mc.seed)");
    sub->add_option("--workers", f.workers, "Worker threads (overrides mc.workers)");
    sub->add_flag("--strict", f.strict, "Statistical checks are fatal");
    sub->callback([&chosen, name = name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }
  return run(chosen, commands.at(chosen).second, f);
}
