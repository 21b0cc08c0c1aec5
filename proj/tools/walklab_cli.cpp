#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "walklab/errors.hpp"
#include "walklab/scenario/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Overrides {
  std::string out;
  std::optional<long long> seed;
  std::optional<double> tol;

  walklab::scenario::ScenarioConfig apply(walklab::scenario::ScenarioConfig cfg) const {
    if (!out.empty()) cfg.output_dir = out;
    if (seed) {
      if (*seed < 0) throw walklab::ConfigError("--seed: must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(*seed);
    }
    if (tol) cfg.tol = tolerances();
    return cfg;
  }

  std::optional<walklab::numerics::Tolerances> tolerances() const {
    if (!tol) return std::nullopt;
    if (!(*tol > 0.0)) throw walklab::ConfigError("--tol: must be positive");
    walklab::numerics::Tolerances t;
    t.abs = t.rel = *tol;
    return t;
  }
};

int report(const walklab::scenario::RunSummary& s, const std::string& dir) {
  std::cout << s.scenario << ": " << (s.success ? "ok" : "failed");
  if (!s.message.empty()) std::cout << " (" << s.message << ")";
  std::cout << "\nsummary: " << dir << "/summary.json\n";
  return s.success ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic walking laboratory"};
  app.require_subcommand(1);
  Overrides ov;
  std::string path;

  auto add_flags = [&](CLI::App* cmd, bool output) {
    if (output) cmd->add_option("--out", ov.out, "Output directory");
    cmd->add_option("--seed", ov.seed, "Random seed");
    cmd->add_option("--tol", ov.tol, "Absolute and relative solver tolerance");
  };
  auto* run = app.add_subcommand("run", "Run a scenario");
  run->add_option("config", path, "Scenario config (JSON)")->required();
  add_flags(run, true);
  auto* validate = app.add_subcommand("validate", "Check a scenario config");
  validate->add_option("config", path, "Scenario config (JSON)")->required();
  add_flags(validate, false);
  auto* replay = app.add_subcommand("replay", "Re-simulate an optimized gait");
  replay->add_option("gait", path, "gait.json")->required();
  replay->add_option("--out", ov.out, "Output directory");
  replay->add_option("--tol", ov.tol, "Absolute and relative solver tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  using namespace walklab;
  try {
    if (*validate) {
      const auto cfg = ov.apply(scenario::load_config(path));
      scenario::validate_config(cfg);
      std::cout << path << ": valid (" << cfg.scenario << ")\n";
      return kOk;
    }
    if (*run) {
      const auto cfg = ov.apply(scenario::load_config(path));
      return report(scenario::run_scenario(cfg), cfg.output_dir);
    }
    const std::string dir = ov.out.empty() ? "out" : ov.out;
    return report(scenario::replay_gait(path, dir, ov.tolerances()), dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return kFailed;
  }
}
