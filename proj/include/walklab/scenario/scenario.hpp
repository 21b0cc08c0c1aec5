#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "walklab/io/logs.hpp"
#include "walklab/numerics/integrator.hpp"

namespace walklab::scenario {

/// Parsed top-level document. Sections are kept as JSON and checked key by
/// key when the scenario is prepared; unknown keys anywhere are errors.
///
///   {
///     "schema_version": 1,
///     "scenario": "<name>",
///     "seed": 0,
///     "output_dir": "out",
///     "tolerances": {"abs": 1e-10, "rel": 1e-10},
///     "model": {...}, "controller": {...}, "run": {...}
///   }
struct ScenarioConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::optional<numerics::Tolerances> tol;  // scenario default when absent
  io::Json model = io::Json::object();
  io::Json controller = io::Json::object();
  io::Json run = io::Json::object();
};

const std::vector<std::string>& scenario_names();

/// Throws ConfigError on schema problems (including unknown keys).
ScenarioConfig parse_config(const io::Json& doc);
ScenarioConfig load_config(const std::string& path);

/// Parses every section the scenario reads and checks parameter ranges
/// without running anything.
void validate_config(const ScenarioConfig& cfg);

struct RunSummary {
  std::string scenario;
  bool success = true;
  std::string message;
  double wall_time = 0.0;
  io::Json metrics = io::Json::object();
  std::vector<std::string> files;

  /// Deterministic document (no wall time), written as summary.json.
  io::Json to_json() const;
};

/// Runs the pipeline and writes logs plus summary.json into output_dir (the
/// wall time goes to timing.json so summaries stay byte-identical across
/// runs). ConfigError for bad sections; solver failures are reported with
/// success = false.
RunSummary run_scenario(const ScenarioConfig& cfg);

/// Re-simulates a gait written by hzd-compass-opt.
RunSummary replay_gait(const std::string& gait_path, const std::string& output_dir,
                       const std::optional<numerics::Tolerances>& tol = {});

}  // namespace walklab::scenario
