#include "walklab/scenario/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "section.hpp"

namespace walklab::scenario {

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{
      "passive-compass", "hzd-compass-opt", "hzd-compass-track", "lipm-zmp",
      "capture-point",   "slip-orbit",      "clf-track",         "idqp-track"};
  return names;
}

Section::Section(const io::Json& j, std::string name) : j_(j), name_(std::move(name)) {
  if (!j_.is_object()) throw ConfigError(name_ + ": must be an object");
}

const io::Json* Section::find(const std::string& key) {
  used_.insert(key);
  const auto it = j_.find(key);
  return it == j_.end() ? nullptr : &*it;
}

bool Section::has(const std::string& key) const { return j_.contains(key); }

double Section::number(const std::string& key, double def) {
  const io::Json* v = find(key);
  if (!v) return def;
  if (!v->is_number()) throw ConfigError(name_ + "." + key + ": expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) throw ConfigError(name_ + "." + key + ": must be finite");
  return x;
}

double Section::positive(const std::string& key, double def) {
  const double x = number(key, def);
  if (!(x > 0.0)) throw ConfigError(name_ + "." + key + ": must be positive");
  return x;
}

int Section::integer(const std::string& key, int def, int min) {
  const io::Json* v = find(key);
  int x = def;
  if (v) {
    if (!v->is_number_integer()) throw ConfigError(name_ + "." + key + ": expected an integer");
    x = v->get<int>();
  }
  if (x < min)
    throw ConfigError(name_ + "." + key + ": must be at least " + std::to_string(min));
  return x;
}

bool Section::boolean(const std::string& key, bool def) {
  const io::Json* v = find(key);
  if (!v) return def;
  if (!v->is_boolean()) throw ConfigError(name_ + "." + key + ": expected true or false");
  return v->get<bool>();
}

std::string Section::text(const std::string& key, const std::string& def,
                          const std::vector<std::string>& choices) {
  const io::Json* v = find(key);
  std::string s = def;
  if (v) {
    if (!v->is_string()) throw ConfigError(name_ + "." + key + ": expected a string");
    s = v->get<std::string>();
  }
  if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
    std::string all;
    for (const auto& c : choices) all += (all.empty() ? "" : ", ") + c;
    throw ConfigError(name_ + "." + key + ": expected one of " + all);
  }
  return s;
}

Vector Section::vector(const std::string& key, const Vector& def, Eigen::Index size) {
  const io::Json* v = find(key);
  Vector x = def;
  if (v) {
    try {
      x = io::vector_from_json(*v);
    } catch (const ConfigError&) {
      throw ConfigError(name_ + "." + key + ": expected an array of numbers");
    }
  }
  if (size >= 0 && x.size() != size)
    throw ConfigError(name_ + "." + key + ": expected " + std::to_string(size) + " entries");
  if (!x.allFinite()) throw ConfigError(name_ + "." + key + ": entries must be finite");
  return x;
}

Section Section::sub(const std::string& key) {
  static const io::Json empty = io::Json::object();
  const io::Json* v = find(key);
  return Section(v ? *v : empty, name_ + "." + key);
}

void Section::finish() const {
  for (auto it = j_.begin(); it != j_.end(); ++it)
    if (!used_.count(it.key())) throw ConfigError(name_ + ": unknown key '" + it.key() + "'");
}

ScenarioConfig parse_config(const io::Json& doc) {
  Section top(doc, "config");
  ScenarioConfig cfg;
  if (!top.has("schema_version")) throw ConfigError("config: schema_version is required");
  if (top.integer("schema_version", 0, 0) != io::kSchemaVersion)
    throw ConfigError("config: unsupported schema_version (expected " +
                      std::to_string(io::kSchemaVersion) + ")");
  if (!top.has("scenario")) throw ConfigError("config: scenario is required");
  cfg.scenario = top.text("scenario", "", scenario_names());
  const int seed = top.integer("seed", 0, 0);
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.output_dir = top.text("output_dir", cfg.output_dir);
  if (top.has("tolerances")) {
    Section t = top.sub("tolerances");
    numerics::Tolerances tol;
    tol.abs = t.positive("abs", 1e-10);
    tol.rel = t.positive("rel", tol.abs);
    t.finish();
    cfg.tol = tol;
  }
  auto section = [&](const char* key, io::Json& dst) {
    if (!top.has(key)) {
      top.sub(key);
      return;
    }
    const io::Json& v = doc.at(key);
    if (!v.is_object()) throw ConfigError(std::string("config.") + key + ": must be an object");
    top.sub(key);
    dst = v;
  };
  section("model", cfg.model);
  section("controller", cfg.controller);
  section("run", cfg.run);
  top.finish();
  return cfg;
}

ScenarioConfig load_config(const std::string& path) { return parse_config(io::read_json(path)); }

io::Json RunSummary::to_json() const {
  io::Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["scenario"] = scenario;
  j["success"] = success;
  j["message"] = message;
  j["metrics"] = metrics;
  j["files"] = files;
  return j;
}

}  // namespace walklab::scenario
