#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "walklab/io/logs.hpp"
#include "walklab/scenario/scenario.hpp"

using walklab::Matrix;
using walklab::Vector;
using namespace walklab::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("walklab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

walklab::hybrid::HybridTrajectory two_arcs() {
  walklab::hybrid::HybridTrajectory tr;
  for (int a = 0; a < 2; ++a) {
    walklab::hybrid::Arc arc;
    arc.t0 = a;
    for (int k = 0; k <= 4; ++k) {
      arc.t.push_back(a + 0.25 * k);
      arc.x.push_back((Vector(4) << 0.1 * k, -0.1 * k, 1.0 / 3.0, a).finished());
      walklab::hybrid::SampleInfo info;
      info.u = Vector::Constant(1, std::sqrt(2.0) * k);
      arc.info.push_back(info);
    }
    walklab::hybrid::EventRecord ev;
    ev.t = a + 1.0;
    ev.pre = arc.x.back();
    ev.post = (Vector(4) << -0.4, 0.4, 0.7, 0.1).finished();
    arc.event = ev;
    tr.arcs.push_back(arc);
  }
  return tr;
}

LogLayout compass_layout() {
  LogLayout lay;
  lay.nq = 2;
  lay.nu = 1;
  lay.nl = 2;
  lay.extras = {"energy"};
  return lay;
}

}  // namespace

TEST(Numbers, SeventeenDigitRoundTripIsExact) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_TRUE(same_bits(parse_number(format_number(v)), v)) << format_number(v);
    ++checked;
  }
  for (double v : {0.0, -0.0, 1e-320, 0.1, 1.0 / 3.0, 1e308})
    EXPECT_TRUE(same_bits(parse_number(format_number(v)), v));
  EXPECT_TRUE(std::isnan(parse_number(format_number(NAN))));
  EXPECT_EQ(parse_number(format_number(-INFINITY)), -INFINITY);
  EXPECT_THROW(parse_number("1.5x"), walklab::ConfigError);
  EXPECT_THROW(parse_number(""), walklab::ConfigError);
}

TEST(Csv, HeaderOrder) {
  LogLayout lay = compass_layout();
  lay.ny = 1;
  const std::vector<std::string> h{"t",        "q_0",      "q_1", "dq_0",  "dq_1",
                                   "u_0",      "lambda_0", "lambda_1",     "y_0",
                                   "V",        "delta",    "energy",       "event"};
  EXPECT_EQ(lay.header(), h);
}

TEST(Csv, EmptyTrajectoryIsHeaderOnly) {
  const auto dir = scratch("empty");
  const auto table = trajectory_table({}, compass_layout());
  EXPECT_TRUE(table.rows.empty());
  write_csv((dir / "t.csv").string(), table);
  const std::string text = slurp(dir / "t.csv");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_EQ(read_csv((dir / "t.csv").string()).header, compass_layout().header());
}

TEST(Csv, EventsArePrePostPairs) {
  const auto table = trajectory_table(two_arcs(), compass_layout());
  const std::size_t ev = table.column("event"), t = table.column("t");
  ASSERT_EQ(table.rows.size(), 11u);
  std::vector<int> flags;
  for (const auto& r : table.rows) flags.push_back(static_cast<int>(r[ev]));
  const std::vector<int> expected{0, 0, 0, 0, 1, 2, 0, 0, 0, 1, 2};
  EXPECT_EQ(flags, expected);
  EXPECT_EQ(table.rows[4][t], table.rows[5][t]);
  EXPECT_EQ(table.rows[9][t], table.rows[10][t]);
  // Reset state on the post row; fields not logged are nan.
  EXPECT_EQ(table.rows[10][table.column("q_0")], -0.4);
  EXPECT_TRUE(std::isnan(table.rows[0][table.column("lambda_0")]));
  EXPECT_TRUE(std::isnan(table.rows[0][table.column("energy")]));
}

TEST(Csv, RoundTripIsBitExact) {
  const auto dir = scratch("roundtrip");
  const auto table = trajectory_table(two_arcs(), compass_layout());
  write_csv((dir / "t.csv").string(), table);
  const auto back = read_csv((dir / "t.csv").string());
  ASSERT_EQ(back.header, table.header);
  ASSERT_EQ(back.rows.size(), table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    for (std::size_t j = 0; j < table.rows[i].size(); ++j) {
      const double a = table.rows[i][j], b = back.rows[i][j];
      EXPECT_TRUE(same_bits(a, b) || (std::isnan(a) && std::isnan(b)));
    }
  std::ofstream(dir / "bad.csv") << "t,x\n1,2,3\n";
  EXPECT_THROW(read_csv((dir / "bad.csv").string()), walklab::ConfigError);
  EXPECT_THROW(table.column("nope"), walklab::ConfigError);
}

TEST(Json, NumbersKeysAndArrays) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["b"] = 0.1;
  j["a"] = std::nan("");
  j["v"] = to_json((Vector(3) << 1.0 / 3.0, 2.0, -1e-300).finished());
  const std::string text = dump_json(j);
  EXPECT_NE(text.find("\"b\": 0.10000000000000001"), std::string::npos);
  EXPECT_NE(text.find("\"a\": null"), std::string::npos);
  EXPECT_LT(text.find("\"b\""), text.find("\"a\""));  // insertion order
  EXPECT_NE(text.find("[0.33333333333333331, 2, -1e-300]"), std::string::npos);
  const Json back = Json::parse(text);
  EXPECT_EQ(back["b"].get<double>(), 0.1);
}

TEST(Json, MatrixIsRowMajor) {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Json j = to_json(m);
  EXPECT_EQ(j.dump(), "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
  EXPECT_EQ(matrix_from_json(j), m);
  EXPECT_THROW(matrix_from_json(Json::parse("[[1,2],[3]]")), walklab::ConfigError);
  EXPECT_THROW(vector_from_json(Json::parse("[1,\"x\"]")), walklab::ConfigError);
}

namespace sc = walklab::scenario;

TEST(Config, StrictParsing) {
  auto parse = [](const char* text) { return sc::parse_config(Json::parse(text)); };
  EXPECT_NO_THROW(parse(R"({"schema_version": 1, "scenario": "lipm-zmp"})"));
  EXPECT_THROW(parse(R"({"scenario": "lipm-zmp"})"), walklab::ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 2, "scenario": "lipm-zmp"})"), walklab::ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "scenario": "moonwalk"})"), walklab::ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "scenario": "lipm-zmp", "sed": 3})"),
               walklab::ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "scenario": "lipm-zmp", "seed": -1})"),
               walklab::ConfigError);
  EXPECT_THROW(parse(R"({"schema_version": 1, "scenario": "lipm-zmp", "model": 3})"),
               walklab::ConfigError);
  const auto cfg = parse(R"({"schema_version": 1, "scenario": "clf-track", "seed": 4,
                             "tolerances": {"abs": 1e-9}, "controller": {"eps": 0.05}})");
  EXPECT_EQ(cfg.seed, 4u);
  ASSERT_TRUE(cfg.tol.has_value());
  EXPECT_EQ(cfg.tol->rel, 1e-9);
}

TEST(Config, SectionsAreValidatedPerScenario) {
  auto check = [](const char* text) { sc::validate_config(sc::parse_config(Json::parse(text))); };
  EXPECT_NO_THROW(check(R"({"schema_version": 1, "scenario": "passive-compass"})"));
  EXPECT_THROW(check(R"({"schema_version": 1, "scenario": "passive-compass", "model": {"m": -5}})"),
               walklab::ConfigError);
  EXPECT_THROW(check(R"({"schema_version": 1, "scenario": "clf-track", "controller": {"kp": 1}})"),
               walklab::ConfigError);
  EXPECT_THROW(check(R"({"schema_version": 1, "scenario": "lipm-zmp", "run": {"steps": 0}})"),
               walklab::ConfigError);
  EXPECT_THROW(check(R"({"schema_version": 1, "scenario": "hzd-compass-track",
                         "controller": {"type": "magic"}})"),
               walklab::ConfigError);
  EXPECT_THROW(check(R"({"schema_version": 1, "scenario": "slip-orbit",
                         "model": {"running": {"aoa_deg": "steep"}}})"),
               walklab::ConfigError);
  for (const auto& name : sc::scenario_names()) {
    const std::string text = R"({"schema_version": 1, "scenario": ")" + name + "\"}";
    EXPECT_NO_THROW(check(text.c_str())) << name;
  }
}

TEST(Scenario, RunIsDeterministicAndWritesSchema) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  auto cfg = sc::parse_config(Json::parse(R"({"schema_version": 1, "scenario": "lipm-zmp"})"));
  cfg.output_dir = a.string();
  const auto sa = sc::run_scenario(cfg);
  cfg.output_dir = b.string();
  const auto sb = sc::run_scenario(cfg);
  ASSERT_TRUE(sa.success) << sa.message;
  for (const char* f : {"summary.json", "trajectory.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  const Json summary = read_json((a / "summary.json").string());
  EXPECT_EQ(summary["schema_version"], kSchemaVersion);
  EXPECT_EQ(summary["scenario"], "lipm-zmp");
  EXPECT_FALSE(summary.contains("wall_time"));
  EXPECT_TRUE(fs::exists(a / "timing.json"));
  EXPECT_GE(summary["metrics"]["min_zmp_margin"].get<double>(), 0.0);
}

TEST(Scenario, SolverFailureIsReported) {
  const auto dir = scratch("fail");
  auto cfg = sc::parse_config(Json::parse(
      R"({"schema_version": 1, "scenario": "slip-orbit", "run": {"apex_guess": 0.3}})"));
  cfg.output_dir = dir.string();
  const auto s = sc::run_scenario(cfg);
  EXPECT_FALSE(s.success);
  EXPECT_FALSE(s.message.empty());
  EXPECT_FALSE(read_json((dir / "summary.json").string())["success"].get<bool>());
}
