#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "walklab/hybrid/hybrid.hpp"

namespace walklab::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// "%.17g"; non-finite values print as nan, inf, -inf.
std::string format_number(double v);
/// Inverse of format_number. Throws ConfigError on malformed text.
double parse_number(const std::string& s);

enum EventFlag { kSample = 0, kPreImpact = 1, kPostImpact = 2 };

/// Column layout of a trajectory log:
///   t, q_0.., dq_0.., u_0.., lambda_0.., y_0.., V, delta, <extras>, event
/// State columns come from the stacked (q, dq) sample.
struct LogLayout {
  int nq = 0;
  int nu = 0;
  int nl = 0;
  int ny = 0;
  std::vector<std::string> extras;

  std::vector<std::string> header() const;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Throws ConfigError if the column is absent.
  std::size_t column(const std::string& name) const;
};

/// One row per logged sample. Each impact appears as a pair of rows at the
/// event time: the last sample of the arc flagged pre, then the reset state
/// flagged post. Missing fields are written as nan.
CsvTable trajectory_table(const hybrid::HybridTrajectory& traj, const LogLayout& layout);

/// Appends one row in layout order.
void append_row(CsvTable& table, const LogLayout& layout, double t, const Vector& x,
                const hybrid::SampleInfo& info, int event);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

/// JSON text with every floating-point number printed by format_number and
/// object keys in insertion order. Non-finite numbers become null.
std::string dump_json(const Json& j, int indent = 2);
void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json to_json(const Matrix& m);  // row-major array of rows
Matrix matrix_from_json(const Json& j);

}  // namespace walklab::io
