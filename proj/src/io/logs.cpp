#include "walklab/io/logs.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace walklab::io {

namespace {

void put_block(std::vector<double>& row, const Vector& v, int n) {
  for (int i = 0; i < n; ++i)
    row.push_back(i < v.size() ? v[i] : std::numeric_limits<double>::quiet_NaN());
}

void dump(const Json& j, int indent, int depth, std::string& out) {
  const std::string pad = indent > 0 ? std::string(static_cast<std::size_t>(indent * (depth + 1)), ' ') : "";
  const std::string close = indent > 0 ? std::string(static_cast<std::size_t>(indent * depth), ' ') : "";
  const char* nl = indent > 0 ? "\n" : "";
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{";
      out += nl;
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) {
          out += ",";
          out += nl;
        }
        first = false;
        out += pad + Json(it.key()).dump() + (indent > 0 ? ": " : ":");
        dump(it.value(), indent, depth + 1, out);
      }
      out += nl + close + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      out += "[";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) out += nl + pad;
        dump(e, indent, depth + 1, out);
      }
      if (!flat) out += nl + close;
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? format_number(v) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("csv: bad number '" + s + "'");
  return v;
}

std::vector<std::string> LogLayout::header() const {
  std::vector<std::string> h{"t"};
  auto add = [&](const char* stem, int n) {
    for (int i = 0; i < n; ++i) h.push_back(std::string(stem) + "_" + std::to_string(i));
  };
  add("q", nq);
  add("dq", nq);
  add("u", nu);
  add("lambda", nl);
  add("y", ny);
  h.push_back("V");
  h.push_back("delta");
  h.insert(h.end(), extras.begin(), extras.end());
  h.push_back("event");
  return h;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ConfigError("csv: no column '" + name + "'");
}

void append_row(CsvTable& table, const LogLayout& layout, double t, const Vector& x,
                const hybrid::SampleInfo& info, int event) {
  if (x.size() != 2 * layout.nq) throw DimensionError("log: state size differs from layout");
  std::vector<double> row;
  row.reserve(table.header.size());
  row.push_back(t);
  put_block(row, x, 2 * layout.nq);
  put_block(row, info.u, layout.nu);
  put_block(row, info.lambda, layout.nl);
  put_block(row, info.y, layout.ny);
  row.push_back(info.V);
  row.push_back(info.delta);
  put_block(row, info.extras, static_cast<int>(layout.extras.size()));
  row.push_back(event);
  table.rows.push_back(std::move(row));
}

CsvTable trajectory_table(const hybrid::HybridTrajectory& traj, const LogLayout& layout) {
  CsvTable table;
  table.header = layout.header();
  bool after_event = false;
  for (const auto& arc : traj.arcs) {
    for (std::size_t k = 0; k < arc.t.size(); ++k) {
      int flag = kSample;
      if (k == 0 && after_event) flag = kPostImpact;
      if (k + 1 == arc.t.size() && arc.event) flag = kPreImpact;
      const hybrid::SampleInfo info = k < arc.info.size() ? arc.info[k] : hybrid::SampleInfo{};
      append_row(table, layout, arc.t[k], arc.x[k], info, flag);
    }
    after_event = arc.event.has_value();
  }
  if (!traj.arcs.empty() && traj.arcs.back().event) {
    const auto& ev = *traj.arcs.back().event;
    append_row(table, layout, ev.t, ev.post, {}, kPostImpact);
  }
  return table;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    f << (i ? "," : "") << table.header[i];
  f << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_number(row[i]);
    f << "\n";
  }
  if (!f) throw ConfigError("write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(f, line)) throw ConfigError("csv: missing header in " + path);
  table.header = split(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) throw ConfigError("csv: ragged row in " + path);
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(parse_number(c));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string dump_json(const Json& j, int indent) {
  std::string out;
  dump(j, indent, 0, out);
  return out;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << dump_json(j) << "\n";
  if (!f) throw ConfigError("write failed: " + path);
}

Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path);
  try {
    return Json::parse(f);
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vector(m.row(r).transpose())));
  return a;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty array of rows");
  const Vector first = vector_from_json(j[0]);
  Matrix m(static_cast<Eigen::Index>(j.size()), first.size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    if (row.size() != first.size()) throw ConfigError("matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

}  // namespace walklab::io
