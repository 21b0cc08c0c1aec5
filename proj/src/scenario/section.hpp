#pragma once

#include <set>
#include <string>
#include <vector>

#include "walklab/io/logs.hpp"

namespace walklab::scenario {

/// Strict reader over one JSON object: every key read is recorded and
/// finish() rejects the rest.
class Section {
 public:
  Section(const io::Json& j, std::string name);

  bool has(const std::string& key) const;
  double number(const std::string& key, double def);
  double positive(const std::string& key, double def);
  int integer(const std::string& key, int def, int min = 0);
  bool boolean(const std::string& key, bool def);
  std::string text(const std::string& key, const std::string& def,
                   const std::vector<std::string>& choices = {});
  Vector vector(const std::string& key, const Vector& def, Eigen::Index size = -1);
  Section sub(const std::string& key);
  void ignore(const std::string& key) { find(key); }
  void finish() const;

 private:
  const io::Json* find(const std::string& key);

  const io::Json& j_;
  std::string name_;
  std::set<std::string> used_;
};

}  // namespace walklab::scenario
