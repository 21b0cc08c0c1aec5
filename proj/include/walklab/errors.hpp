#pragma once

#include <stdexcept>
#include <string>

namespace walklab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input vectors or matrices whose sizes do not match the model.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system (KKT, decoupling matrix, Jacobian) is singular or too
/// badly conditioned to solve.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// State handed to an impact/reset map does not lie on the guard.
class GuardError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  enum class Kind { NoEvent, Zeno, IntegratorFailure };

  SimulationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Numerical solver failure that is raised rather than reported via status.
class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace walklab
