#pragma once

#include <string>

#include "walklab/hybrid/hybrid.hpp"
#include "walklab/numerics/newton.hpp"

namespace walklab::poincare {

enum class Verdict { Stable, Marginal, Unstable };
std::string to_string(Verdict v);

struct FixedPointReport {
  bool converged = false;
  Vector x_star;
  double residual = 0.0;  // |P(x*) - x*|
  Matrix jacobian;        // dP/dx at x*
  Eigen::VectorXcd eigenvalues;
  Vector magnitudes;      // sorted descending
  Verdict verdict = Verdict::Unstable;
  int newton_iterations = 0;
  std::string message;

  double max_magnitude() const { return magnitudes.size() ? magnitudes[0] : 0.0; }
};

struct PoincareOptions {
  hybrid::ExecOptions exec;
  numerics::NewtonOptions newton;
  double fd_abs_step = 1e-6;
  double fd_rel_step = 1e-6;
  double margin = 1e-3;
};

/// One full trip around the cycle, from the post-reset section of vertex 0
/// back to it.
Vector poincare_map(const hybrid::HybridSystemSpec& spec, const Vector& x,
                    const hybrid::ExecOptions& opt = {});

/// Central differences of the return map, column step
/// max(fd_abs_step, fd_rel_step * |x_i|).
Matrix linearize_map(const hybrid::HybridSystemSpec& spec, const Vector& x_star,
                     const PoincareOptions& opt = {});

Verdict classify(const Eigen::VectorXcd& eigenvalues, double margin = 1e-3);

/// Damped Newton on P(x) - x followed by linearization and classification.
/// Failures are reported through `converged`/`message` rather than thrown.
FixedPointReport find_fixed_point(const hybrid::HybridSystemSpec& spec, const Vector& guess,
                                  const PoincareOptions& opt = {});

/// Fills jacobian, eigenvalues, magnitudes and verdict for a known x*.
void analyze(const hybrid::HybridSystemSpec& spec, FixedPointReport& report,
             const PoincareOptions& opt = {});

}  // namespace walklab::poincare
