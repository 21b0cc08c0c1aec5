#pragma once

#include <functional>
#include <string>
#include <vector>

#include "walklab/types.hpp"

namespace walklab::numerics {

using ResidualFunction = std::function<Vector(const Vector&)>;

/// Central-difference Jacobian with per-coordinate step max(abs_step, rel_step*|x_i|).
Matrix fd_jacobian(const ResidualFunction& r, const Vector& x, double abs_step = 1e-6,
                   double rel_step = 1e-6);

struct NewtonOptions {
  double tol = 1e-10;
  int max_iterations = 50;
  int max_halvings = 20;
  double fd_abs_step = 1e-6;
  double fd_rel_step = 1e-6;
  /// Jacobians with reciprocal condition number below this are singular.
  double singular_rcond = 1e-14;
};

enum class NewtonStatus { Converged, MaxIterations, SingularJacobian, EvaluationFailed };

std::string to_string(NewtonStatus s);

struct NewtonStep {
  double residual_norm = 0.0;
  double damping = 1.0;
};

struct NewtonResult {
  NewtonStatus status = NewtonStatus::MaxIterations;
  Vector x;
  Vector residual;
  double residual_norm = 0.0;
  int iterations = 0;
  Matrix last_jacobian;
  std::vector<NewtonStep> log;
  std::string message;

  bool converged() const { return status == NewtonStatus::Converged; }
};

/// Damped Newton on r(x) = 0 with finite-difference Jacobians. Each step is
/// halved (up to max_halvings times) while the residual norm increases; if no
/// halving helps, the smallest step is taken anyway. Exceptions thrown by the
/// residual while probing are reported as EvaluationFailed.
NewtonResult newton_fd(const ResidualFunction& r, const Vector& x0, const NewtonOptions& opt = {});

}  // namespace walklab::numerics
