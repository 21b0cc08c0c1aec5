#pragma once

#include <string>

#include "walklab/types.hpp"

namespace walklab::numerics {

/// Dense convex QP
///
///   minimize    1/2 z' H z + f' z
///   subject to  Aeq z  = beq
///               Ain z <= bin
///               lb <= z <= ub
///
/// Empty matrices mean "no such constraints"; lb/ub may be empty or hold
/// +-infinity entries.
struct QpProblem {
  Matrix H;
  Vector f;
  Matrix Aeq;
  Vector beq;
  Matrix Ain;
  Vector bin;
  Vector lb;
  Vector ub;

  Eigen::Index num_vars() const { return f.size(); }
  /// Throws DimensionError on inconsistent sizes or a non-symmetric Hessian.
  void validate() const;
};

enum class QpStatus { Optimal, Infeasible, MaxIterations, Unbounded };

std::string to_string(QpStatus s);

struct KktResiduals {
  double stationarity = 0.0;
  double primal_feasibility = 0.0;
  double complementarity = 0.0;
  /// Most negative inequality/bound multiplier (0 when all are non-negative).
  double dual_feasibility = 0.0;
};

struct QpSolution {
  QpStatus status = QpStatus::MaxIterations;
  Vector z;
  Vector eq_multipliers;
  Vector ineq_multipliers;
  Vector lower_multipliers;
  Vector upper_multipliers;
  KktResiduals kkt;
  int iterations = 0;
  /// Diagonal shift added to reduced Hessians that were not positive definite.
  double regularization = 0.0;

  bool optimal() const { return status == QpStatus::Optimal; }
};

struct QpOptions {
  int max_iterations = 500;
  double feasibility_tol = 1e-9;
  double min_reduced_eigenvalue = 1e-10;
};

/// Primal active-set solver for small dense problems. A feasible start is
/// obtained from a phase-1 problem that minimizes the worst constraint
/// violation; a strictly positive minimum certifies infeasibility. Working-set
/// changes are deterministic (ties broken by lowest constraint index).
QpSolution solve_qp(const QpProblem& problem, const QpOptions& options = {});

/// KKT residuals of a candidate primal/dual pair against the original problem.
KktResiduals kkt_residuals(const QpProblem& problem, const QpSolution& sol);

}  // namespace walklab::numerics
