#pragma once

#include <functional>
#include <string>

#include "walklab/types.hpp"

namespace walklab::numerics {

/// Objective value plus equality (= 0) and inequality (<= 0) constraint values
/// at one point. Gait problems compute all three from a single simulation, so
/// they come back together.
struct NlpEvaluation {
  double objective = 0.0;
  Vector equalities;
  Vector inequalities;
};

struct NlpProblem {
  std::function<NlpEvaluation(const Vector&)> evaluate;
  Vector lower;  // empty or +-inf entries for unbounded
  Vector upper;
  Vector initial;

  /// Builds a problem from separate callbacks; either constraint callback may be empty.
  static NlpProblem from_callbacks(std::function<double(const Vector&)> objective,
                                   std::function<Vector(const Vector&)> equalities,
                                   std::function<Vector(const Vector&)> inequalities,
                                   Vector initial, Vector lower = {}, Vector upper = {});
};

enum class NlpMethod {
  AugmentedLagrangian,
  Sqp,  // QP subproblems on linearized constraints, L1 merit line search
};

struct NlpOptions {
  NlpMethod method = NlpMethod::AugmentedLagrangian;
  double constraint_tol = 1e-6;
  double optimality_tol = 1e-5;
  int max_outer_iterations = 40;
  int max_inner_iterations = 400;
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  double max_penalty = 1e9;
  double fd_step = 1e-6;
  double max_step = 1.0;  // largest per-coordinate step of one inner iteration
  int max_sqp_iterations = 200;
};

enum class NlpStatus { Converged, InfeasibleStall, MaxOuterIterations, EvaluationFailed };

std::string to_string(NlpStatus s);

struct NlpResult {
  NlpStatus status = NlpStatus::MaxOuterIterations;
  Vector z;
  NlpEvaluation at_solution;
  Vector eq_multipliers;
  Vector ineq_multipliers;
  double max_violation = 0.0;
  double projected_gradient = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  long evaluations = 0;
  std::string message;

  bool converged() const { return status == NlpStatus::Converged; }
};

/// Largest equality |c| or positive inequality part.
double max_violation(const NlpEvaluation& ev);

/// Augmented-Lagrangian outer loop. The inner solver is a bound-projected
/// quasi-Newton method: damped BFGS curvature for the objective plus a
/// Gauss-Newton model of the penalty terms, with an adaptive step cap.
///
/// With NlpMethod::Sqp each iteration instead solves a convex QP on the
/// linearized constraints (damped BFGS Lagrangian Hessian, box trust region)
/// and backtracks on an L1 merit. When the linearization is inconsistent the
/// QP only asks for a fraction of the violation to be removed.
///
/// Derivatives are central finite differences in both modes.
NlpResult solve_nlp(const NlpProblem& problem, const NlpOptions& options = {});

}  // namespace walklab::numerics
