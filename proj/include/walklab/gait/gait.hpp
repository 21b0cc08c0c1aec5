#pragma once

#include <string>

#include "walklab/hybrid/compass_walker.hpp"
#include "walklab/hzd/hzd.hpp"
#include "walklab/numerics/nlp.hpp"
#include "walklab/poincare/poincare.hpp"

namespace walklab::gait {

/// Closed-loop HZD gait for the hip-actuated compass. One output, the swing
/// leg angle, tracks a Bezier polynomial in the stance-leg phase
///   tau = (theta_st - theta_st(x*)) / (theta_sw(x*) - theta_st(x*)).
struct GaitProblem {
  model::CompassParams params;  // must be hip actuated
  int degree = 5;
  double friction_mu = 0.8;
  double u_max = 30.0;
  double hip_limit = 1.2;    // |theta_sw - theta_st|
  double step_length = 0.0;  // equality target when positive
  double eps = 0.1;
  double kp = 1.0;
  double kd = 2.0;
  bool positive_work_only = false;
  double torque_weight = 0.0;  // adds weight * int u^2 dt to the cost
  int samples = 80;
  double max_step_time = 3.0;
  numerics::Tolerances tol = [] {
    numerics::Tolerances t;
    t.abs = t.rel = 1e-12;
    return t;
  }();
  // Looser integration inside the optimizer's line searches and gradients;
  // the final projection and report use `tol`.
  numerics::Tolerances search_tol = [] {
    numerics::Tolerances t;
    t.abs = t.rel = 1e-10;
    return t;
  }();
};

struct GaitDecision {
  Vector x_star;  // post-impact (q, dq)
  Matrix alpha;   // 1 x (degree + 1)

  Vector pack() const;
  static GaitDecision unpack(const Vector& z, int degree);
};

hzd::VirtualConstraintSet virtual_constraints(const GaitProblem& prob, const GaitDecision& d);

/// Walker closed with the feedback-linearizing controller of a decision.
hybrid::HybridSystemSpec closed_loop_walker(const GaitProblem& prob, const GaitDecision& d);

struct GaitEvaluation {
  bool fell = false;
  std::string failure;
  hybrid::Arc arc;        // uniformly sampled step
  Vector periodicity;     // Delta(x^-) - x*
  Vector section_outputs; // (y, dy) at x*
  double hzd_y = 0.0, hzd_dy = 0.0;
  double min_friction_margin = 0.0;
  double max_torque = 0.0;
  double max_hip_angle = 0.0;
  double step_length = 0.0;
  double duration = 0.0;
  double cost = 0.0;       // M-COT
  double torque_integral = 0.0;  // int u^2 dt
};

GaitEvaluation evaluate_gait(const GaitProblem& prob, const GaitDecision& d);

/// int sum_i |u_i (B^T dq)_i| dt / (m_total g step_length) by the trapezoid rule
/// over the arc samples. Throws DimensionError for a zero step length.
double mcot_cost(const model::CompassParams& p, const hybrid::Arc& arc, double step_length,
                 bool positive_work_only = false);

struct GaitSolution {
  GaitDecision decision;
  numerics::NlpStatus status = numerics::NlpStatus::MaxOuterIterations;
  bool converged = false;
  GaitEvaluation evaluation;
  double cost = 0.0;
  double max_violation = 0.0;
  Vector restricted_eigenvalues;  // magnitudes on the zero dynamics
  Vector full_eigenvalues;        // magnitudes of the full closed-loop map
  int nlp_iterations = 0;
  long evaluations = 0;
  std::string message;
};

struct OptimizeOptions {
  numerics::NlpOptions nlp = [] {
    numerics::NlpOptions o;
    o.method = numerics::NlpMethod::Sqp;
    o.constraint_tol = 1e-8;
    o.optimality_tol = 1e-4;
    o.max_step = 0.2;
    return o;
  }();
  bool restore = false;  // Gauss-Newton projection onto the equalities before the NLP
  bool polish = true;   // and afterwards
  bool stability = true;
  bool proximal = false;  // minimize distance to the initial decision instead of the cost
};

GaitSolution optimize_gait(const GaitProblem& prob, const GaitDecision& initial,
                           const OptimizeOptions& opt = {});

/// Bezier fit of the swing angle along a sampled step, with the phase taken
/// from the stance angle between x*[0] and x*[1]. The two end coefficients at
/// each side match the sampled angle and velocity exactly; the interior ones
/// are least squares.
Matrix fit_bezier(const hybrid::Arc& arc, const Vector& x_star, int degree);

/// Magnitude of the derivative of the one-dimensional restricted return map
/// on the zero dynamics, parameterized by the stance-leg velocity at x*.
double restricted_eigenvalue(const GaitProblem& prob, const GaitDecision& d);

/// Projects a decision onto the periodicity and invariance equalities
/// (minimum-norm Gauss-Newton inside the decision bounds).
GaitDecision restore_gait(const GaitProblem& prob, const GaitDecision& initial);

/// Seed from a passive fixed point on `seed_slope`, then continue in slope to
/// prob.params.slope in `continuation_steps` optimizations. A positive target
/// step length is approached from the passive one along the way.
GaitSolution optimize_from_passive(const GaitProblem& prob, const Vector& passive_guess,
                                   double seed_slope, int continuation_steps,
                                   const OptimizeOptions& opt = {});

/// Flat-ground gait of the default hip-actuated compass (step length 0.2 m,
/// degree 5, eps 0.1) as returned by optimize_from_passive. Used to seed
/// tracking experiments without rerunning the optimizer.
GaitProblem reference_flat_problem();
GaitDecision reference_flat_gait();

}  // namespace walklab::gait
