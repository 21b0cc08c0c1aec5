#pragma once

#include "walklab/hzd/hzd.hpp"
#include "walklab/numerics/qp.hpp"

namespace walklab::control {

/// Diagonal gains. eps scales the output-space laws (pd_aux convention).
struct PdGains {
  Vector kp;
  Vector kd;
  double eps = 1.0;

  void validate(Eigen::Index n) const;
};

/// u = -Kp S (q - q_d) - Kd S (dq - dq_d), where S picks the actuated
/// coordinates (identity when empty).
Vector pd_joint(const GeneralizedState& s, const Vector& q_d, const Vector& dq_d,
                const PdGains& gains, const Matrix& selector = {});

enum class PdOutputMode { Inverse, Transpose };

/// Output-space PD through Y = H0 B, the Jacobian of the actual outputs with
/// respect to the input channels:  u = -Y^-1 (Kp y + Kd dy)  or  u = -Y' (Kp y + Kd dy).
/// Throws SingularError in inverse mode when Y is not square or is badly
/// conditioned.
Vector pd_output(const model::CompassParams& p, const hzd::VirtualConstraintSet& vc,
                 const GeneralizedState& s, double t, const PdGains& gains,
                 PdOutputMode mode = PdOutputMode::Inverse);

/// Solves B u = D (ddq* - Kp e - Kd de) + H. Needs B square (hip and ankle
/// both actuated on the pinned compass).
Vector computed_torque(const model::CompassParams& p, const GeneralizedState& s,
                       const Vector& q_d, const Vector& dq_d, const Vector& ddq_star,
                       const PdGains& gains);

/// Task-space acceleration target  J ddq + bias = ydd_star.
struct AccelerationTask {
  Matrix J;
  Vector bias;
  Vector ydd_star;
};

/// Output task with the stabilizing law ydd* = -(Kp/eps^2) y - (Kd/eps) dy.
/// The selector and phase of vc act on the state as given (pinned or
/// floating coordinates).
AccelerationTask output_task(const hzd::VirtualConstraintSet& vc, const GeneralizedState& s,
                             double t, const PdGains& gains);

struct Limits {
  Vector u_max;  // symmetric box; empty means unbounded
  double mu = 0.8;
};

struct IdQpResult {
  numerics::QpSolution qp;
  Vector ddq, u, lambda;
  double dynamics_residual = 0.0;  // |D ddq + H - B u - Jh' lambda| and |Jh ddq + dJh dq|
  double task_residual = 0.0;
};

/// Inverse-dynamics QP over X = (ddq, u, lambda) for the floating compass with
/// the stance foot in contact:
///   minimize   |J ddq + bias - ydd*|^2 + sigma (|u|^2 + |lambda|^2)
///   subject to D ddq + H = B u + Jh' lambda,  Jh ddq + dJh dq = 0,
///              |u| <= u_max,  |lambda_t| <= (mu / sqrt 2) lambda_n,  lambda_n >= 0.
/// Throws SolverError when the QP is not solved to optimality.
IdQpResult id_qp(const model::CompassParams& p, const GeneralizedState& floating,
                 const AccelerationTask& task, const Limits& limits, double sigma = 1e-6);

/// Pyramid rows A lambda <= 0 for lambda = (tangential, normal).
Matrix friction_pyramid(double mu);

/// Rapidly exponentially stabilizing CLF for k outputs with double-integrator
/// error dynamics: P solves the CARE with Q = I, R = I, and
/// P_eps = I_eps P I_eps with I_eps = diag(I/eps, I). eta = (y, dy).
struct ClfData {
  Matrix P;
  Matrix P_eps;
  double eps = 1.0;
  double gamma = 0.5;
  int outputs = 0;

  double V(const Vector& eta) const;
  double lambda_min() const;
  double lambda_max() const;
};

ClfData build_res_clf(double eps, int outputs, double gamma = 0.5);

struct ClfQpOptions {
  Limits limits;
  double rho = 1e6;          // weight on the relaxation; <= 0 disables it
  bool friction = true;
  Matrix H;                  // input cost, identity when empty
};

struct ClfQpResult {
  Vector u;
  double delta = 0.0;
  double V = 0.0;
  double LfV = 0.0;
  Vector LgV;
  numerics::QpSolution qp;
};

/// min u'Hu + rho delta^2  s.t.  LfV + LgV u <= -(gamma/eps) V + delta, torque
/// box and the stance-foot pyramid. Throws SolverError if the QP fails.
ClfQpResult clf_qp(const model::CompassParams& p, const hzd::VirtualConstraintSet& vc,
                   const ClfData& clf, const GeneralizedState& s, double t,
                   const ClfQpOptions& opt = {});

struct RegulatorGains {
  double kp = 0.0;
  double kd = 0.0;
  double v_ref = 0.0;
};

/// dp = Kp (v_k - v_ref) + Kd (v_k - v_{k-1}).
double raibert_regulator(double v_k, double v_prev, const RegulatorGains& g);

/// Adds dp[i] to the last two coefficients of row i, moving the end value by
/// dp[i] while keeping the end slope.
hzd::BezierPoly bezier_transition(const hzd::BezierPoly& poly, const Vector& dp);

}  // namespace walklab::control
