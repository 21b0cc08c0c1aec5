#pragma once

#include "walklab/model/compass.hpp"

namespace walklab::hzd {

/// Bezier polynomials of a common degree, one row of coefficients per output.
struct BezierPoly {
  Matrix alpha;  // outputs x (degree + 1)

  int degree() const { return static_cast<int>(alpha.cols()) - 1; }
  Eigen::Index outputs() const { return alpha.rows(); }
};

struct BezierValue {
  Vector value, d1, d2;  // d/ds and d2/ds2
};

/// Bernstein evaluation; s is clamped to [0, 1] unless `clamp` is false, in
/// which case the polynomial is continued past the ends.
BezierValue bezier_eval(const BezierPoly& poly, double s, bool clamp = true);

/// tau = w * tau_state + (1 - w) * tau_time, clamped to [0, 1] by default, with
///   tau_state = (c q - theta_plus) / (theta_minus - theta_plus)
///   tau_time  = t / duration
struct PhaseVariable {
  enum class Mode { State, Time, Blended };
  Mode mode = Mode::State;
  Vector c;                  // row functional over q
  double theta_plus = 0.0;   // c q at the start of the step
  double theta_minus = 1.0;  // c q at the end of the step
  double duration = 1.0;
  double weight = 1.0;       // blend weight on the state phase
  bool extrapolate = false;  // continue tau and the polynomial past [0, 1]

  double blend() const;
};

struct PhaseValue {
  double tau = 0.0;
  Vector dtau_dq;         // zero where clamped
  double dtau_dt = 0.0;
  double rate = 0.0;      // d tau / dt along the motion
  bool clamped = false;
};

PhaseValue phase(const PhaseVariable& ph, const GeneralizedState& s, double t);

/// y = H0 q - b(tau).
struct VirtualConstraintSet {
  Matrix H0;
  BezierPoly desired;
  PhaseVariable phase;

  Eigen::Index outputs() const { return H0.rows(); }
};

struct OutputValue {
  Vector y, dy;
  Matrix jacobian;  // dy/d(dq): H0 - b'(tau) dtau/dq
  double tau = 0.0;
};

OutputValue outputs(const VirtualConstraintSet& vc, const GeneralizedState& s, double t = 0.0);

struct LieDerivatives {
  Vector y;
  Vector Lf;    // dy
  Vector L2f;
  Matrix LgLf;  // decoupling matrix
  Matrix jacobian;
  double tau = 0.0;
};

/// Relative-degree-two Lie derivatives along the compass dynamics.
LieDerivatives lie_derivatives(const model::CompassParams& p, const VirtualConstraintSet& vc,
                               const GeneralizedState& s, double t = 0.0);

/// u = (LgLf)^-1 (-L2f + mu). Throws SingularError if the decoupling matrix is
/// not square or its condition number exceeds max_condition.
Vector fbl_controller(const model::CompassParams& p, const VirtualConstraintSet& vc,
                      const GeneralizedState& s, double t, const Vector& mu,
                      double max_condition = 1e8);
Vector fbl_controller(const LieDerivatives& ld, const Vector& mu, double max_condition = 1e8);

/// mu = -(1/eps^2) Kp y - (1/eps) Kd dy with diagonal gains.
Vector pd_aux(const Vector& y, const Vector& dy, double eps, const Vector& kp, const Vector& kd);

struct HzdResidual {
  double y_norm = 0.0;
  double dy_norm = 0.0;
  GeneralizedState post;
};

/// Outputs just after the impact from a pre-impact state. The time phase
/// restarts at zero.
HzdResidual hzd_residual(const model::CompassParams& p, const VirtualConstraintSet& vc,
                         const GeneralizedState& pre, double guard_tol = 1e-6);

}  // namespace walklab::hzd
