#include "walklab/hzd/hzd.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/SVD>

namespace walklab::hzd {

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Bernstein basis of degree n at s.
Vector bernstein(int n, double s) {
  Vector b(n + 1);
  if (n < 0) return Vector::Zero(0);
  for (int k = 0; k <= n; ++k) b[k] = binom(n, k) * std::pow(s, k) * std::pow(1.0 - s, n - k);
  return b;
}

}  // namespace

BezierValue bezier_eval(const BezierPoly& poly, double s, bool clamp) {
  const int M = poly.degree();
  if (M < 1) throw DimensionError("bezier: degree must be at least 1");
  if (clamp) s = std::clamp(s, 0.0, 1.0);
  const Matrix& a = poly.alpha;
  BezierValue v;
  v.value = a * bernstein(M, s);
  const Matrix d1c = M * (a.rightCols(M) - a.leftCols(M));
  v.d1 = d1c * bernstein(M - 1, s);
  if (M >= 2) {
    const Matrix d2c = (M - 1) * (d1c.rightCols(M - 1) - d1c.leftCols(M - 1));
    v.d2 = d2c * bernstein(M - 2, s);
  } else {
    v.d2 = Vector::Zero(a.rows());
  }
  return v;
}

double PhaseVariable::blend() const {
  switch (mode) {
    case Mode::State:
      return 1.0;
    case Mode::Time:
      return 0.0;
    case Mode::Blended:
      return weight;
  }
  return 1.0;
}

PhaseValue phase(const PhaseVariable& ph, const GeneralizedState& s, double t) {
  const double w = ph.blend();
  PhaseValue out;
  out.dtau_dq = Vector::Zero(s.q.size());
  double tau = 0.0;
  if (w > 0.0) {
    if (ph.c.size() != s.q.size()) throw DimensionError("phase: functional size differs from q");
    const double span = ph.theta_minus - ph.theta_plus;
    if (span == 0.0) throw DimensionError("phase: degenerate state phase endpoints");
    tau += w * (ph.c.dot(s.q) - ph.theta_plus) / span;
    out.dtau_dq = (w / span) * ph.c;
  }
  if (w < 1.0) {
    if (!(ph.duration > 0.0)) throw DimensionError("phase: duration must be positive");
    tau += (1.0 - w) * t / ph.duration;
    out.dtau_dt = (1.0 - w) / ph.duration;
  }
  if (!ph.extrapolate && (tau < 0.0 || tau > 1.0)) {
    out.clamped = true;
    out.tau = std::clamp(tau, 0.0, 1.0);
    out.dtau_dq.setZero();
    out.dtau_dt = 0.0;
  } else {
    out.tau = tau;
  }
  out.rate = out.dtau_dq.dot(s.dq) + out.dtau_dt;
  return out;
}

OutputValue outputs(const VirtualConstraintSet& vc, const GeneralizedState& s, double t) {
  if (vc.H0.cols() != s.q.size()) throw DimensionError("outputs: selector width differs from q");
  if (vc.desired.outputs() != vc.H0.rows())
    throw DimensionError("outputs: Bezier rows differ from selector rows");
  const PhaseValue ph = phase(vc.phase, s, t);
  const BezierValue b = bezier_eval(vc.desired, ph.tau, !vc.phase.extrapolate);
  OutputValue o;
  o.tau = ph.tau;
  o.y = vc.H0 * s.q - b.value;
  o.jacobian = vc.H0 - b.d1 * ph.dtau_dq.transpose();
  o.dy = vc.H0 * s.dq - b.d1 * ph.rate;
  return o;
}

LieDerivatives lie_derivatives(const model::CompassParams& p, const VirtualConstraintSet& vc,
                               const GeneralizedState& s, double t) {
  const OutputValue o = outputs(vc, s, t);
  const PhaseValue ph = phase(vc.phase, s, t);
  const BezierValue b = bezier_eval(vc.desired, ph.tau, !vc.phase.extrapolate);
  const auto terms = model::dynamics_terms(p, s);
  const auto llt = terms.D.llt();
  const Vector f2 = -llt.solve(terms.H);
  const Matrix g2 = llt.solve(terms.B);
  LieDerivatives ld;
  ld.y = o.y;
  ld.Lf = o.dy;
  ld.jacobian = o.jacobian;
  ld.tau = o.tau;
  // The phase is affine in (q, t), so its second derivative only enters via q''.
  ld.L2f = o.jacobian * f2 - b.d2 * (ph.rate * ph.rate);
  ld.LgLf = o.jacobian * g2;
  return ld;
}

Vector fbl_controller(const LieDerivatives& ld, const Vector& mu, double max_condition) {
  const Matrix& A = ld.LgLf;
  if (A.rows() != A.cols() || A.rows() == 0)
    throw SingularError("fbl: decoupling matrix is not square");
  if (mu.size() != A.rows()) throw DimensionError("fbl: auxiliary input size mismatch");
  const Eigen::JacobiSVD<Matrix> svd(A);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || sv.maxCoeff() / sv.minCoeff() > max_condition)
    throw SingularError("fbl: decoupling matrix is singular");
  return A.partialPivLu().solve(mu - ld.L2f);
}

Vector fbl_controller(const model::CompassParams& p, const VirtualConstraintSet& vc,
                      const GeneralizedState& s, double t, const Vector& mu,
                      double max_condition) {
  return fbl_controller(lie_derivatives(p, vc, s, t), mu, max_condition);
}

Vector pd_aux(const Vector& y, const Vector& dy, double eps, const Vector& kp, const Vector& kd) {
  if (!(eps > 0.0) || eps > 1.0) throw DimensionError("pd_aux: eps must lie in (0, 1]");
  if (y.size() != dy.size() || kp.size() != y.size() || kd.size() != y.size())
    throw DimensionError("pd_aux: size mismatch");
  return -(kp.cwiseProduct(y) / (eps * eps)) - kd.cwiseProduct(dy) / eps;
}

HzdResidual hzd_residual(const model::CompassParams& p, const VirtualConstraintSet& vc,
                         const GeneralizedState& pre, double guard_tol) {
  HzdResidual r;
  r.post = model::impact_map(p, pre, guard_tol);
  const OutputValue o = outputs(vc, r.post, 0.0);
  r.y_norm = o.y.norm();
  r.dy_norm = o.dy.norm();
  return r;
}

}  // namespace walklab::hzd
