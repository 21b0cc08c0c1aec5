#include "walklab/control/controllers.hpp"

#include <cmath>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "walklab/numerics/care.hpp"

namespace walklab::control {

namespace {

constexpr double kMaxCondition = 1e8;

numerics::QpSolution checked_qp(const numerics::QpProblem& qp, const char* who) {
  auto sol = numerics::solve_qp(qp);
  if (!sol.optimal())
    throw SolverError(std::string(who) + ": QP " + numerics::to_string(sol.status));
  return sol;
}

}  // namespace

void PdGains::validate(Eigen::Index n) const {
  if (kp.size() != n || kd.size() != n) throw DimensionError("gains: size mismatch");
  if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any())
    throw ConfigError("gains: Kp and Kd must be non-negative");
  if (!(eps > 0.0) || eps > 1.0) throw ConfigError("gains: eps must lie in (0, 1]");
}

Vector pd_joint(const GeneralizedState& s, const Vector& q_d, const Vector& dq_d,
                const PdGains& gains, const Matrix& selector) {
  const Matrix S = selector.size() ? selector : Matrix::Identity(s.q.size(), s.q.size());
  if (S.cols() != s.q.size() || q_d.size() != s.q.size() || dq_d.size() != s.q.size())
    throw DimensionError("pd_joint: size mismatch");
  gains.validate(S.rows());
  return -gains.kp.cwiseProduct(S * (s.q - q_d)) - gains.kd.cwiseProduct(S * (s.dq - dq_d));
}

Vector pd_output(const model::CompassParams& p, const hzd::VirtualConstraintSet& vc,
                 const GeneralizedState& s, double t, const PdGains& gains, PdOutputMode mode) {
  const auto o = hzd::outputs(vc, s, t);
  gains.validate(o.y.size());
  const Matrix B = model::dynamics_terms(p, s).B;
  const Matrix Y = vc.H0 * B;
  const Vector e = gains.kp.cwiseProduct(o.y) + gains.kd.cwiseProduct(o.dy);
  if (mode == PdOutputMode::Transpose) return -Y.transpose() * e;
  if (Y.rows() != Y.cols()) throw SingularError("pd_output: output Jacobian is not square");
  const Eigen::JacobiSVD<Matrix> svd(Y);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > 0.0) || sv.maxCoeff() / sv.minCoeff() > kMaxCondition)
    throw SingularError("pd_output: output Jacobian is singular");
  return -Y.partialPivLu().solve(e);
}

Vector computed_torque(const model::CompassParams& p, const GeneralizedState& s,
                       const Vector& q_d, const Vector& dq_d, const Vector& ddq_star,
                       const PdGains& gains) {
  const auto terms = model::dynamics_terms(p, s);
  const Eigen::Index n = s.q.size();
  if (terms.B.rows() != terms.B.cols())
    throw SingularError("computed_torque: the model is not fully actuated");
  if (q_d.size() != n || dq_d.size() != n || ddq_star.size() != n)
    throw DimensionError("computed_torque: size mismatch");
  gains.validate(n);
  const Vector v = ddq_star - gains.kp.cwiseProduct(s.q - q_d) - gains.kd.cwiseProduct(s.dq - dq_d);
  return terms.B.partialPivLu().solve(terms.D * v + terms.H);
}

AccelerationTask output_task(const hzd::VirtualConstraintSet& vc, const GeneralizedState& s,
                             double t, const PdGains& gains) {
  const auto o = hzd::outputs(vc, s, t);
  gains.validate(o.y.size());
  const auto ph = hzd::phase(vc.phase, s, t);
  const auto b = hzd::bezier_eval(vc.desired, ph.tau, !vc.phase.extrapolate);
  AccelerationTask task;
  task.J = o.jacobian;
  task.bias = -b.d2 * (ph.rate * ph.rate);
  task.ydd_star = hzd::pd_aux(o.y, o.dy, gains.eps, gains.kp, gains.kd);
  return task;
}

Matrix friction_pyramid(double mu) {
  if (!(mu >= 0.0)) throw ConfigError("friction: mu must be non-negative");
  const double c = mu / std::sqrt(2.0);
  Matrix A(3, 2);
  A << 1.0, -c,
      -1.0, -c,
       0.0, -1.0;
  return A;
}

IdQpResult id_qp(const model::CompassParams& p, const GeneralizedState& floating,
                 const AccelerationTask& task, const Limits& limits, double sigma) {
  if (floating.q.size() != 4) throw DimensionError("id_qp: expects the floating compass state");
  const auto t = model::dynamics_terms(p, floating);
  const int n = 4, nu = static_cast<int>(t.B.cols()), nl = 2, nx = n + nu + nl;
  if (task.J.cols() != n || task.bias.size() != task.J.rows() ||
      task.ydd_star.size() != task.J.rows())
    throw DimensionError("id_qp: task size mismatch");
  if (limits.u_max.size() && limits.u_max.size() != nu)
    throw DimensionError("id_qp: torque limit size mismatch");

  numerics::QpProblem qp;
  qp.H = Matrix::Zero(nx, nx);
  qp.f = Vector::Zero(nx);
  qp.H.topLeftCorner(n, n) = 2.0 * task.J.transpose() * task.J;
  qp.f.head(n) = 2.0 * task.J.transpose() * (task.bias - task.ydd_star);
  qp.H.bottomRightCorner(nu + nl, nu + nl) += 2.0 * sigma * Matrix::Identity(nu + nl, nu + nl);

  qp.Aeq = Matrix::Zero(n + nl, nx);
  qp.beq = Vector::Zero(n + nl);
  qp.Aeq.block(0, 0, n, n) = t.D;
  qp.Aeq.block(0, n, n, nu) = -t.B;
  qp.Aeq.block(0, n + nu, n, nl) = -t.Jh.transpose();
  qp.beq.head(n) = -t.H;
  qp.Aeq.block(n, 0, nl, n) = t.Jh;
  qp.beq.tail(nl) = -t.dJh_dq;

  qp.Ain = Matrix::Zero(3, nx);
  qp.Ain.rightCols(nl) = friction_pyramid(limits.mu);
  qp.bin = Vector::Zero(3);

  const double inf = std::numeric_limits<double>::infinity();
  qp.lb = Vector::Constant(nx, -inf);
  qp.ub = Vector::Constant(nx, inf);
  if (limits.u_max.size()) {
    qp.lb.segment(n, nu) = -limits.u_max;
    qp.ub.segment(n, nu) = limits.u_max;
  }

  IdQpResult r;
  r.qp = checked_qp(qp, "id_qp");
  r.ddq = r.qp.z.head(n);
  r.u = r.qp.z.segment(n, nu);
  r.lambda = r.qp.z.tail(nl);
  const Vector eom = t.D * r.ddq + t.H - t.B * r.u - t.Jh.transpose() * r.lambda;
  const Vector hol = t.Jh * r.ddq + t.dJh_dq;
  r.dynamics_residual = std::max(eom.lpNorm<Eigen::Infinity>(), hol.lpNorm<Eigen::Infinity>());
  r.task_residual = (task.J * r.ddq + task.bias - task.ydd_star).norm();
  return r;
}

double ClfData::V(const Vector& eta) const {
  if (eta.size() != P_eps.rows()) throw DimensionError("clf: eta size mismatch");
  return eta.dot(P_eps * eta);
}

double ClfData::lambda_min() const {
  return Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff();
}

double ClfData::lambda_max() const {
  return Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().maxCoeff();
}

ClfData build_res_clf(double eps, int outputs, double gamma) {
  if (!(eps > 0.0) || eps > 1.0) throw ConfigError("clf: eps must lie in (0, 1]");
  if (outputs < 1) throw DimensionError("clf: need at least one output");
  if (!(gamma > 0.0)) throw ConfigError("clf: gamma must be positive");
  const int k = outputs;
  Matrix F = Matrix::Zero(2 * k, 2 * k), G = Matrix::Zero(2 * k, k);
  F.topRightCorner(k, k).setIdentity();
  G.bottomRows(k).setIdentity();
  ClfData c;
  c.P = numerics::solve_care(F, G, Matrix::Identity(2 * k, 2 * k), Matrix::Identity(k, k));
  Vector ie(2 * k);
  ie << Vector::Constant(k, 1.0 / eps), Vector::Ones(k);
  c.P_eps = ie.asDiagonal() * c.P * ie.asDiagonal();
  c.eps = eps;
  c.gamma = gamma;
  c.outputs = k;
  return c;
}

ClfQpResult clf_qp(const model::CompassParams& p, const hzd::VirtualConstraintSet& vc,
                   const ClfData& clf, const GeneralizedState& s, double t,
                   const ClfQpOptions& opt) {
  const auto ld = hzd::lie_derivatives(p, vc, s, t);
  const int k = static_cast<int>(ld.y.size());
  if (k != clf.outputs) throw DimensionError("clf_qp: output count differs from the CLF");
  const int nu = static_cast<int>(ld.LgLf.cols());
  Vector eta(2 * k);
  eta << ld.y, ld.Lf;
  Matrix F = Matrix::Zero(2 * k, 2 * k), G = Matrix::Zero(2 * k, k);
  F.topRightCorner(k, k).setIdentity();
  G.bottomRows(k).setIdentity();

  ClfQpResult r;
  r.V = clf.V(eta);
  const Vector PG = clf.P_eps * G;
  r.LfV = eta.dot((F.transpose() * clf.P_eps + clf.P_eps * F) * eta) + 2.0 * eta.dot(PG * ld.L2f);
  r.LgV = 2.0 * (eta.transpose() * PG * ld.LgLf).transpose();

  const bool relax = opt.rho > 0.0;
  const int nx = nu + (relax ? 1 : 0);
  numerics::QpProblem qp;
  const Matrix Hu = opt.H.size() ? opt.H : Matrix::Identity(nu, nu);
  if (Hu.rows() != nu || Hu.cols() != nu) throw DimensionError("clf_qp: cost size mismatch");
  qp.H = Matrix::Zero(nx, nx);
  qp.H.topLeftCorner(nu, nu) = 2.0 * Hu;
  if (relax) qp.H(nu, nu) = 2.0 * opt.rho;
  qp.f = Vector::Zero(nx);

  const int nf = opt.friction ? 3 : 0;
  qp.Ain = Matrix::Zero(1 + nf, nx);
  qp.bin = Vector::Zero(1 + nf);
  qp.Ain.block(0, 0, 1, nu) = r.LgV.transpose();
  if (relax) qp.Ain(0, nu) = -1.0;
  qp.bin[0] = -(clf.gamma / clf.eps) * r.V - r.LfV;
  if (opt.friction) {
    // Stance reaction is affine in u on the pinned model.
    const auto fl = model::to_floating(p, s);
    const Vector l0 = model::forward_dynamics(p, fl, Vector::Zero(nu)).lambda;
    Matrix L(2, nu);
    for (int j = 0; j < nu; ++j)
      L.col(j) = model::forward_dynamics(p, fl, Vector::Unit(nu, j)).lambda - l0;
    const Matrix A = friction_pyramid(opt.limits.mu);
    qp.Ain.block(1, 0, 3, nu) = A * L;
    qp.bin.tail(3) = -A * l0;
  }
  const double inf = std::numeric_limits<double>::infinity();
  qp.lb = Vector::Constant(nx, -inf);
  qp.ub = Vector::Constant(nx, inf);
  if (opt.limits.u_max.size()) {
    if (opt.limits.u_max.size() != nu) throw DimensionError("clf_qp: torque limit size mismatch");
    qp.lb.head(nu) = -opt.limits.u_max;
    qp.ub.head(nu) = opt.limits.u_max;
  }
  if (relax) qp.lb[nu] = 0.0;
  r.qp = checked_qp(qp, "clf_qp");
  r.u = r.qp.z.head(nu);
  r.delta = relax ? r.qp.z[nu] : 0.0;
  return r;
}

double raibert_regulator(double v_k, double v_prev, const RegulatorGains& g) {
  return g.kp * (v_k - g.v_ref) + g.kd * (v_k - v_prev);
}

hzd::BezierPoly bezier_transition(const hzd::BezierPoly& poly, const Vector& dp) {
  if (poly.degree() < 2) throw DimensionError("bezier_transition: degree must be at least 2");
  if (dp.size() != poly.outputs()) throw DimensionError("bezier_transition: one shift per output");
  hzd::BezierPoly out = poly;
  const int M = poly.degree();
  out.alpha.col(M) += dp;
  out.alpha.col(M - 1) += dp;
  return out;
}

}  // namespace walklab::control
