#include <gtest/gtest.h>

#include <cmath>

#include "walklab/control/controllers.hpp"
#include "walklab/gait/gait.hpp"

using walklab::GeneralizedState;
using walklab::Matrix;
using walklab::Vector;
using namespace walklab::control;

namespace {

GeneralizedState state(double a, double b, double c, double d) {
  return GeneralizedState((Vector(2) << a, b).finished(), (Vector(2) << c, d).finished());
}

walklab::model::CompassParams two_inputs() {
  walklab::model::CompassParams p;
  p.actuated = true;
  p.ankle_actuated = true;
  return p;
}

// Both leg angles as outputs of the floating model, time phase.
walklab::hzd::VirtualConstraintSet leg_outputs() {
  walklab::hzd::VirtualConstraintSet vc;
  vc.H0 = Matrix::Zero(2, 4);
  vc.H0(0, 0) = vc.H0(1, 1) = 1.0;
  vc.desired.alpha = Matrix(2, 4);
  vc.desired.alpha << -0.1, -0.03, 0.03, 0.1,
                      0.1, 0.2, -0.15, -0.1;
  vc.phase.mode = walklab::hzd::PhaseVariable::Mode::Time;
  vc.phase.duration = 0.6;
  return vc;
}

PdGains gains(int n, double kp, double kd, double eps = 1.0) {
  PdGains g;
  g.kp = Vector::Constant(n, kp);
  g.kd = Vector::Constant(n, kd);
  g.eps = eps;
  return g;
}

}  // namespace

TEST(Friction, PyramidUsesInscribedFactor) {
  const double mu = 0.8, c = mu / std::sqrt(2.0);
  Matrix A(3, 2);
  A << 1, -c, -1, -c, 0, -1;
  EXPECT_EQ(friction_pyramid(mu), A);
}

TEST(Clf, DoubleIntegratorRiccatiAndScaling) {
  const double eps = 0.2;
  const auto clf = build_res_clf(eps, 1, 0.5);
  Matrix P(2, 2);
  P << std::sqrt(3.0), 1, 1, std::sqrt(3.0);
  EXPECT_LT((clf.P - P).cwiseAbs().maxCoeff(), 1e-10);
  Matrix I = Matrix::Identity(2, 2);
  I(0, 0) = 1 / eps;
  EXPECT_LT((clf.P_eps - I * P * I).cwiseAbs().maxCoeff(), 1e-9);
  const Vector eta = (Vector(2) << 0.03, -0.4).finished();
  EXPECT_NEAR(clf.V(eta), eta.dot(I * P * I * eta), 1e-12);
  // Eigenvalues of the unscaled P: sqrt(3) -+ 1.
  EXPECT_NEAR(clf.lambda_min(), std::sqrt(3.0) - 1, 1e-10);
  EXPECT_NEAR(clf.lambda_max(), std::sqrt(3.0) + 1, 1e-10);
  // Two outputs: block structure.
  const auto two = build_res_clf(eps, 2);
  EXPECT_EQ(two.P.rows(), 4);
}

TEST(Clf, QpEnforcesDecayAndLieTermsMatchDynamics) {
  const auto prob = walklab::gait::reference_flat_problem();
  const auto d = walklab::gait::reference_flat_gait();
  auto vc = walklab::gait::virtual_constraints(prob, d);
  const auto& p = prob.params;
  const auto clf = build_res_clf(0.1, 1, 0.5);
  ClfQpOptions opt;
  opt.rho = 0.0;
  opt.limits.u_max = Vector::Constant(1, 30.0);
  auto s = GeneralizedState::from_stacked(d.x_star);
  s.dq[1] += 0.1;
  s.q += 0.02 * s.dq;
  const auto r = clf_qp(p, vc, clf, s, 0.0, opt);
  ASSERT_TRUE(r.qp.optimal());
  EXPECT_EQ(r.delta, 0.0);
  EXPECT_LE(r.LfV + r.LgV.dot(r.u), -(clf.gamma / clf.eps) * r.V + 1e-9);
  // dV/dt along the closed loop equals LfV + LgV u.
  const Vector ddq = walklab::model::forward_dynamics(p, s, r.u).ddq;
  const double h = 1e-6;
  auto V_at = [&](double sign) {
    const GeneralizedState x(s.q + sign * h * s.dq, s.dq + sign * h * ddq);
    const auto o = walklab::hzd::outputs(vc, x);
    return clf.V((Vector(2) << o.y, o.dy).finished());
  };
  EXPECT_NEAR((V_at(1) - V_at(-1)) / (2 * h), r.LfV + r.LgV.dot(r.u),
              1e-6 * std::max(1.0, std::abs(r.LfV)));
  // Relaxed version never does worse on torque.
  opt.rho = 1e6;
  const auto relaxed = clf_qp(p, vc, clf, s, 0.0, opt);
  EXPECT_LE(relaxed.u.norm(), r.u.norm() + 1e-9);
  EXPECT_GE(relaxed.delta, 0.0);
}

TEST(IdQp, DynamicsAndKktResiduals) {
  const auto p = two_inputs();
  const auto vc = leg_outputs();
  const auto fl = walklab::model::to_floating(p, state(-0.08, 0.12, 0.6, 0.3));
  const auto task = output_task(vc, fl, 0.1, gains(2, 1.0, 2.0, 0.1));
  Limits lim;
  lim.u_max = Vector::Constant(2, 200.0);
  const auto r = id_qp(p, fl, task, lim);
  EXPECT_LT(r.qp.kkt.stationarity, 1e-8);
  EXPECT_LT(r.qp.kkt.primal_feasibility, 1e-8);
  EXPECT_LT(r.dynamics_residual, 1e-8);
  // Independent check of the equalities.
  const auto t = walklab::model::dynamics_terms(p, fl);
  EXPECT_LT((t.D * r.ddq + t.H - t.B * r.u - t.Jh.transpose() * r.lambda).norm(), 1e-8);
  EXPECT_LT((t.Jh * r.ddq + t.dJh_dq).norm(), 1e-8);
  // Square actuation with slack limits: the task is met up to the regularizer.
  EXPECT_LT(r.task_residual, 1e-3);
  EXPECT_GE(r.lambda[1], 0.0);
  EXPECT_LE(std::abs(r.lambda[0]), 0.8 / std::sqrt(2.0) * r.lambda[1] + 1e-9);
}

TEST(IdQp, TorqueBoxBinds) {
  const auto p = two_inputs();
  const auto vc = leg_outputs();
  const auto fl = walklab::model::to_floating(p, state(-0.08, 0.12, 0.6, 0.3));
  auto task = output_task(vc, fl, 0.1, gains(2, 1.0, 2.0, 0.1));
  task.ydd_star[1] += 500.0;
  Limits lim;
  lim.u_max = Vector::Constant(2, 5.0);
  const auto r = id_qp(p, fl, task, lim);
  EXPECT_NEAR(r.u.cwiseAbs().maxCoeff(), 5.0, 1e-9);
  EXPECT_GT(r.qp.lower_multipliers.sum() + r.qp.upper_multipliers.sum(), 0.0);
  EXPECT_LT(r.dynamics_residual, 1e-8);
}

TEST(IdQp, OutputTaskMatchesFiniteDifferences) {
  const auto p = two_inputs();
  const auto vc = leg_outputs();
  const auto fl = walklab::model::to_floating(p, state(-0.08, 0.12, 0.6, 0.3));
  const auto task = output_task(vc, fl, 0.1, gains(2, 1.0, 2.0, 0.1));
  const Vector ddq = walklab::model::forward_dynamics(p, fl, (Vector(2) << 1.0, -2.0).finished()).ddq;
  const double h = 1e-6;
  const auto plus = walklab::hzd::outputs(vc, GeneralizedState(fl.q + h * fl.dq, fl.dq + h * ddq), 0.1 + h);
  const auto minus = walklab::hzd::outputs(vc, GeneralizedState(fl.q - h * fl.dq, fl.dq - h * ddq), 0.1 - h);
  EXPECT_LT((task.J * ddq + task.bias - (plus.dy - minus.dy) / (2 * h)).norm(), 1e-6);
  const auto o = walklab::hzd::outputs(vc, fl, 0.1);
  EXPECT_LT((task.ydd_star - (-100.0 * o.y - 20.0 * o.dy)).norm(), 1e-10);
}

TEST(Pd, JointLawAndSelector) {
  const auto s = state(0.1, -0.2, 0.3, 0.4);
  const Vector qd = (Vector(2) << 0.0, 0.0).finished(), dqd = Vector::Zero(2);
  const Vector u = pd_joint(s, qd, dqd, gains(2, 10.0, 2.0));
  EXPECT_LT((u - (Vector(2) << -1.6, 1.2).finished()).norm(), 1e-14);
  Matrix S(1, 2);
  S << 0, 1;
  const Vector u1 = pd_joint(s, qd, dqd, gains(1, 10.0, 2.0), S);
  ASSERT_EQ(u1.size(), 1);
  EXPECT_NEAR(u1[0], 1.2, 1e-14);
  EXPECT_THROW(pd_joint(s, qd, dqd, gains(3, 1.0, 1.0)), walklab::DimensionError);
}

TEST(Pd, ComputedTorqueImposesErrorDynamics) {
  const auto p = two_inputs();
  const auto s = state(-0.1, 0.2, 0.5, -0.3);
  const Vector qd = (Vector(2) << -0.05, 0.1).finished();
  const Vector dqd = (Vector(2) << 0.4, 0.0).finished();
  const Vector ddq_star = (Vector(2) << 0.5, -1.0).finished();
  const auto g = gains(2, 25.0, 10.0);
  const Vector u = computed_torque(p, s, qd, dqd, ddq_star, g);
  const Vector ddq = walklab::model::forward_dynamics(p, s, u).ddq;
  const Vector expected = ddq_star - 25.0 * (s.q - qd) - 10.0 * (s.dq - dqd);
  EXPECT_LT((ddq - expected).norm(), 1e-10);
  walklab::model::CompassParams hip_only;
  hip_only.actuated = true;
  EXPECT_THROW(computed_torque(hip_only, s, qd, dqd, ddq_star, gains(2, 1, 1)), walklab::Error);
}

TEST(Pd, OutputLawModes) {
  const auto prob = walklab::gait::reference_flat_problem();
  const auto vc = walklab::gait::virtual_constraints(prob, walklab::gait::reference_flat_gait());
  const auto s = state(-0.05, 0.02, 0.5, 0.3);
  const auto g = gains(1, 2000.0, 100.0);
  const auto o = walklab::hzd::outputs(vc, s);
  const Matrix Y = vc.H0 * walklab::model::dynamics_terms(prob.params, s).B;
  const double e = 2000.0 * o.y[0] + 100.0 * o.dy[0];
  const Vector inv = pd_output(prob.params, vc, s, 0.0, g, PdOutputMode::Inverse);
  EXPECT_NEAR(inv[0], -e / Y(0, 0), 1e-9);
  const Vector tr = pd_output(prob.params, vc, s, 0.0, g, PdOutputMode::Transpose);
  EXPECT_NEAR(tr[0], -Y(0, 0) * e, 1e-9);
}

TEST(Raibert, RegulatorLaw) {
  RegulatorGains g{0.35, 0.05, 0.3};
  EXPECT_NEAR(raibert_regulator(0.36, 0.33, g), 0.35 * 0.06 + 0.05 * 0.03, 1e-15);
  EXPECT_EQ(raibert_regulator(0.3, 0.3, g), 0.0);
}

TEST(Raibert, TransitionKeepsTerminalSlope) {
  walklab::hzd::BezierPoly poly;
  poly.alpha = Matrix(2, 6);
  poly.alpha << 0.1, 0.3, -0.2, 0.5, 0.05, -0.1,
                -0.4, 0.0, 0.2, 0.2, 0.6, 0.3;
  const Vector dp = (Vector(2) << 0.037, -0.021).finished();
  const auto moved = bezier_transition(poly, dp);
  const auto a = walklab::hzd::bezier_eval(poly, 1.0), b = walklab::hzd::bezier_eval(moved, 1.0);
  EXPECT_LT((b.d1 - a.d1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((b.value - a.value - dp).cwiseAbs().maxCoeff(), 1e-15);
  const auto a0 = walklab::hzd::bezier_eval(poly, 0.0), b0 = walklab::hzd::bezier_eval(moved, 0.0);
  EXPECT_LT((a0.value - b0.value).norm(), 1e-15);
  EXPECT_LT((a0.d1 - b0.d1).norm(), 1e-15);
}
