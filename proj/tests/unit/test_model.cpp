#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "walklab/model/compass.hpp"

using walklab::GeneralizedState;
using walklab::Matrix;
using walklab::Vector;
using namespace walklab::model;

namespace {

CompassParams sloped(double deg) {
  CompassParams p;
  p.slope = deg * M_PI / 180.0;
  return p;
}

GeneralizedState state(double a, double b, double c, double d) {
  return GeneralizedState((Vector(2) << a, b).finished(), (Vector(2) << c, d).finished());
}

// Guard state with the swing foot ahead and descending.
GeneralizedState random_guard_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> half(0.08, 0.45), rate(0.2, 2.0), frac(-0.5, 1.5);
  const double h = half(rng);
  const double w = rate(rng);
  return state(h, -h, w, frac(rng) * w);
}

}  // namespace

TEST(Compass, ValidateRejectsBadParameters) {
  CompassParams p;
  p.m = -1.0;
  EXPECT_THROW(p.validate(), walklab::ConfigError);
  p = CompassParams();
  p.b = 0.3;
  EXPECT_THROW(p.validate(), walklab::ConfigError);
  EXPECT_NO_THROW(CompassParams().validate());
}

TEST(Compass, DynamicsMatchLagrangianOracle) {
  // tests/oracles/compass_oracle.py
  const auto p = sloped(5.0);
  const auto s = state(-0.25, 0.31, 0.8, -1.7);
  const auto t = dynamics_terms(p, s);
  Matrix D(2, 2);
  D << 16.25, -2.1181377775335402, -2.1181377775335402, 1.25;
  Vector H(2);
  H << 31.651956689630701, 8.6388033902679222;
  EXPECT_LT((t.D - D).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.H - H).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(t.Jh.rows(), 0);
  EXPECT_NEAR(total_energy(p, s), 10.08867040426324, 1e-12);
}

TEST(Compass, InputMatrixColumns) {
  CompassParams p;
  p.actuated = true;
  p.ankle_actuated = true;
  const auto t = dynamics_terms(p, state(0.1, -0.2, 0, 0));
  Matrix B(2, 2);
  B << 1, -1, 0, 1;
  EXPECT_EQ(t.B, B);
  EXPECT_THROW(forward_dynamics(p, state(0.1, -0.2, 0, 0), Vector::Zero(1)),
               walklab::DimensionError);
}

TEST(Compass, FloatingAndPinnedAgree) {
  CompassParams p = sloped(3.0);
  p.actuated = true;
  const auto s = state(-0.2, 0.35, 1.1, -0.6);
  const Vector u = Vector::Constant(1, 4.0);
  const auto pin = forward_dynamics(p, s, u);
  const auto fl = to_floating(p, s);
  ASSERT_EQ(fl.dof(), 4);
  const auto flo = forward_dynamics(p, fl, u);
  EXPECT_LT((pin.ddq - flo.ddq.head(2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(stance_foot_position(p, fl.q).norm(), 1e-14);
  const auto t = dynamics_terms(p, fl);
  EXPECT_LT((t.Jh * fl.dq).norm(), 1e-13);
  EXPECT_LT((t.Jh * flo.ddq + t.dJh_dq).norm(), 1e-10);
  EXPECT_NEAR(kinetic_energy(p, s), kinetic_energy(p, fl), 1e-12);
}

TEST(Compass, ImpactMatchesOracle) {
  const auto p = sloped(5.0);
  const auto r = impact_map_full(p, state(0.21, -0.21, 1.1, 0.4));
  Vector post(4);
  post << -0.21, 0.21, 0.99781729512658524, 0.72219187326485501;
  EXPECT_LT((r.post.stacked() - post).cwiseAbs().maxCoeff(), 1e-12);
  ASSERT_EQ(r.impulse.size(), 2);
  EXPECT_NEAR(std::abs(r.impulse[1]), 8.2377687204285586, 1e-11);
  EXPECT_NEAR(std::abs(r.impulse[0]), 2.536696306850625, 1e-11);
  EXPECT_GT(r.impulse[1], 0.0);
}

TEST(Compass, ImpactRejectsOffGuardState) {
  const auto p = sloped(5.0);
  EXPECT_THROW(impact_map(p, state(0.3, -0.1, 1.0, 0.4)), walklab::GuardError);
  // On the ground but lifting off.
  EXPECT_THROW(impact_map(p, state(0.21, -0.21, -1.1, -0.4)), walklab::GuardError);
}

TEST(Compass, ImpactDissipatesAndStopsTheNewStanceFoot) {
  std::mt19937_64 rng(5);
  const auto p = sloped(4.0);
  double worst_ratio = 0.0, worst_residual = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto pre = random_guard_state(rng);
    const auto r = impact_map_full(p, pre);
    worst_ratio = std::max(worst_ratio, kinetic_energy(p, r.post) / kinetic_energy(p, pre));
    // New stance foot (the old swing foot) is the relabeled stance foot.
    worst_residual =
        std::max(worst_residual, (dynamics_terms(p, r.post_floating).Jh * r.post_floating.dq).norm());
    EXPECT_EQ(r.post.q[0], pre.q[1]);
    EXPECT_EQ(r.post.q[1], pre.q[0]);
  }
  EXPECT_LE(worst_ratio, 1.0);
  EXPECT_LT(worst_residual, 1e-10);
}

TEST(Compass, RelabelIsAnInvolution) {
  const Matrix R = relabel_matrix();
  EXPECT_EQ(R * R, Matrix::Identity(R.rows(), R.cols()));
}

TEST(Compass, SwingFootJacobianMatchesFiniteDifferences) {
  const auto p = sloped(2.0);
  for (const Vector q : {(Vector(2) << -0.3, 0.4).finished(),
                         (Vector(4) << 0.2, -0.1, 0.3, 0.9).finished()}) {
    const Matrix J = swing_foot_jacobian(p, q);
    Matrix fd(2, q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      Vector e = Vector::Zero(q.size());
      e[i] = 1e-6;
      fd.col(i) = (swing_foot_position(p, q + e) - swing_foot_position(p, q - e)) / 2e-6;
    }
    EXPECT_LT((J - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, J.norm()));
  }
}

TEST(Compass, HeightRateMatchesFiniteDifferences) {
  const auto p = sloped(5.0);
  const auto s = state(0.15, -0.22, 1.3, 0.2);
  const double h = 1e-6;
  const double fd = (swing_foot_height(p, s.q + h * s.dq) - swing_foot_height(p, s.q - h * s.dq)) /
                    (2 * h);
  EXPECT_NEAR(swing_foot_height_rate(p, s), fd, 1e-8);
}

TEST(Compass, EnergyConservedByPassiveAccelerations) {
  // dE/dt = dq' (D ddq + dD/dt dq / 2 + dV/dq) = 0 for the unforced model.
  const auto p = sloped(5.0);
  const auto s = state(-0.2, 0.1, 1.0, -0.8);
  const auto f = forward_dynamics(p, s, Vector());
  const double h = 1e-6;
  const GeneralizedState plus(s.q + h * s.dq, s.dq + h * f.ddq);
  const GeneralizedState minus(s.q - h * s.dq, s.dq - h * f.ddq);
  EXPECT_NEAR((total_energy(p, plus) - total_energy(p, minus)) / (2 * h), 0.0, 1e-7);
}

TEST(Compass, CentroidalQuantities) {
  const auto p = sloped(0.0);
  const auto s = state(0.2, -0.3, 0.7, 1.5);
  const auto c = centroidal(p, s);
  const double M = p.total_mass();
  const Eigen::Vector2d hip = hip_position(p, s.q);
  const Eigen::Vector2d st_mass = stance_foot_position(p, s.q) + p.b / p.l * (hip - stance_foot_position(p, s.q));
  const Eigen::Vector2d sw_mass = swing_foot_position(p, s.q) + p.b / p.l * (hip - swing_foot_position(p, s.q));
  const Eigen::Vector2d com = (p.m_H * hip + p.m * st_mass + p.m * sw_mass) / M;
  EXPECT_LT((c.com - com).norm(), 1e-14);
  const double h = 1e-6;
  const Eigen::Vector2d dcom = (centroidal(p, GeneralizedState(s.q + h * s.dq, s.dq)).com -
                                centroidal(p, GeneralizedState(s.q - h * s.dq, s.dq)).com) /
                               (2 * h);
  EXPECT_LT((c.com_velocity - dcom).norm(), 1e-8);
}

TEST(Compass, ComAccelerationMatchesFiniteDifferences) {
  const auto p = sloped(5.0);
  const auto s = state(-0.2, 0.1, 1.0, -0.8);
  const auto f = forward_dynamics(p, s, Vector());
  const double h = 1e-6;
  const GeneralizedState plus(s.q + h * s.dq, s.dq + h * f.ddq);
  const GeneralizedState minus(s.q - h * s.dq, s.dq - h * f.ddq);
  const Eigen::Vector2d fd =
      (centroidal(p, plus).com_velocity - centroidal(p, minus).com_velocity) / (2 * h);
  EXPECT_LT((com_acceleration(p, s, f.ddq) - fd).norm(), 1e-6);
}

TEST(Compass, FrictionCheck) {
  EXPECT_TRUE(friction_check((Vector(2) << 3.0, 10.0).finished(), 0.8).inside);
  EXPECT_FALSE(friction_check((Vector(2) << 9.0, 10.0).finished(), 0.8).inside);
  EXPECT_FALSE(friction_check((Vector(2) << 0.0, -1.0).finished(), 0.8).inside);
  EXPECT_NEAR(friction_check((Vector(2) << 3.0, 10.0).finished(), 0.8).margin, 5.0, 1e-12);
}
