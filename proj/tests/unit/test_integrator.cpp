#include <gtest/gtest.h>

#include <cmath>

#include "walklab/numerics/integrator.hpp"

using walklab::Vector;
using namespace walklab::numerics;

namespace {

Vector decay(double, const Vector& x) { return -x; }

Vector oscillator(double, const Vector& x) {
  Vector d(2);
  d << x[1], -x[0];
  return d;
}

}  // namespace

TEST(Integrator, ExponentialDecayMatchesClosedForm) {
  const auto res = integrate(decay, Vector::Ones(1), 0.0, 1.0);
  EXPECT_NEAR(res.x_final[0], std::exp(-1.0), 1e-10);
  EXPECT_DOUBLE_EQ(res.t_final, 1.0);
}

TEST(Integrator, HarmonicOscillatorEnergyDrift) {
  Vector x0(2);
  x0 << 1.0, 0.0;
  const double T = 10 * 2.0 * M_PI;
  const auto res = integrate(oscillator, x0, 0.0, T);
  const double e0 = 0.5 * x0.squaredNorm();
  const double e1 = 0.5 * res.x_final.squaredNorm();
  EXPECT_LT(std::abs(e1 - e0), 1e-9);
}

TEST(Integrator, EventOnDecayAtLogTwo) {
  EventFunction ev;
  ev.value = [](double, const Vector& x) { return x[0] - 0.5; };
  const auto res = integrate(decay, Vector::Ones(1), 0.0, 5.0, {}, &ev);
  ASSERT_TRUE(res.event_time.has_value());
  EXPECT_NEAR(*res.event_time, std::log(2.0), 1e-9);
  EXPECT_NEAR(res.x_final[0], 0.5, 1e-10);
  EXPECT_DOUBLE_EQ(res.trajectory.t_end(), *res.event_time);
}

TEST(Integrator, AscendingStartOnGuardIsNotAnEvent) {
  // x(t) = t - 0 rises through zero at t = 0; only falling crossings count.
  EventFunction ev;
  ev.value = [](double, const Vector& x) { return x[0]; };
  auto rise = [](double, const Vector&) { return Vector::Ones(1); };
  const auto res = integrate(rise, Vector::Zero(1), 0.0, 1.0, {}, &ev);
  EXPECT_FALSE(res.event_time.has_value());
  EXPECT_NEAR(res.x_final[0], 1.0, 1e-12);
}

TEST(Integrator, DisarmedGuardIsIgnored) {
  EventFunction ev;
  ev.value = [](double, const Vector& x) { return x[0] - 0.5; };
  ev.armed = [](double t, const Vector&) { return t > 2.0; };
  const auto res = integrate(decay, Vector::Ones(1), 0.0, 3.0, {}, &ev);
  EXPECT_FALSE(res.event_time.has_value());
}

TEST(Integrator, DenseOutputTracksSolution) {
  const auto res = integrate(decay, Vector::Ones(1), 0.0, 2.0);
  for (double t = 0.0; t <= 2.0; t += 0.0137)
    EXPECT_NEAR(res.trajectory(t)[0], std::exp(-t), 1e-9) << "t=" << t;
}

TEST(Integrator, HalvingFixedStepCutsErrorByAtLeastFour) {
  Vector x0(2);
  x0 << 1.0, 0.0;
  double prev = 0.0;
  for (double h : {0.2, 0.1, 0.05}) {
    Tolerances tol;
    tol.fixed_step = h;
    const auto res = integrate(oscillator, x0, 0.0, 4.0, tol);
    const double err = std::hypot(res.x_final[0] - std::cos(4.0), res.x_final[1] + std::sin(4.0));
    if (prev > 0.0) EXPECT_GE(prev / err, 4.0) << "h=" << h;
    prev = err;
  }
}

TEST(Integrator, TighterToleranceReducesError) {
  Vector x0(2);
  x0 << 1.0, 0.0;
  double prev = 0.0;
  for (double tol_v : {1e-6, 1e-8, 1e-10}) {
    Tolerances tol;
    tol.abs = tol.rel = tol_v;
    const auto res = integrate(oscillator, x0, 0.0, 4.0, tol);
    const double err = std::hypot(res.x_final[0] - std::cos(4.0), res.x_final[1] + std::sin(4.0));
    if (prev > 0.0) EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(Integrator, NonFiniteStateThrows) {
  auto blowup = [](double, const Vector& x) { return Vector(x.array().square() * 1e300); };
  EXPECT_THROW(integrate(blowup, Vector::Constant(1, 10.0), 0.0, 1.0), walklab::SimulationError);
}
