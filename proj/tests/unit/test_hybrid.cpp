#include <gtest/gtest.h>

#include <cmath>

#include "walklab/hybrid/compass_walker.hpp"
#include "walklab/hybrid/hybrid.hpp"
#include "walklab/poincare/poincare.hpp"

using walklab::Vector;
using namespace walklab::hybrid;

namespace {

constexpr double kG = 9.81;

// Ball in flight; at touchdown v+ = -e v- + c. The return map on the post-
// impact section is v -> e v + c with fixed point c / (1 - e).
HybridSystemSpec bouncing_ball(double e, double c) {
  HybridSystemSpec spec;
  Domain flight;
  flight.name = "flight";
  flight.flow = [](double, const Vector& x) { return Vector((Vector(2) << x[1], -kG).finished()); };
  spec.domains.push_back(flight);
  Edge touchdown;
  touchdown.guard = [](double, const Vector& x) { return x[0]; };
  touchdown.armed = [](double, const Vector& x) { return x[1] < 0.0; };
  touchdown.reset = [e, c](const Vector& x) {
    return Vector((Vector(2) << 0.0, -e * x[1] + c).finished());
  };
  spec.edges.push_back(touchdown);
  return spec;
}

walklab::numerics::Tolerances tight() {
  walklab::numerics::Tolerances t;
  t.abs = t.rel = 1e-12;
  return t;
}

}  // namespace

TEST(Hybrid, BallFlightTimeAndReset) {
  const auto spec = bouncing_ball(0.5, 0.0);
  ExecOptions opt;
  opt.tol = tight();
  const double h0 = 1.3;
  const auto arc = simulate_arc(spec, 0, (Vector(2) << h0, 0.0).finished(), 2.0, opt);
  ASSERT_TRUE(arc.event.has_value());
  const double t1 = std::sqrt(2 * h0 / kG);
  EXPECT_NEAR(arc.event->t, 2.0 + t1, 1e-10);
  EXPECT_NEAR(arc.duration(), t1, 1e-10);
  EXPECT_NEAR(arc.event->post[1], 0.5 * std::sqrt(2 * kG * h0), 1e-9);
  EXPECT_DOUBLE_EQ(arc.t.front(), 2.0);
  EXPECT_NEAR(arc.event->guard_value, 0.0, 1e-10);
  EXPECT_LT(arc.event->guard_rate, 0.0);
}

TEST(Hybrid, StepsChainAndRecordSections) {
  const auto spec = bouncing_ball(0.8, 1.0);
  ExecOptions opt;
  opt.tol = tight();
  opt.sample_dt = 0.01;
  const auto tr = simulate_steps(spec, (Vector(2) << 0.0, 2.0).finished(), 4, opt);
  ASSERT_EQ(tr.arcs.size(), 4u);
  const auto sections = tr.section_states();
  ASSERT_EQ(sections.size(), 5u);  // start of every arc plus the final reset
  double v = 2.0;
  for (std::size_t k = 0; k < sections.size(); ++k) {
    EXPECT_NEAR(sections[k][1], v, 1e-9);
    v = 0.8 * v + 1.0;
  }
  EXPECT_EQ(tr.final_state(), sections.back());
  for (std::size_t k = 1; k < tr.arcs.size(); ++k)
    EXPECT_DOUBLE_EQ(tr.arcs[k].t0, tr.arcs[k - 1].event->t);
  for (std::size_t i = 1; i + 1 < tr.arcs[0].t.size(); ++i)
    EXPECT_NEAR(tr.arcs[0].t[i] - tr.arcs[0].t[i - 1], 0.01, 1e-12);
}

TEST(Hybrid, NoEventAndZenoAreReported) {
  ExecOptions opt;
  opt.max_time = 1.0;
  auto spec = bouncing_ball(0.5, 0.0);
  spec.edges[0].guard = [](double, const Vector&) { return 1.0; };
  try {
    simulate_arc(spec, 0, (Vector(2) << 1.0, 0.0).finished(), 0.0, opt);
    FAIL() << "expected NoEvent";
  } catch (const walklab::SimulationError& e) {
    EXPECT_EQ(e.kind(), walklab::SimulationError::Kind::NoEvent);
  }
  // Resets back onto the guard with a tiny rebound: the next impact comes
  // within zeno_eps.
  const auto zeno = bouncing_ball(1e-9, 0.0);
  opt.max_time = 10.0;
  try {
    simulate_steps(zeno, (Vector(2) << 0.1, 0.0).finished(), 3, opt);
    FAIL() << "expected Zeno";
  } catch (const walklab::SimulationError& e) {
    EXPECT_EQ(e.kind(), walklab::SimulationError::Kind::Zeno);
  }
}

TEST(Hybrid, SpecValidation) {
  HybridSystemSpec spec = bouncing_ball(0.5, 0.0);
  EXPECT_NO_THROW(spec.validate());
  spec.edges[0].target = 1;
  EXPECT_THROW(spec.validate(), walklab::DimensionError);
  spec = bouncing_ball(0.5, 0.0);
  spec.domains.push_back(spec.domains[0]);
  EXPECT_THROW(spec.validate(), walklab::DimensionError);
}

TEST(Poincare, BallReturnMapFixedPoint) {
  const double e = 0.6, c = 2.0;
  const auto spec = bouncing_ball(e, c);
  walklab::poincare::PoincareOptions opt;
  opt.exec.tol = tight();
  const auto r = walklab::poincare::find_fixed_point(spec, (Vector(2) << 0.0, 3.0).finished(), opt);
  ASSERT_TRUE(r.converged) << r.message;
  EXPECT_NEAR(r.x_star[1], c / (1 - e), 1e-9);
  EXPECT_LT(r.residual, 1e-9);
  EXPECT_NEAR(r.magnitudes[0], e, 1e-6);
  EXPECT_NEAR(r.magnitudes[1], 0.0, 1e-6);
  EXPECT_EQ(r.verdict, walklab::poincare::Verdict::Stable);
}

TEST(Poincare, Classification) {
  using walklab::poincare::classify;
  using walklab::poincare::Verdict;
  Eigen::VectorXcd ev(2);
  ev << std::complex<double>(0.5, 0.3), 0.1;
  EXPECT_EQ(classify(ev), Verdict::Stable);
  ev << std::complex<double>(0.0, 1.0), 0.1;
  EXPECT_EQ(classify(ev), Verdict::Marginal);
  ev << -1.2, 0.1;
  EXPECT_EQ(classify(ev), Verdict::Unstable);
}

TEST(Poincare, PassiveCompassMatchesOracle) {
  // tests/oracles/compass_oracle.py, 5 degree slope.
  walklab::model::CompassParams p;
  p.slope = 5.0 * M_PI / 180.0;
  const auto spec = compass_walker(p);
  walklab::poincare::PoincareOptions opt;
  opt.exec.tol = tight();
  Vector guess(4);
  guess << -0.32, 0.32, 1.17, 0.05;
  const auto r = walklab::poincare::find_fixed_point(spec, guess, opt);
  ASSERT_TRUE(r.converged) << r.message;
  Vector x(4);
  x << -0.32262184230503138, 0.32262184230503121, 1.168933980721373, 0.047942526769693426;
  EXPECT_LT((r.x_star - x).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT(r.residual, 1e-10);
  EXPECT_NEAR(r.magnitudes[0], 1.540823954151481, 1e-5);
  EXPECT_NEAR(r.magnitudes[1], 0.18759386355901692, 1e-5);
  EXPECT_NEAR(r.magnitudes[2], 0.097139283034481758, 1e-5);
  EXPECT_EQ(r.verdict, walklab::poincare::Verdict::Unstable);

  ExecOptions ex;
  ex.tol = tight();
  const auto arc = simulate_arc(spec, 0, x, 0.0, ex);
  EXPECT_NEAR(arc.duration(), 0.76163336484512367, 1e-9);
  EXPECT_LT((arc.event->post - x).norm(), 1e-9);
}

TEST(Compass, PassiveArcConservesEnergyAndScuffIsIgnored) {
  walklab::model::CompassParams p;
  p.slope = 5.0 * M_PI / 180.0;
  const auto spec = compass_walker(p);
  ExecOptions ex;
  ex.tol = tight();
  ex.sample_dt = 0.01;
  Vector x(4);
  x << -0.3226218423, 0.3226218423, 1.1689339807, 0.0479425268;
  const auto arc = simulate_arc(spec, 0, x, 0.0, ex);
  const double e0 = walklab::model::total_energy(p, walklab::GeneralizedState::from_stacked(arc.x[0]));
  double drift = 0.0;
  bool scuffed = false;
  for (const auto& xi : arc.x) {
    const auto s = walklab::GeneralizedState::from_stacked(xi);
    drift = std::max(drift, std::abs(walklab::model::total_energy(p, s) - e0) / std::abs(e0));
    scuffed = scuffed || walklab::model::swing_foot_height(p, s.q) < -1e-9;
  }
  EXPECT_LT(drift, 1e-8);
  // Mid-stance the swing foot passes below the ground; the guard is not armed there.
  EXPECT_TRUE(scuffed);
  EXPECT_GT(arc.duration(), 0.5);
}

TEST(Compass, PassiveWalkerRejectsInputs) {
  walklab::model::CompassParams p;
  p.actuated = true;
  EXPECT_THROW(compass_walker(p), walklab::Error);
}
