#include <gtest/gtest.h>

#include <cmath>

#include "walklab/numerics/newton.hpp"

using walklab::Vector;
using namespace walklab::numerics;

TEST(Newton, SquareRootOfTwo) {
  auto r = [](const Vector& x) { return Vector::Constant(1, x[0] * x[0] - 2.0); };
  const auto res = newton_fd(r, Vector::Constant(1, 1.5));
  ASSERT_TRUE(res.converged());
  EXPECT_NEAR(res.x[0], std::sqrt(2.0), 1e-12);
}

TEST(Newton, AlreadyAtRootTakesNoSteps) {
  auto r = [](const Vector& x) { return Vector::Constant(1, x[0] - 3.0); };
  const auto res = newton_fd(r, Vector::Constant(1, 3.0));
  ASSERT_TRUE(res.converged());
  EXPECT_EQ(res.iterations, 0);
}

TEST(Newton, NoRealRootHitsIterationLimit) {
  auto r = [](const Vector& x) { return Vector::Constant(1, x[0] * x[0] + 1.0); };
  const auto res = newton_fd(r, Vector::Constant(1, 1.5));
  EXPECT_EQ(res.status, NewtonStatus::MaxIterations);
}

TEST(Newton, SingularJacobianReported) {
  auto r = [](const Vector& x) {
    Vector out(2);
    out << x[0] + x[1] - 1.0, 2.0 * (x[0] + x[1]) - 3.0;
    return out;
  };
  const auto res = newton_fd(r, Vector::Zero(2));
  EXPECT_EQ(res.status, NewtonStatus::SingularJacobian);
}

TEST(Newton, CoupledSystem) {
  auto r = [](const Vector& x) {
    Vector out(2);
    out << std::sin(x[0]) + x[1] - 0.5, x[0] * x[0] - x[1] - 0.1;
    return out;
  };
  const auto res = newton_fd(r, Vector::Zero(2));
  ASSERT_TRUE(res.converged());
  EXPECT_LT(r(res.x).norm(), 1e-10);
}

TEST(Newton, FiniteDifferenceJacobianOfLinearMap) {
  walklab::Matrix A(2, 2);
  A << 1, 2, -3, 0.5;
  auto r = [&](const Vector& x) { return Vector(A * x); };
  const auto J = fd_jacobian(r, Vector::Ones(2));
  EXPECT_LT((J - A).cwiseAbs().maxCoeff(), 1e-9);
}
