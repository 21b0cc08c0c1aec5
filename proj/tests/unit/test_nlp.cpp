#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "walklab/numerics/nlp.hpp"

using walklab::Matrix;
using walklab::Vector;
using namespace walklab::numerics;

TEST(Nlp, ActiveLowerInequality) {
  // min (z-1)^2 s.t. z >= 2
  auto prob = NlpProblem::from_callbacks(
      [](const Vector& z) { return (z[0] - 1.0) * (z[0] - 1.0); }, nullptr,
      [](const Vector& z) { return Vector::Constant(1, 2.0 - z[0]); }, Vector::Constant(1, 0.0));
  const auto res = solve_nlp(prob);
  ASSERT_TRUE(res.converged()) << to_string(res.status);
  EXPECT_NEAR(res.z[0], 2.0, 1e-6);
  EXPECT_NEAR(res.ineq_multipliers[0], 2.0, 1e-4);
}

TEST(Nlp, EqualityConstrainedQuadraticMatchesKkt) {
  Matrix H(3, 3);
  H << 3, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
  Vector f(3);
  f << -1, 0.5, 2;
  Matrix A(2, 3);
  A << 1, 1, 1, 1, -1, 0.5;
  Vector b(2);
  b << 1, 0.25;

  Matrix K = Matrix::Zero(5, 5);
  K.topLeftCorner(3, 3) = H;
  K.topRightCorner(3, 2) = A.transpose();
  K.bottomLeftCorner(2, 3) = A;
  Vector rhs(5);
  rhs << -f, b;
  const Vector oracle = K.fullPivLu().solve(rhs).head(3);

  auto prob = NlpProblem::from_callbacks(
      [&](const Vector& z) { return 0.5 * z.dot(H * z) + f.dot(z); },
      [&](const Vector& z) { return Vector(A * z - b); }, nullptr, Vector::Zero(3));
  const auto res = solve_nlp(prob);
  ASSERT_TRUE(res.converged()) << to_string(res.status);
  EXPECT_LT((res.z - oracle).norm(), 1e-5);
  EXPECT_LT(res.max_violation, 1e-6);
}

TEST(Nlp, RosenbrockWithLinearEqualityMatchesRefinedGrid) {
  auto rosen = [](double x, double y) { return (1 - x) * (1 - x) + 100 * (y - x * x) * (y - x * x); };
  // On x + y = 1.5 the problem is one-dimensional in x; refine a grid search.
  double lo = -3.0, hi = 3.0, best = 0.0;
  for (int level = 0; level < 12; ++level) {
    double best_v = std::numeric_limits<double>::infinity();
    const int N = 2000;
    for (int i = 0; i <= N; ++i) {
      const double x = lo + (hi - lo) * i / N;
      const double v = rosen(x, 1.5 - x);
      if (v < best_v) {
        best_v = v;
        best = x;
      }
    }
    const double w = (hi - lo) / N * 4;
    lo = best - w;
    hi = best + w;
  }
  auto prob = NlpProblem::from_callbacks(
      [&](const Vector& z) { return rosen(z[0], z[1]); },
      [](const Vector& z) { return Vector::Constant(1, z[0] + z[1] - 1.5); }, nullptr,
      Vector::Zero(2));
  const auto res = solve_nlp(prob);
  ASSERT_TRUE(res.converged()) << to_string(res.status);
  EXPECT_NEAR(res.z[0], best, 1e-4);
  EXPECT_NEAR(res.z[1], 1.5 - best, 1e-4);
}

TEST(Nlp, BoundsAreRespected) {
  // min (z0+1)^2 + (z1-3)^2 on [0, 2]^2 -> (0, 2)
  auto prob = NlpProblem::from_callbacks(
      [](const Vector& z) { return (z[0] + 1) * (z[0] + 1) + (z[1] - 3) * (z[1] - 3); }, nullptr,
      nullptr, Vector::Constant(2, 1.0), Vector::Zero(2), Vector::Constant(2, 2.0));
  const auto res = solve_nlp(prob);
  ASSERT_TRUE(res.converged());
  EXPECT_NEAR(res.z[0], 0.0, 1e-9);
  EXPECT_NEAR(res.z[1], 2.0, 1e-9);
}

TEST(Nlp, ConflictingConstraintsStall) {
  // z <= 0 and z >= 1 cannot both hold.
  auto prob = NlpProblem::from_callbacks(
      [](const Vector& z) { return z[0] * z[0]; }, nullptr,
      [](const Vector& z) {
        Vector c(2);
        c << z[0], 1.0 - z[0];
        return c;
      },
      Vector::Constant(1, 0.5));
  const auto res = solve_nlp(prob);
  EXPECT_EQ(res.status, NlpStatus::InfeasibleStall);
}
