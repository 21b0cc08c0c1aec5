#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "walklab/numerics/care.hpp"

using walklab::Matrix;
using namespace walklab::numerics;

TEST(Care, DoubleIntegratorClosedForm) {
  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const Matrix P = solve_care(A, B, Matrix::Identity(2, 2), Matrix::Identity(1, 1));
  // Hand algebra: p12^2 = 1, p11 = p12*p22, 2*p12 - p22^2 + 1 = 0.
  Matrix expected(2, 2);
  expected << std::sqrt(3.0), 1.0, 1.0, std::sqrt(3.0);
  EXPECT_LT((P - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(care_residual(A, B, Matrix::Identity(2, 2), Matrix::Identity(1, 1), P)
                .cwiseAbs()
                .maxCoeff(),
            1e-10);
}

TEST(Care, StableSystemWithoutInputOrCost) {
  Matrix A(2, 2);
  A << -1, 0.3, 0, -2;
  const Matrix P = solve_care(A, Matrix::Zero(2, 1), Matrix::Zero(2, 2), Matrix::Identity(1, 1));
  EXPECT_LT(P.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Care, RandomStabilizableTriples) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4, m = 1 + trial % 2;
    const Matrix A = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
    const Matrix B = Matrix::NullaryExpr(n, m, [&] { return nd(rng); });
    const Matrix L = Matrix::NullaryExpr(n, n, [&] { return nd(rng); });
    const Matrix Q = L * L.transpose() + 0.1 * Matrix::Identity(n, n);
    const Matrix R = Matrix::Identity(m, m);
    const Matrix P = solve_care(A, B, Q, R);
    EXPECT_LT(care_residual(A, B, Q, R, P).cwiseAbs().maxCoeff() / std::max(1.0, Q.norm()), 1e-10);
    EXPECT_LT((P - P.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff(), 0.0);
    const Matrix F = A - B * R.inverse() * B.transpose() * P;
    const auto eig = Eigen::EigenSolver<Matrix>(F).eigenvalues();
    for (Eigen::Index i = 0; i < eig.size(); ++i) EXPECT_LT(eig[i].real(), 0.0);
  }
}

TEST(Care, UnstabilizablePairThrows) {
  // Unstable mode the input cannot reach.
  Matrix A(2, 2), B(2, 1);
  A << 1, 0, 0, -1;
  B << 0, 1;
  EXPECT_THROW(solve_care(A, B, Matrix::Identity(2, 2), Matrix::Identity(1, 1)),
               walklab::SolverError);
}

TEST(Care, LyapunovSolverResidual) {
  Matrix F(2, 2), W(2, 2);
  F << -1, 2, 0, -3;
  W << 2, 0.5, 0.5, 1;
  const Matrix X = solve_lyapunov(F, W);
  EXPECT_LT((F.transpose() * X + X * F + W).cwiseAbs().maxCoeff(), 1e-12);
}
