#include "walklab/numerics/care.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

namespace walklab::numerics {

Matrix care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
  const Matrix Rinv_Bt = R.ldlt().solve(B.transpose());
  return A.transpose() * P + P * A - P * B * Rinv_Bt * P + Q;
}

Matrix solve_lyapunov(const Matrix& F, const Matrix& W) {
  const Eigen::Index n = F.rows();
  const Matrix I = Matrix::Identity(n, n);
  // vec(F'X + XF) = (I kron F' + F' kron I) vec(X)
  Matrix K = Matrix::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * F.transpose();
      K.block(i * n, j * n, n, n) += F(j, i) * I;
    }
  const Vector w = Eigen::Map<const Vector>(W.data(), n * n);
  const auto lu = K.fullPivLu();
  if (!lu.isInvertible()) throw SingularError("solve_lyapunov: singular Kronecker operator");
  const Vector x = lu.solve(-w);
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const CareOptions& options) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols())
    throw DimensionError("solve_care: inconsistent dimensions");
  Eigen::LLT<Matrix> rllt(R);
  if (rllt.info() != Eigen::Success) throw SolverError("solve_care: R must be positive definite");

  const Matrix S = B * rllt.solve(B.transpose());
  Matrix Ham(2 * n, 2 * n);
  Ham << A, -S, -Q, -A.transpose();

  Eigen::ComplexEigenSolver<Matrix> ces(Ham);
  if (ces.info() != Eigen::Success) throw SolverError("solve_care: Hamiltonian eigensolve failed");
  const double ham_scale = std::max(1.0, Ham.lpNorm<Eigen::Infinity>());
  std::vector<Eigen::Index> stable;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const double re = ces.eigenvalues()[i].real();
    if (std::abs(re) <= 1e-10 * ham_scale)
      throw SolverError("solve_care: Hamiltonian has eigenvalues on the imaginary axis");
    if (re < 0.0) stable.push_back(i);
  }
  if (static_cast<Eigen::Index>(stable.size()) != n)
    throw SolverError("solve_care: stable subspace has wrong dimension");

  Eigen::MatrixXcd U(2 * n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    U.col(k) = ces.eigenvectors().col(stable[static_cast<size_t>(k)]);
  const Eigen::MatrixXcd U1 = U.topRows(n);
  const Eigen::MatrixXcd U2 = U.bottomRows(n);
  const auto u1lu = U1.fullPivLu();
  if (!u1lu.isInvertible()) throw SolverError("solve_care: pair is not stabilizable");
  Matrix P = (U2 * u1lu.inverse()).real();
  P = 0.5 * (P + P.transpose());

  const double scale = std::max(1.0, Q.lpNorm<Eigen::Infinity>());
  double res = care_residual(A, B, Q, R, P).lpNorm<Eigen::Infinity>() / scale;
  for (int it = 0; it < options.max_refinements && res > 1e-3 * options.residual_tol; ++it) {
    const Matrix K = rllt.solve(B.transpose() * P);
    const Matrix F = A - B * K;
    Matrix next = solve_lyapunov(F, Q + K.transpose() * R * K);
    const double next_res = care_residual(A, B, Q, R, next).lpNorm<Eigen::Infinity>() / scale;
    if (!(next_res < res)) break;
    P = next;
    res = next_res;
  }

  if (!(res <= options.residual_tol))
    throw SolverError("solve_care: residual " + std::to_string(res) + " above tolerance");
  const Matrix F = A - S * P;
  Eigen::EigenSolver<Matrix> cl(F);
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(cl.eigenvalues()[i].real() < 0.0))
      throw SolverError("solve_care: closed loop is not Hurwitz (pair not stabilizable)");
  return P;
}

}  // namespace walklab::numerics
