#pragma once

#include "walklab/types.hpp"

namespace walklab::numerics {

struct CareOptions {
  double residual_tol = 1e-10;
  int max_refinements = 50;
};

/// Stabilizing solution P of  A'P + PA - P B R^-1 B' P + Q = 0.
///
/// The stable invariant subspace of the Hamiltonian matrix gives an initial P,
/// which Newton-Kleinman iterations then polish. Throws SolverError when the
/// pair is not stabilizable or the residual (relative to max(1, |Q|)) stays
/// above the tolerance.
Matrix solve_care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const CareOptions& options = {});

/// Residual A'P + PA - P B R^-1 B' P + Q.
Matrix care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

/// Solves the Lyapunov equation  F'X + XF + W = 0  by vectorization.
Matrix solve_lyapunov(const Matrix& F, const Matrix& W);

}  // namespace walklab::numerics
