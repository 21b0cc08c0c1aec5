#include "walklab/numerics/newton.hpp"

#include <algorithm>
#include <cmath>

namespace walklab::numerics {

std::string to_string(NewtonStatus s) {
  switch (s) {
    case NewtonStatus::Converged:
      return "converged";
    case NewtonStatus::MaxIterations:
      return "max-iterations";
    case NewtonStatus::SingularJacobian:
      return "singular-jacobian";
    case NewtonStatus::EvaluationFailed:
      return "evaluation-failed";
  }
  return "unknown";
}

Matrix fd_jacobian(const ResidualFunction& r, const Vector& x, double abs_step, double rel_step) {
  Matrix J;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(abs_step, rel_step * std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Vector rp = r(xp);
    const Vector rm = r(xm);
    if (i == 0) J.resize(rp.size(), x.size());
    J.col(i) = (rp - rm) / (xp[i] - xm[i]);
  }
  return J;
}

namespace {

// One chord step with the last Jacobian, kept only if it lowers the residual.
void polish(const ResidualFunction& r, NewtonResult& out) {
  if (out.iterations == 0 || out.last_jacobian.size() == 0) return;
  try {
    const Vector x = out.x - out.last_jacobian.fullPivLu().solve(out.residual);
    const Vector res = r(x);
    const double n = res.norm();
    if (std::isfinite(n) && n < out.residual_norm) {
      out.x = x;
      out.residual = res;
      out.residual_norm = n;
    }
  } catch (const std::exception&) {
  }
}

}  // namespace

NewtonResult newton_fd(const ResidualFunction& r, const Vector& x0, const NewtonOptions& opt) {
  NewtonResult out;
  out.x = x0;
  try {
    out.residual = r(out.x);
  } catch (const std::exception& e) {
    out.status = NewtonStatus::EvaluationFailed;
    out.message = e.what();
    return out;
  }
  out.residual_norm = out.residual.norm();
  out.log.push_back({out.residual_norm, 0.0});

  for (int it = 0; it < opt.max_iterations; ++it) {
    if (out.residual_norm < opt.tol) {
      polish(r, out);
      out.status = NewtonStatus::Converged;
      return out;
    }
    try {
      out.last_jacobian = fd_jacobian(r, out.x, opt.fd_abs_step, opt.fd_rel_step);
    } catch (const std::exception& e) {
      out.status = NewtonStatus::EvaluationFailed;
      out.message = e.what();
      return out;
    }
    const auto lu = out.last_jacobian.fullPivLu();
    const Eigen::JacobiSVD<Matrix> svd(out.last_jacobian);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || !(sv.minCoeff() > opt.singular_rcond * std::max(sv.maxCoeff(), 1e-300)) ||
        sv.maxCoeff() == 0.0) {
      out.status = NewtonStatus::SingularJacobian;
      out.message = "finite-difference Jacobian is singular";
      return out;
    }
    const Vector step = -lu.solve(out.residual);

    double lambda = 1.0, used = 1.0;
    Vector x_try, r_try;
    double n_try = 0.0;
    bool have_try = false;
    for (int k = 0; k <= opt.max_halvings; ++k, lambda *= 0.5) {
      used = lambda;
      x_try = out.x + lambda * step;
      try {
        r_try = r(x_try);
        n_try = r_try.norm();
        have_try = std::isfinite(n_try);
      } catch (const std::exception&) {
        have_try = false;
      }
      if (have_try && n_try < out.residual_norm) break;
    }
    if (!have_try) {
      out.status = NewtonStatus::EvaluationFailed;
      out.message = "residual evaluation failed along every damped step";
      return out;
    }
    out.x = x_try;
    out.residual = r_try;
    out.residual_norm = n_try;
    out.iterations = it + 1;
    out.log.push_back({n_try, used});
  }
  if (out.residual_norm < opt.tol) {
    polish(r, out);
    out.status = NewtonStatus::Converged;
  } else {
    out.status = NewtonStatus::MaxIterations;
  }
  return out;
}

}  // namespace walklab::numerics
