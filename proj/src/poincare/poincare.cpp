#include "walklab/poincare/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>

namespace walklab::poincare {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Stable:
      return "stable";
    case Verdict::Marginal:
      return "marginal";
    case Verdict::Unstable:
      return "unstable";
  }
  return "unknown";
}

Vector poincare_map(const hybrid::HybridSystemSpec& spec, const Vector& x,
                    const hybrid::ExecOptions& opt) {
  const int n = static_cast<int>(spec.domains.size());
  return hybrid::simulate_steps(spec, x, n, opt).final_state();
}

Matrix linearize_map(const hybrid::HybridSystemSpec& spec, const Vector& x_star,
                     const PoincareOptions& opt) {
  const Eigen::Index n = x_star.size();
  Matrix J(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = std::max(opt.fd_abs_step, opt.fd_rel_step * std::abs(x_star[i]));
    Vector xp = x_star, xm = x_star;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (poincare_map(spec, xp, opt.exec) - poincare_map(spec, xm, opt.exec)) / (2.0 * h);
  }
  return J;
}

Verdict classify(const Eigen::VectorXcd& eigenvalues, double margin) {
  double mx = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) mx = std::max(mx, std::abs(eigenvalues[i]));
  if (mx < 1.0 - margin) return Verdict::Stable;
  if (mx <= 1.0 + margin) return Verdict::Marginal;
  return Verdict::Unstable;
}

void analyze(const hybrid::HybridSystemSpec& spec, FixedPointReport& r,
             const PoincareOptions& opt) {
  r.jacobian = linearize_map(spec, r.x_star, opt);
  r.eigenvalues = Eigen::EigenSolver<Matrix>(r.jacobian).eigenvalues();
  std::vector<double> mags;
  for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) mags.push_back(std::abs(r.eigenvalues[i]));
  std::sort(mags.rbegin(), mags.rend());
  r.magnitudes = Eigen::Map<Vector>(mags.data(), static_cast<Eigen::Index>(mags.size()));
  r.verdict = classify(r.eigenvalues, opt.margin);
}

FixedPointReport find_fixed_point(const hybrid::HybridSystemSpec& spec, const Vector& guess,
                                  const PoincareOptions& opt) {
  FixedPointReport r;
  auto residual = [&](const Vector& x) { return Vector(poincare_map(spec, x, opt.exec) - x); };
  numerics::NewtonOptions nopt = opt.newton;
  nopt.fd_abs_step = opt.fd_abs_step;
  nopt.fd_rel_step = opt.fd_rel_step;
  const auto nr = numerics::newton_fd(residual, guess, nopt);
  r.x_star = nr.x;
  r.residual = nr.residual_norm;
  r.newton_iterations = nr.iterations;
  r.converged = nr.converged();
  r.message = nr.converged() ? "converged" : numerics::to_string(nr.status) + ": " + nr.message;
  if (!r.converged) return r;
  try {
    analyze(spec, r, opt);
  } catch (const Error& e) {
    r.converged = false;
    r.message = std::string("linearization failed: ") + e.what();
  }
  return r;
}

}  // namespace walklab::poincare
