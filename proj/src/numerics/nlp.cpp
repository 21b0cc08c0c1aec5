#include "walklab/numerics/nlp.hpp"

#include "walklab/numerics/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace walklab::numerics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Derivatives {
  NlpEvaluation ev;
  Vector grad_f;
  Matrix jac_eq;
  Matrix jac_in;
};

class Solver {
 public:
  Solver(const NlpProblem& p, const NlpOptions& o) : p_(p), o_(o) {
    const Eigen::Index n = p.initial.size();
    lo_ = p.lower.size() == n ? p.lower : Vector::Constant(n, -kInf);
    hi_ = p.upper.size() == n ? p.upper : Vector::Constant(n, kInf);
  }

  NlpResult run();
  NlpResult run_sqp();

 private:
  Vector project(const Vector& z) const { return z.cwiseMax(lo_).cwiseMin(hi_); }

  double pg_norm(const Vector& z, const Vector& g) const {
    return (project(z - g) - z).lpNorm<Eigen::Infinity>();
  }

  NlpEvaluation eval(const Vector& z) {
    ++evaluations_;
    NlpEvaluation ev = p_.evaluate(z);
    return ev;
  }

  Derivatives differentiate(const Vector& z, const NlpEvaluation& at) {
    Derivatives d;
    d.ev = at;
    const Eigen::Index n = z.size();
    d.grad_f.resize(n);
    d.jac_eq.resize(at.equalities.size(), n);
    d.jac_in.resize(at.inequalities.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = o_.fd_step * std::max(1.0, std::abs(z[i]));
      Vector zp = z, zm = z;
      zp[i] = std::min(z[i] + h, hi_[i]);
      zm[i] = std::max(z[i] - h, lo_[i]);
      const NlpEvaluation ep = zp[i] == z[i] ? at : eval(zp);
      const NlpEvaluation em = zm[i] == z[i] ? at : eval(zm);
      const double dz = zp[i] - zm[i];
      d.grad_f[i] = (ep.objective - em.objective) / dz;
      if (d.jac_eq.rows() > 0) d.jac_eq.col(i) = (ep.equalities - em.equalities) / dz;
      if (d.jac_in.rows() > 0) d.jac_in.col(i) = (ep.inequalities - em.inequalities) / dz;
    }
    return d;
  }

  double merit(const NlpEvaluation& ev) const {
    double m = ev.objective;
    for (Eigen::Index i = 0; i < ev.equalities.size(); ++i) {
      const double c = ev.equalities[i];
      m += lambda_[i] * c + 0.5 * rho_ * c * c;
    }
    for (Eigen::Index j = 0; j < ev.inequalities.size(); ++j) {
      const double s = std::max(0.0, mu_[j] + rho_ * ev.inequalities[j]);
      m += (s * s - mu_[j] * mu_[j]) / (2.0 * rho_);
    }
    return m;
  }

  Vector merit_gradient(const Derivatives& d) const {
    Vector g = d.grad_f;
    if (d.jac_eq.rows() > 0) g += d.jac_eq.transpose() * (lambda_ + rho_ * d.ev.equalities);
    if (d.jac_in.rows() > 0)
      g += d.jac_in.transpose() * (mu_ + rho_ * d.ev.inequalities).cwiseMax(0.0);
    return g;
  }

  Vector lagrangian_gradient(const Derivatives& d) const {
    Vector g = d.grad_f;
    if (d.jac_eq.rows() > 0) g += d.jac_eq.transpose() * lambda_;
    if (d.jac_in.rows() > 0) g += d.jac_in.transpose() * mu_;
    return g;
  }

  // Bound-projected quasi-Newton on the augmented Lagrangian. Returns
  // derivatives at the final point.
  Derivatives inner(Vector& z, Derivatives d, double tol);

  const NlpProblem& p_;
  const NlpOptions& o_;
  Vector lo_, hi_;
  Vector lambda_, mu_;
  double rho_ = 10.0;
  double radius_ = 1.0;
  long evaluations_ = 0;
  int inner_iterations_ = 0;
};

Derivatives Solver::inner(Vector& z, Derivatives d, double tol) {
  const Eigen::Index n = z.size();
  Matrix B = Matrix::Identity(n, n);  // objective curvature
  double m0 = merit(d.ev);
  Vector g = merit_gradient(d);

  for (int it = 0; it < o_.max_inner_iterations; ++it) {
    if (pg_norm(z, g) <= tol) break;
    ++inner_iterations_;

    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = z[i] <= lo_[i] && g[i] > 0.0;
      const bool at_hi = z[i] >= hi_[i] && g[i] < 0.0;
      if (!at_lo && !at_hi) free.push_back(i);
    }
    if (free.empty()) break;

    // Gauss-Newton model of the penalty terms plus BFGS on the objective.
    Matrix H = B;
    if (d.jac_eq.rows() > 0) H += rho_ * d.jac_eq.transpose() * d.jac_eq;
    for (Eigen::Index j = 0; j < d.jac_in.rows(); ++j)
      if (mu_[j] + rho_ * d.ev.inequalities[j] > 0.0)
        H += rho_ * d.jac_in.row(j).transpose() * d.jac_in.row(j);
    const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
    Matrix Hf(nf, nf);
    Vector gf(nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      gf[a] = g[free[a]];
      for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
    }
    const double shift = 1e-10 * std::max(1.0, Hf.diagonal().cwiseAbs().maxCoeff());
    Hf.diagonal().array() += shift;
    Vector pf = Hf.ldlt().solve(-gf);
    if (!pf.allFinite() || !(gf.dot(pf) < 0.0)) pf = -gf;
    Vector p = Vector::Zero(n);
    for (Eigen::Index a = 0; a < nf; ++a) p[free[a]] = pf[a];
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > radius_) p *= radius_ / pmax;

    double alpha = 1.0;
    bool accepted = false;
    Vector z_try;
    NlpEvaluation ev_try;
    double m_try = 0.0;
    for (int k = 0; k < 40; ++k, alpha *= 0.5) {
      z_try = project(z + alpha * p);
      if ((z_try - z).lpNorm<Eigen::Infinity>() == 0.0) break;
      try {
        ev_try = eval(z_try);
        m_try = merit(ev_try);
      } catch (const std::exception&) {
        continue;
      }
      if (std::isfinite(m_try) && m_try <= m0 + 1e-4 * g.dot(z_try - z)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    radius_ = alpha == 1.0 ? std::min(2.0 * radius_, o_.max_step) : std::max(alpha * radius_, 1e-12);

    Derivatives d_new = differentiate(z_try, ev_try);
    const Vector s = z_try - z;
    Vector y = d_new.grad_f - d.grad_f;
    // Powell damping keeps B positive definite.
    const Vector Bs = B * s;
    const double sBs = s.dot(Bs), sy = s.dot(y);
    if (sBs > 0.0) {
      const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
      y = theta * y + (1.0 - theta) * Bs;
      B += y * y.transpose() / s.dot(y) - Bs * Bs.transpose() / sBs;
    }
    z = z_try;
    d = std::move(d_new);
    g = merit_gradient(d);
    m0 = m_try;
  }
  return d;
}

NlpResult Solver::run() {
  NlpResult res;
  Vector z = project(p_.initial);
  NlpEvaluation ev0;
  try {
    ev0 = eval(z);
  } catch (const std::exception& e) {
    res.status = NlpStatus::EvaluationFailed;
    res.message = e.what();
    res.z = z;
    return res;
  }
  lambda_ = Vector::Zero(ev0.equalities.size());
  mu_ = Vector::Zero(ev0.inequalities.size());
  rho_ = o_.initial_penalty;
  radius_ = o_.max_step;

  double prev_violation = kInf;
  Derivatives d;
  try {
    d = differentiate(z, ev0);
    for (int outer = 0; outer < o_.max_outer_iterations; ++outer) {
      res.outer_iterations = outer + 1;
      const double inner_tol = std::max(0.5 * o_.optimality_tol, std::pow(0.1, outer + 1));
      d = inner(z, std::move(d), inner_tol);

      const double viol = max_violation(d.ev);
      if (lambda_.size() > 0) lambda_ += rho_ * d.ev.equalities;
      if (mu_.size() > 0) mu_ = (mu_ + rho_ * d.ev.inequalities).cwiseMax(0.0);
      const double pg = pg_norm(z, lagrangian_gradient(d));
      res.max_violation = viol;
      res.projected_gradient = pg;
      if (viol < o_.constraint_tol && pg < o_.optimality_tol) {
        res.status = NlpStatus::Converged;
        break;
      }
      if (viol >= o_.constraint_tol && viol > 0.25 * prev_violation) {
        rho_ *= o_.penalty_growth;
        if (rho_ > o_.max_penalty) {
          res.status = NlpStatus::InfeasibleStall;
          res.message = "constraint violation stalled at " + std::to_string(viol);
          break;
        }
      }
      prev_violation = viol;
      res.status = NlpStatus::MaxOuterIterations;
    }
  } catch (const std::exception& e) {
    res.status = NlpStatus::EvaluationFailed;
    res.message = e.what();
  }
  res.z = z;
  res.at_solution = d.ev;
  res.eq_multipliers = lambda_;
  res.ineq_multipliers = mu_;
  res.inner_iterations = inner_iterations_;
  res.evaluations = evaluations_;
  return res;
}


double l1_violation(const NlpEvaluation& ev) {
  double v = ev.equalities.lpNorm<1>();
  for (Eigen::Index j = 0; j < ev.inequalities.size(); ++j) v += std::max(0.0, ev.inequalities[j]);
  return v;
}

NlpResult Solver::run_sqp() {
  NlpResult res;
  res.status = NlpStatus::MaxOuterIterations;
  Vector z = project(p_.initial);
  const Eigen::Index n = z.size();
  Derivatives d;
  try {
    d = differentiate(z, eval(z));
  } catch (const std::exception& e) {
    res.status = NlpStatus::EvaluationFailed;
    res.message = e.what();
    res.z = z;
    return res;
  }
  const Eigen::Index me = d.ev.equalities.size(), mi = d.ev.inequalities.size();
  lambda_ = Vector::Zero(me);
  mu_ = Vector::Zero(mi);
  Matrix B = Matrix::Identity(n, n);
  double nu = o_.initial_penalty;
  double radius = o_.max_step;
  int stalled = 0;
  bool fresh = true;
  QpOptions qp_opt;
  qp_opt.max_iterations = 20 * static_cast<int>(n + me + mi);

  auto lagrangian_grad = [&](const Derivatives& dd, const Vector& lam, const Vector& mu) {
    Vector g = dd.grad_f;
    if (me > 0) g += dd.jac_eq.transpose() * lam;
    if (mi > 0) g += dd.jac_in.transpose() * mu;
    return g;
  };

  try {
    for (int it = 0; it < o_.max_sqp_iterations; ++it) {
      res.outer_iterations = it + 1;
      const double viol = max_violation(d.ev);
      const double pg = pg_norm(z, lagrangian_grad(d, lambda_, mu_));
      res.max_violation = viol;
      res.projected_gradient = pg;
      if (viol < o_.constraint_tol && pg < o_.optimality_tol && it > 0) {
        res.status = NlpStatus::Converged;
        break;
      }

      QpProblem qp;
      qp.H = 0.5 * (B + B.transpose());
      qp.f = d.grad_f;
      qp.lb = (lo_ - z).cwiseMax(-radius);
      qp.ub = (hi_ - z).cwiseMin(radius);
      if (me > 0) qp.Aeq = d.jac_eq;
      if (mi > 0) qp.Ain = d.jac_in;
      // Full linearization first; on inconsistency ask for less.
      QpSolution sol;
      double frac = 1.0;
      for (; frac >= 0.0; frac = frac > 1e-3 ? 0.5 * frac : (frac > 0.0 ? 0.0 : -1.0)) {
        if (me > 0) qp.beq = -frac * d.ev.equalities;
        if (mi > 0)
          qp.bin = -d.ev.inequalities + (1.0 - frac) * d.ev.inequalities.cwiseMax(0.0);
        sol = solve_qp(qp, qp_opt);
        if (sol.optimal()) break;
      }
      if (!sol.optimal() && !fresh) {
        // A degraded quasi-Newton matrix is the usual culprit; start over.
        B.setIdentity();
        fresh = true;
        --it;
        continue;
      }
      if (!sol.optimal()) {
        res.status = NlpStatus::InfeasibleStall;
        res.message = "QP subproblem failed: " + to_string(sol.status);
        break;
      }
      const Vector p = sol.z;
      if (p.lpNorm<Eigen::Infinity>() < 1e-14) {
        if (viol < o_.constraint_tol) {
          res.status = NlpStatus::Converged;
        } else {
          res.status = NlpStatus::InfeasibleStall;
          res.message = "no step reduces the constraint violation " + std::to_string(viol);
        }
        break;
      }
      const Vector lam_qp = me > 0 ? sol.eq_multipliers : Vector();
      const Vector mu_qp = mi > 0 ? sol.ineq_multipliers : Vector();

      // L1 merit. The penalty must exceed the multipliers of a full
      // linearization and make the predicted reduction positive; it is
      // allowed to relax again once a transient spike has passed.
      const double v1 = l1_violation(d.ev);
      NlpEvaluation lin;
      lin.equalities = me > 0 ? Vector(d.ev.equalities + d.jac_eq * p) : Vector();
      lin.inequalities = mi > 0 ? Vector(d.ev.inequalities + d.jac_in * p) : Vector();
      const double drop = v1 - l1_violation(lin);
      double need = o_.initial_penalty;
      if (frac == 1.0) {
        if (me > 0) need = std::max(need, 1.1 * lam_qp.lpNorm<Eigen::Infinity>());
        if (mi > 0) need = std::max(need, 1.1 * mu_qp.lpNorm<Eigen::Infinity>());
      }
      if (drop > 0.0)
        need = std::max(need, (d.grad_f.dot(p) + 0.5 * p.dot(B * p)) / (0.7 * drop));
      nu = need > nu ? need : std::max(need, 0.5 * nu);
      const double pred = -d.grad_f.dot(p) + nu * drop;
      const double phi0 = d.ev.objective + nu * v1;

      auto merit_ok = [&](const NlpEvaluation& ev, double a) {
        const double phi = ev.objective + nu * l1_violation(ev);
        return std::isfinite(phi) && phi <= phi0 - 1e-4 * a * std::max(pred, 0.0);
      };
      double alpha = 1.0;
      bool accepted = false;
      NlpEvaluation ev_try;
      Vector z_try;
      for (int k = 0; k < 30; ++k, alpha *= 0.5) {
        z_try = project(z + alpha * p);
        try {
          ev_try = eval(z_try);
        } catch (const std::exception&) {
          continue;
        }
        if (merit_ok(ev_try, alpha)) {
          accepted = true;
          break;
        }
        if (k == 0 && frac == 1.0) {
          // Second-order correction: re-linearize the constraint values at
          // the trial point to counter curvature of the constraints.
          QpProblem soc = qp;
          if (me > 0) soc.beq = -(ev_try.equalities - d.jac_eq * p);
          if (mi > 0) soc.bin = -(ev_try.inequalities - d.jac_in * p);
          const QpSolution ss = solve_qp(soc, qp_opt);
          if (ss.optimal()) {
            const Vector zc = project(z + ss.z);
            try {
              const NlpEvaluation ec = eval(zc);
              if (merit_ok(ec, 1.0)) {
                z_try = zc;
                ev_try = ec;
                accepted = true;
                break;
              }
            } catch (const std::exception&) {
            }
          }
        }
      }
      ++inner_iterations_;
      if (!accepted) {
        radius = 0.1 * p.lpNorm<Eigen::Infinity>();
        if (radius <= 1e-12) {
          res.status = viol < o_.constraint_tol ? NlpStatus::Converged : NlpStatus::InfeasibleStall;
          res.message = "line search failed";
          break;
        }
        continue;
      }
      if (alpha == 1.0) radius = std::min(2.0 * radius, o_.max_step);
      const double step = (z_try - z).lpNorm<Eigen::Infinity>();

      Derivatives d_new = differentiate(z_try, ev_try);
      const Vector s = z_try - z;
      Vector y = lagrangian_grad(d_new, lam_qp, mu_qp) - lagrangian_grad(d, lam_qp, mu_qp);
      const Vector Bs = B * s;
      const double sBs = s.dot(Bs), sy = s.dot(y);
      if (sBs > 0.0 && y.allFinite()) {
        const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
        y = theta * y + (1.0 - theta) * Bs;
        if (fresh && sy > 0.0) B *= std::clamp(sy / s.squaredNorm(), 1e-4, 1e4);
        B += y * y.transpose() / s.dot(y) - Bs * Bs.transpose() / sBs;
        fresh = false;
        if (!B.allFinite() || B.diagonal().maxCoeff() > 1e12 * std::max(1e-300, B.diagonal().minCoeff())) {
          B.setIdentity();
          fresh = true;
        }
      }
      const double new_viol = max_violation(d_new.ev);
      if (viol >= o_.constraint_tol && new_viol > 0.99 * viol && frac == 0.0) {
        if (++stalled >= 5) {
          z = z_try;
          d = std::move(d_new);
          res.status = NlpStatus::InfeasibleStall;
          res.message = "constraint violation stalled at " + std::to_string(new_viol);
          break;
        }
      } else {
        stalled = 0;
      }
      z = z_try;
      d = std::move(d_new);
      lambda_ = lam_qp;
      mu_ = mu_qp;
      if (step < 1e-12 * std::max(1.0, z.lpNorm<Eigen::Infinity>()) && new_viol < o_.constraint_tol) {
        res.status = NlpStatus::Converged;
        res.message = "step below tolerance";
        break;
      }
    }
  } catch (const std::exception& e) {
    res.status = NlpStatus::EvaluationFailed;
    res.message = e.what();
  }
  res.max_violation = max_violation(d.ev);
  res.z = z;
  res.at_solution = d.ev;
  res.eq_multipliers = lambda_;
  res.ineq_multipliers = mu_;
  res.inner_iterations = inner_iterations_;
  res.evaluations = evaluations_;
  return res;
}

}  // namespace

std::string to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Converged:
      return "converged";
    case NlpStatus::InfeasibleStall:
      return "infeasible-stall";
    case NlpStatus::MaxOuterIterations:
      return "max-outer-iterations";
    case NlpStatus::EvaluationFailed:
      return "evaluation-failed";
  }
  return "unknown";
}

double max_violation(const NlpEvaluation& ev) {
  double v = 0.0;
  if (ev.equalities.size() > 0) v = ev.equalities.lpNorm<Eigen::Infinity>();
  if (ev.inequalities.size() > 0) v = std::max(v, ev.inequalities.maxCoeff());
  return v;
}

NlpProblem NlpProblem::from_callbacks(std::function<double(const Vector&)> objective,
                                      std::function<Vector(const Vector&)> equalities,
                                      std::function<Vector(const Vector&)> inequalities,
                                      Vector initial, Vector lower, Vector upper) {
  NlpProblem p;
  p.evaluate = [objective = std::move(objective), equalities = std::move(equalities),
                inequalities = std::move(inequalities)](const Vector& z) {
    NlpEvaluation ev;
    ev.objective = objective(z);
    if (equalities) ev.equalities = equalities(z);
    if (inequalities) ev.inequalities = inequalities(z);
    return ev;
  };
  p.initial = std::move(initial);
  p.lower = std::move(lower);
  p.upper = std::move(upper);
  return p;
}

NlpResult solve_nlp(const NlpProblem& problem, const NlpOptions& options) {
  Solver s(problem, options);
  return options.method == NlpMethod::Sqp ? s.run_sqp() : s.run();
}

}  // namespace walklab::numerics
