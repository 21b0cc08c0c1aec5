#include "walklab/numerics/qp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace walklab::numerics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Inequality row origin, used to map multipliers back.
struct RowOrigin {
  enum Kind { General, Lower, Upper } kind;
  Eigen::Index index;
};

struct Stacked {
  Matrix G;
  Vector h;
  std::vector<RowOrigin> origin;
};

Stacked stack_inequalities(const QpProblem& p) {
  const Eigen::Index n = p.num_vars();
  std::vector<RowOrigin> origin;
  for (Eigen::Index i = 0; i < p.Ain.rows(); ++i) origin.push_back({RowOrigin::General, i});
  for (Eigen::Index i = 0; i < p.lb.size(); ++i)
    if (std::isfinite(p.lb[i])) origin.push_back({RowOrigin::Lower, i});
  for (Eigen::Index i = 0; i < p.ub.size(); ++i)
    if (std::isfinite(p.ub[i])) origin.push_back({RowOrigin::Upper, i});

  Stacked s;
  s.G = Matrix::Zero(static_cast<Eigen::Index>(origin.size()), n);
  s.h = Vector::Zero(static_cast<Eigen::Index>(origin.size()));
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(origin.size()); ++r) {
    const auto& o = origin[static_cast<size_t>(r)];
    switch (o.kind) {
      case RowOrigin::General:
        s.G.row(r) = p.Ain.row(o.index);
        s.h[r] = p.bin[o.index];
        break;
      case RowOrigin::Lower:
        s.G(r, o.index) = -1.0;
        s.h[r] = -p.lb[o.index];
        break;
      case RowOrigin::Upper:
        s.G(r, o.index) = 1.0;
        s.h[r] = p.ub[o.index];
        break;
    }
  }
  s.origin = std::move(origin);
  return s;
}

struct CoreResult {
  QpStatus status = QpStatus::MaxIterations;
  Vector z;
  Vector nu;      // equality multipliers
  Vector lambda;  // inequality multipliers (all rows of G)
  int iterations = 0;
  double regularization = 0.0;
};

// Primal active-set iterations from a feasible point with an empty working set.
CoreResult active_set(const Matrix& H, const Vector& f, const Matrix& E, const Matrix& G,
                      const Vector& h, Vector z, const QpOptions& opt) {
  const Eigen::Index n = f.size();
  const Eigen::Index me = E.rows();
  std::vector<Eigen::Index> working;
  std::vector<char> in_working(static_cast<size_t>(G.rows()), 0);

  CoreResult out;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    out.iterations = iter + 1;
    const Eigen::Index mw = static_cast<Eigen::Index>(working.size());
    Matrix C(me + mw, n);
    if (me > 0) C.topRows(me) = E;
    for (Eigen::Index k = 0; k < mw; ++k) C.row(me + k) = G.row(working[static_cast<size_t>(k)]);

    Matrix Z;
    if (C.rows() == 0) {
      Z = Matrix::Identity(n, n);
    } else {
      Eigen::FullPivHouseholderQR<Matrix> qr(C.transpose());
      qr.setThreshold(1e-12);
      const Eigen::Index r = qr.rank();
      const Matrix Q = qr.matrixQ();
      Z = Q.rightCols(n - r);
    }

    const Vector g = H * z + f;
    Vector p = Vector::Zero(n);
    if (Z.cols() > 0) {
      Matrix Hr = Z.transpose() * H * Z;
      Hr = 0.5 * (Hr + Hr.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(Hr);
      const double min_eig = es.eigenvalues().minCoeff();
      const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      if (min_eig < opt.min_reduced_eigenvalue * scale) {
        const double shift = opt.min_reduced_eigenvalue * scale - min_eig;
        Hr.diagonal().array() += shift;
        out.regularization = std::max(out.regularization, shift);
      }
      const Vector pz = Hr.ldlt().solve(-(Z.transpose() * g));
      p = Z * pz;
    }

    const double znorm = z.lpNorm<Eigen::Infinity>();
    if (p.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + znorm)) {
      Vector nu = Vector::Zero(C.rows());
      if (C.rows() > 0) nu = C.transpose().completeOrthogonalDecomposition().solve(-g);
      // Most negative working-set multiplier; ties to the lowest row index.
      double worst = 0.0;
      Eigen::Index drop = -1;
      const double lam_scale = 1.0 + (mw > 0 ? nu.tail(mw).cwiseAbs().maxCoeff() : 0.0);
      for (Eigen::Index k = 0; k < mw; ++k) {
        const double lam = nu[me + k];
        if (lam < -1e-12 * lam_scale) {
          const Eigen::Index row = working[static_cast<size_t>(k)];
          if (drop < 0 || lam < worst - 1e-15 ||
              (std::abs(lam - worst) <= 1e-15 && row < working[static_cast<size_t>(drop)])) {
            worst = lam;
            drop = k;
          }
        }
      }
      if (drop < 0) {
        out.status = QpStatus::Optimal;
        out.z = z;
        out.nu = me > 0 ? Vector(nu.head(me)) : Vector();
        out.lambda = Vector::Zero(G.rows());
        for (Eigen::Index k = 0; k < mw; ++k)
          out.lambda[working[static_cast<size_t>(k)]] = std::max(0.0, nu[me + k]);
        return out;
      }
      in_working[static_cast<size_t>(working[static_cast<size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
      if (in_working[static_cast<size_t>(i)]) continue;
      const double ap = G.row(i).dot(p);
      if (ap <= 1e-14 * G.row(i).norm() * p.norm()) continue;
      const double slack = std::max(0.0, h[i] - G.row(i).dot(z));
      const double ratio = slack / ap;
      if (ratio < alpha) {
        alpha = ratio;
        blocking = i;
      }
    }
    if (blocking < 0 && out.regularization > 0.0 && p.norm() > 1e10 * (1.0 + z.norm())) {
      out.status = QpStatus::Unbounded;
      out.z = z;
      return out;
    }
    z += alpha * p;
    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<size_t>(blocking)] = 1;
    }
  }
  out.status = QpStatus::MaxIterations;
  out.z = z;
  out.nu = Vector::Zero(me);
  out.lambda = Vector::Zero(G.rows());
  return out;
}

}  // namespace

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal:
      return "optimal";
    case QpStatus::Infeasible:
      return "infeasible";
    case QpStatus::MaxIterations:
      return "max-iter";
    case QpStatus::Unbounded:
      return "unbounded";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const Eigen::Index n = f.size();
  if (H.rows() != n || H.cols() != n) throw DimensionError("QpProblem: H must be n x n");
  if (Aeq.rows() > 0 && Aeq.cols() != n) throw DimensionError("QpProblem: Aeq has wrong width");
  if (Aeq.rows() != beq.size()) throw DimensionError("QpProblem: beq size mismatch");
  if (Ain.rows() > 0 && Ain.cols() != n) throw DimensionError("QpProblem: Ain has wrong width");
  if (Ain.rows() != bin.size()) throw DimensionError("QpProblem: bin size mismatch");
  if (lb.size() != 0 && lb.size() != n) throw DimensionError("QpProblem: lb size mismatch");
  if (ub.size() != 0 && ub.size() != n) throw DimensionError("QpProblem: ub size mismatch");
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + H.lpNorm<Eigen::Infinity>()))
    throw DimensionError("QpProblem: H must be symmetric");
}

KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  KktResiduals r;
  const Eigen::Index n = p.num_vars();
  Vector grad = p.H * s.z + p.f;
  if (p.Aeq.rows() > 0) grad += p.Aeq.transpose() * s.eq_multipliers;
  if (p.Ain.rows() > 0) grad += p.Ain.transpose() * s.ineq_multipliers;
  if (s.lower_multipliers.size() == n) grad -= s.lower_multipliers;
  if (s.upper_multipliers.size() == n) grad += s.upper_multipliers;
  r.stationarity = grad.lpNorm<Eigen::Infinity>();

  double feas = 0.0, comp = 0.0, dual = 0.0;
  if (p.Aeq.rows() > 0) feas = (p.Aeq * s.z - p.beq).lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < p.Ain.rows(); ++i) {
    const double viol = p.Ain.row(i).dot(s.z) - p.bin[i];
    feas = std::max(feas, viol);
    comp = std::max(comp, std::abs(s.ineq_multipliers[i] * viol));
    dual = std::min(dual, s.ineq_multipliers[i]);
  }
  for (Eigen::Index i = 0; i < p.lb.size(); ++i) {
    if (!std::isfinite(p.lb[i])) continue;
    const double viol = p.lb[i] - s.z[i];
    feas = std::max(feas, viol);
    comp = std::max(comp, std::abs(s.lower_multipliers[i] * viol));
    dual = std::min(dual, s.lower_multipliers[i]);
  }
  for (Eigen::Index i = 0; i < p.ub.size(); ++i) {
    if (!std::isfinite(p.ub[i])) continue;
    const double viol = s.z[i] - p.ub[i];
    feas = std::max(feas, viol);
    comp = std::max(comp, std::abs(s.upper_multipliers[i] * viol));
    dual = std::min(dual, s.upper_multipliers[i]);
  }
  r.primal_feasibility = std::max(0.0, feas);
  r.complementarity = comp;
  r.dual_feasibility = dual;
  return r;
}

QpSolution solve_qp(const QpProblem& problem, const QpOptions& opt) {
  problem.validate();
  const Eigen::Index n = problem.num_vars();
  const Stacked ineq = stack_inequalities(problem);
  const Matrix& E = problem.Aeq;
  const Vector& e = problem.beq;

  QpSolution sol;
  sol.eq_multipliers = Vector::Zero(E.rows());
  sol.ineq_multipliers = Vector::Zero(problem.Ain.rows());
  sol.lower_multipliers = Vector::Zero(n);
  sol.upper_multipliers = Vector::Zero(n);

  // Phase 0: least-norm point on the equality manifold.
  Vector z0 = Vector::Zero(n);
  if (E.rows() > 0) {
    z0 = E.completeOrthogonalDecomposition().solve(e);
    const double eq_res = (E * z0 - e).lpNorm<Eigen::Infinity>();
    if (!(eq_res <= opt.feasibility_tol * (1.0 + e.lpNorm<Eigen::Infinity>()))) {
      sol.status = QpStatus::Infeasible;
      sol.z = z0;
      return sol;
    }
  }

  // Phase 1: minimize the worst violation t with an exact linear penalty.
  Vector z_feas = z0;
  const Eigen::Index m = ineq.G.rows();
  const double violation = m > 0 ? (ineq.G * z0 - ineq.h).maxCoeff() : 0.0;
  if (violation > opt.feasibility_tol) {
    Matrix H1 = Matrix::Identity(n + 1, n + 1);
    Matrix E1 = Matrix::Zero(E.rows(), n + 1);
    if (E.rows() > 0) E1.leftCols(n) = E;
    Matrix G1 = Matrix::Zero(m + 1, n + 1);
    G1.topLeftCorner(m, n) = ineq.G;
    G1.col(n).head(m).setConstant(-1.0);
    G1(m, n) = -1.0;
    Vector h1 = Vector::Zero(m + 1);
    h1.head(m) = ineq.h;
    Vector start(n + 1);
    start << z0, violation;

    double penalty = 1e6 * (1.0 + z0.lpNorm<Eigen::Infinity>() + ineq.h.lpNorm<Eigen::Infinity>());
    bool feasible = false;
    for (int attempt = 0; attempt < 3 && !feasible; ++attempt, penalty *= 1e4) {
      Vector f1(n + 1);
      f1 << -z0, penalty;
      const CoreResult r1 = active_set(H1, f1, E1, G1, h1, start, opt);
      sol.iterations += r1.iterations;
      if (r1.status != QpStatus::Optimal) {
        sol.status = r1.status;
        sol.z = r1.z.head(n);
        return sol;
      }
      const double t_star = r1.z[n];
      if (t_star <= opt.feasibility_tol * (1.0 + ineq.h.lpNorm<Eigen::Infinity>())) {
        z_feas = r1.z.head(n);
        feasible = true;
      } else {
        start = r1.z;
      }
    }
    if (!feasible) {
      sol.status = QpStatus::Infeasible;
      sol.z = start.head(n);
      return sol;
    }
  }

  const CoreResult r = active_set(problem.H, problem.f, E, ineq.G, ineq.h, z_feas, opt);
  sol.iterations += r.iterations;
  sol.regularization = r.regularization;
  sol.status = r.status;
  sol.z = r.z;
  if (r.status == QpStatus::Optimal) {
    if (E.rows() > 0) sol.eq_multipliers = r.nu;
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& o = ineq.origin[static_cast<size_t>(k)];
      switch (o.kind) {
        case RowOrigin::General:
          sol.ineq_multipliers[o.index] = r.lambda[k];
          break;
        case RowOrigin::Lower:
          sol.lower_multipliers[o.index] = r.lambda[k];
          break;
        case RowOrigin::Upper:
          sol.upper_multipliers[o.index] = r.lambda[k];
          break;
      }
    }
  }
  sol.kkt = kkt_residuals(problem, sol);
  return sol;
}

}  // namespace walklab::numerics
