#include "walklab/gait/gait.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/QR>

#include "walklab/numerics/newton.hpp"

namespace walklab::gait {

namespace {

constexpr double kFallResidual = 1e3;

Vector bernstein_row(int n, double s) {
  Vector b(n + 1);
  for (int k = 0; k <= n; ++k) {
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    b[k] = c * std::pow(s, k) * std::pow(1.0 - s, n - k);
  }
  return b;
}

}  // namespace

Vector GaitDecision::pack() const {
  Vector z(x_star.size() + alpha.size());
  z << x_star, Eigen::Map<const Vector>(alpha.data(), alpha.size());
  return z;
}

GaitDecision GaitDecision::unpack(const Vector& z, int degree) {
  if (z.size() != 4 + degree + 1) throw DimensionError("gait decision: wrong vector length");
  GaitDecision d;
  d.x_star = z.head(4);
  d.alpha = z.tail(degree + 1).transpose();
  return d;
}

hzd::VirtualConstraintSet virtual_constraints(const GaitProblem& prob, const GaitDecision& d) {
  if (d.alpha.cols() != prob.degree + 1) throw DimensionError("gait: alpha has wrong degree");
  hzd::VirtualConstraintSet vc;
  vc.H0 = Matrix(1, 2);
  vc.H0 << 0.0, 1.0;
  vc.desired.alpha = d.alpha;
  vc.phase.mode = hzd::PhaseVariable::Mode::State;
  vc.phase.c = Vector(2);
  vc.phase.c << 1.0, 0.0;
  vc.phase.theta_plus = d.x_star[0];
  vc.phase.theta_minus = d.x_star[1];
  vc.phase.extrapolate = true;
  return vc;
}

hybrid::HybridSystemSpec closed_loop_walker(const GaitProblem& prob, const GaitDecision& d) {
  if (!prob.params.actuated || prob.params.num_inputs() != 1)
    throw ConfigError("gait: the compass must have exactly the hip actuated");
  const auto vc = virtual_constraints(prob, d);
  const model::CompassParams p = prob.params;
  const Vector kp = Vector::Constant(1, prob.kp), kd = Vector::Constant(1, prob.kd);
  const double eps = prob.eps;
  auto ctrl = [p, vc, kp, kd, eps](double t, const GeneralizedState& s) {
    const auto ld = hzd::lie_derivatives(p, vc, s, t);
    hybrid::ControlOutput c;
    c.u = hzd::fbl_controller(ld, hzd::pd_aux(ld.y, ld.Lf, eps, kp, kd));
    c.info.y = ld.y;
    c.info.extras = Vector(2);
    c.info.extras << ld.Lf[0], ld.tau;
    return c;
  };
  return hybrid::compass_walker(p, ctrl);
}

double mcot_cost(const model::CompassParams& p, const hybrid::Arc& arc, double step_length,
                 bool positive_work_only) {
  if (!(std::abs(step_length) > 0.0)) throw DimensionError("mcot: zero step length");
  const Matrix B = model::dynamics_terms(p, GeneralizedState(Vector::Zero(2), Vector::Zero(2))).B;
  auto power = [&](std::size_t k) {
    const Vector dq = arc.x[k].tail(2);
    const Vector& u = arc.info[k].u;
    if (u.size() == 0) return 0.0;
    const Vector w = u.cwiseProduct(B.transpose() * dq);
    double s = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) s += positive_work_only ? std::max(0.0, w[i]) : std::abs(w[i]);
    return s;
  };
  double work = 0.0;
  for (std::size_t k = 1; k < arc.t.size(); ++k)
    work += 0.5 * (arc.t[k] - arc.t[k - 1]) * (power(k) + power(k - 1));
  return work / (p.total_mass() * p.g * std::abs(step_length));
}

GaitEvaluation evaluate_gait(const GaitProblem& prob, const GaitDecision& d) {
  GaitEvaluation ev;
  const auto vc = virtual_constraints(prob, d);
  const GeneralizedState xs = GeneralizedState::from_stacked(d.x_star);
  const auto so = hzd::outputs(vc, xs, 0.0);
  ev.section_outputs = Vector(2);
  ev.section_outputs << so.y[0], so.dy[0];
  ev.periodicity = Vector::Constant(4, kFallResidual);
  try {
    const auto spec = closed_loop_walker(prob, d);
    hybrid::ExecOptions eo;
    eo.tol = prob.tol;
    eo.max_time = prob.max_step_time;
    const hybrid::Arc raw = hybrid::simulate_arc(spec, 0, d.x_star, 0.0, eo);
    const double te = raw.event->t;
    hybrid::Arc arc;
    arc.vertex = 0;
    arc.t0 = 0.0;
    arc.dense = raw.dense;
    arc.event = raw.event;
    for (int k = 0; k <= prob.samples; ++k) {
      const double t = te * k / prob.samples;
      const Vector x = (k == 0) ? d.x_star : (k == prob.samples ? raw.event->pre : raw.dense(t));
      arc.t.push_back(t);
      arc.x.push_back(x);
      arc.info.push_back(spec.domains[0].annotate(t, x));
    }
    ev.duration = te;
    ev.periodicity = raw.event->post - d.x_star;
    const auto pre = GeneralizedState::from_stacked(raw.event->pre);
    const auto hr = hzd::hzd_residual(prob.params, vc, pre);
    ev.hzd_y = hr.y_norm;
    ev.hzd_dy = hr.dy_norm;
    ev.step_length = model::swing_foot_position(prob.params, pre.q).x();
    ev.min_friction_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < arc.t.size(); ++k) {
      const auto& info = arc.info[k];
      ev.max_torque = std::max(ev.max_torque, info.u.cwiseAbs().maxCoeff());
      ev.max_hip_angle = std::max(ev.max_hip_angle, std::abs(arc.x[k][1] - arc.x[k][0]));
      ev.min_friction_margin =
          std::min(ev.min_friction_margin, model::friction_check(info.lambda, prob.friction_mu).margin);
    }
    for (std::size_t k = 1; k < arc.t.size(); ++k)
      ev.torque_integral += 0.5 * (arc.t[k] - arc.t[k - 1]) *
                            (arc.info[k].u.squaredNorm() + arc.info[k - 1].u.squaredNorm());
    ev.cost = mcot_cost(prob.params, arc, ev.step_length, prob.positive_work_only);
    ev.arc = std::move(arc);
  } catch (const Error& e) {
    ev.fell = true;
    ev.failure = e.what();
    ev.periodicity = Vector::Constant(4, kFallResidual + d.x_star.norm());
    ev.hzd_y = ev.hzd_dy = kFallResidual;
    ev.cost = kFallResidual;
    ev.max_torque = kFallResidual;
    ev.min_friction_margin = -kFallResidual;
  }
  return ev;
}

namespace {

// Kreisselmeier-Steinhauser envelope: smooth, never below the true maximum,
// and above it by at most log(n) / kKsSharpness.
constexpr double kKsSharpness = 400.0;

double ks_max(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((kKsSharpness * (v.array() - m)).exp().sum()) / kKsSharpness;
}

numerics::NlpEvaluation to_nlp(const GaitProblem& prob, const GaitEvaluation& ev) {
  numerics::NlpEvaluation out;
  out.objective = ev.cost + prob.torque_weight * ev.torque_integral;
  const bool len = prob.step_length > 0.0;
  out.equalities = Vector(6 + (len ? 1 : 0));
  out.equalities << ev.section_outputs, ev.periodicity;
  if (len) out.equalities[6] = ev.fell ? kFallResidual : ev.step_length - prob.step_length;
  // Sampled bounds folded into one smooth row each (torque, hip, friction).
  out.inequalities = Vector::Constant(3, kFallResidual);
  const Eigen::Index K = prob.samples + 1;
  if (ev.fell || static_cast<Eigen::Index>(ev.arc.x.size()) != K) return out;
  const double weight = prob.params.total_mass() * prob.params.g;
  Vector torque(2 * K), hip(2 * K), friction(2 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& info = ev.arc.info[static_cast<std::size_t>(k)];
    const Vector& x = ev.arc.x[static_cast<std::size_t>(k)];
    const double u = info.u[0] / prob.u_max, h = (x[1] - x[0]) / prob.hip_limit;
    const double lt = info.lambda[0] / weight, ln = prob.friction_mu * info.lambda[1] / weight;
    torque.segment(2 * k, 2) << u, -u;
    hip.segment(2 * k, 2) << h, -h;
    friction.segment(2 * k, 2) << lt - ln, -lt - ln;
  }
  out.inequalities << ks_max(torque) - 1.0, ks_max(hip) - 1.0, ks_max(friction);
  return out;
}

// Minimum-norm Gauss-Newton on the equality constraints, kept inside the box.
Vector restore_equalities(const GaitProblem& prob, Vector z, const Vector& lo, const Vector& hi,
                          int max_iterations, long& evaluations) {
  auto eq = [&](const Vector& v) {
    ++evaluations;
    return to_nlp(prob, evaluate_gait(prob, GaitDecision::unpack(v, prob.degree))).equalities;
  };
  Vector c = eq(z);
  for (int it = 0; it < max_iterations && c.cwiseAbs().maxCoeff() > 1e-12; ++it) {
    const Matrix J = numerics::fd_jacobian(eq, z, 1e-7, 1e-7);
    const Vector step = -J.completeOrthogonalDecomposition().solve(c);
    double lam = 1.0;
    bool moved = false;
    for (int k = 0; k < 20; ++k, lam *= 0.5) {
      const Vector zt = (z + lam * step).cwiseMax(lo).cwiseMin(hi);
      const Vector ct = eq(zt);
      if (ct.norm() < c.norm()) {
        z = zt;
        c = ct;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return z;
}

void decision_bounds(const GaitProblem& prob, Vector& lo, Vector& hi) {
  const Eigen::Index n = 4 + prob.degree + 1;
  lo = Vector::Constant(n, -2.0);
  hi = Vector::Constant(n, 2.0);
  lo.head(4) << -0.8, 0.05, 0.05, -10.0;
  hi.head(4) << -0.05, 0.8, 10.0, 10.0;
}

}  // namespace

Matrix fit_bezier(const hybrid::Arc& arc, const Vector& x_star, int degree) {
  if (degree < 3) throw DimensionError("fit_bezier: degree must be at least 3");
  if (arc.x.size() < 2) throw DimensionError("fit_bezier: need at least two samples");
  const double span = x_star[1] - x_star[0];
  // End coefficients pin position and slope at both ends of the step.
  const Vector& a = arc.x.front();
  const Vector& b = arc.x.back();
  Vector alpha(degree + 1);
  alpha[0] = a[1];
  alpha[1] = a[1] + a[3] * span / (degree * a[2]);
  alpha[degree] = b[1];
  alpha[degree - 1] = b[1] - b[3] * span / (degree * b[2]);
  const int free = degree - 3;
  if (free > 0) {
    const Eigen::Index K = static_cast<Eigen::Index>(arc.x.size());
    Matrix Phi(K, free);
    Vector target(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const double tau = std::clamp((arc.x[k][0] - x_star[0]) / span, 0.0, 1.0);
      const Vector row = bernstein_row(degree, tau);
      Phi.row(k) = row.segment(2, free).transpose();
      target[k] = arc.x[k][1] - row[0] * alpha[0] - row[1] * alpha[1] - row[degree - 1] * alpha[degree - 1] -
                  row[degree] * alpha[degree];
    }
    alpha.segment(2, free) = Phi.colPivHouseholderQr().solve(target);
  }
  return alpha.transpose();
}

double restricted_eigenvalue(const GaitProblem& prob, const GaitDecision& d) {
  const auto vc = virtual_constraints(prob, d);
  const auto spec = closed_loop_walker(prob, d);
  const double b1 = hzd::bezier_eval(vc.desired, 0.0).d1[0];
  const double span = d.x_star[1] - d.x_star[0];
  hybrid::ExecOptions eo;
  eo.tol = prob.tol;
  eo.max_time = prob.max_step_time;
  auto rho = [&](double v) {
    Vector x = d.x_star;
    x[2] = v;
    x[3] = b1 * v / span;
    return poincare::poincare_map(spec, x, eo)[2];
  };
  const double v = d.x_star[2], h = 1e-6 * std::max(1.0, std::abs(v));
  return std::abs((rho(v + h) - rho(v - h)) / (2 * h));
}

GaitSolution optimize_gait(const GaitProblem& prob, const GaitDecision& initial,
                           const OptimizeOptions& opt) {
  GaitSolution sol;
  long evals = 0;
  numerics::NlpProblem nlp;
  decision_bounds(prob, nlp.lower, nlp.upper);
  nlp.initial = initial.pack().cwiseMax(nlp.lower).cwiseMin(nlp.upper);
  if (opt.restore) nlp.initial = restore_equalities(prob, nlp.initial, nlp.lower, nlp.upper, 20, evals);
  GaitProblem search = prob;
  search.tol = prob.search_tol;
  const Vector anchor = nlp.initial;
  nlp.evaluate = [&](const Vector& z) {
    ++evals;
    auto out = to_nlp(search, evaluate_gait(search, GaitDecision::unpack(z, prob.degree)));
    if (opt.proximal) out.objective = 0.5 * (z - anchor).squaredNorm();
    return out;
  };
  const auto res = numerics::solve_nlp(nlp, opt.nlp);
  sol.status = res.status;
  sol.nlp_iterations = res.inner_iterations;
  Vector z = res.z;
  if (opt.polish && res.status != numerics::NlpStatus::EvaluationFailed)
    z = restore_equalities(prob, z, nlp.lower, nlp.upper, 8, evals);
  sol.decision = GaitDecision::unpack(z, prob.degree);
  sol.evaluation = evaluate_gait(prob, sol.decision);
  const auto fin = to_nlp(prob, sol.evaluation);
  sol.cost = fin.objective;
  sol.max_violation = numerics::max_violation(fin);
  sol.evaluations = evals;
  const double eq_res = fin.equalities.cwiseAbs().maxCoeff();
  const bool ineq_ok = fin.inequalities.maxCoeff() <= 1e-9;
  sol.converged = !sol.evaluation.fell && eq_res < 1e-8 && ineq_ok &&
                  res.status != numerics::NlpStatus::InfeasibleStall;
  sol.message = numerics::to_string(res.status) + (res.message.empty() ? "" : ": " + res.message);
  if (sol.converged && opt.stability) {
    try {
      sol.restricted_eigenvalues = Vector::Constant(1, restricted_eigenvalue(prob, sol.decision));
      poincare::PoincareOptions po;
      po.exec.tol = prob.tol;
      po.exec.max_time = prob.max_step_time;
      poincare::FixedPointReport rep;
      rep.x_star = sol.decision.x_star;
      poincare::analyze(closed_loop_walker(prob, sol.decision), rep, po);
      sol.full_eigenvalues = rep.magnitudes;
    } catch (const Error& e) {
      sol.message += std::string("; stability analysis failed: ") + e.what();
    }
  }
  return sol;
}

GaitDecision restore_gait(const GaitProblem& prob, const GaitDecision& initial) {
  Vector lo, hi;
  decision_bounds(prob, lo, hi);
  long evals = 0;
  const Vector z = restore_equalities(prob, initial.pack().cwiseMax(lo).cwiseMin(hi), lo, hi, 20, evals);
  return GaitDecision::unpack(z, prob.degree);
}

GaitSolution optimize_from_passive(const GaitProblem& prob, const Vector& passive_guess,
                                   double seed_slope, int continuation_steps,
                                   const OptimizeOptions& opt) {
  model::CompassParams passive = prob.params;
  passive.actuated = false;
  passive.ankle_actuated = false;
  passive.slope = seed_slope;
  const auto pspec = hybrid::compass_walker(passive);
  poincare::PoincareOptions po;
  const auto fp = poincare::find_fixed_point(pspec, passive_guess, po);
  if (!fp.converged) {
    GaitSolution s;
    s.message = "passive seed did not converge: " + fp.message;
    return s;
  }
  hybrid::ExecOptions eo;
  eo.sample_dt = 0.005;
  const auto arc = hybrid::simulate_arc(pspec, 0, fp.x_star, 0.0, eo);
  GaitDecision d;
  d.x_star = fp.x_star;
  d.alpha = fit_bezier(arc, fp.x_star, prob.degree);

  const int steps = std::max(1, continuation_steps);
  const double seed_length = model::swing_foot_position(passive, arc.event->pre.head(2)).x();
  for (int k = 1; k < steps; ++k) {
    const double frac = static_cast<double>(k) / steps;
    GaitProblem pk = prob;
    pk.params.slope = seed_slope + (prob.params.slope - seed_slope) * frac;
    if (prob.step_length > 0.0) pk.step_length = seed_length + (prob.step_length - seed_length) * frac;
    OptimizeOptions ok = opt;
    ok.stability = false;
    ok.proximal = true;
    const auto stage = optimize_gait(pk, d, ok);
    if (stage.evaluation.fell) return stage;
    d = stage.decision;
  }
  return optimize_gait(prob, d, opt);
}

GaitProblem reference_flat_problem() {
  GaitProblem prob;
  prob.params.actuated = true;
  prob.params.slope = 0.0;
  prob.step_length = 0.2;
  return prob;
}

GaitDecision reference_flat_gait() {
  GaitDecision d;
  d.x_star = Vector(4);
  d.x_star << -0.10016742116155979, 0.10016742116155981, 0.51373130434181058, 0.50113379591598262;
  d.alpha = Matrix(1, 6);
  d.alpha << 0.10016742116155981, 0.13925188385212514, -0.011093720599093174,
      -0.29727129192434887, -0.12010529973478853, -0.10016742116156932;
  return d;
}

}  // namespace walklab::gait
