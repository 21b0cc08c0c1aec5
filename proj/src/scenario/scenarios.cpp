#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>

#include "section.hpp"
#include "walklab/control/controllers.hpp"
#include "walklab/gait/gait.hpp"
#include "walklab/hybrid/compass_walker.hpp"
#include "walklab/poincare/poincare.hpp"
#include "walklab/reduced/lipm.hpp"
#include "walklab/reduced/slip.hpp"
#include "walklab/scenario/scenario.hpp"

namespace walklab::scenario {

namespace {

constexpr double kDeg = M_PI / 180.0;

numerics::Tolerances tolerances(double v) {
  numerics::Tolerances t;
  t.abs = t.rel = v;
  return t;
}

// ---------------------------------------------------------------- sections

model::CompassParams compass_params(Section s, double default_slope_deg) {
  model::CompassParams p;
  p.m = s.positive("m", p.m);
  p.m_H = s.positive("m_H", p.m_H);
  p.l = s.positive("l", p.l);
  p.a = s.positive("a", p.a);
  p.b = s.positive("b", p.l - p.a);
  p.g = s.positive("g", p.g);
  if (s.has("slope") && s.has("slope_deg"))
    throw ConfigError("model: give either slope or slope_deg");
  p.slope = s.has("slope") ? s.number("slope", 0.0) : s.number("slope_deg", default_slope_deg) * kDeg;
  s.finish();
  p.validate();
  return p;
}

struct TrackingGait {
  gait::GaitProblem prob;
  gait::GaitDecision decision;
};

io::Json gait_problem_json(const gait::GaitProblem& prob) {
  io::Json j;
  const auto& p = prob.params;
  j["model"] = {{"m", p.m}, {"m_H", p.m_H}, {"l", p.l}, {"a", p.a}, {"b", p.b},
                {"g", p.g}, {"slope", p.slope}};
  j["degree"] = prob.degree;
  j["eps"] = prob.eps;
  j["kp"] = prob.kp;
  j["kd"] = prob.kd;
  j["u_max"] = prob.u_max;
  j["mu"] = prob.friction_mu;
  j["hip_limit"] = prob.hip_limit;
  j["step_length"] = prob.step_length;
  j["samples"] = prob.samples;
  j["positive_work_only"] = prob.positive_work_only;
  j["torque_weight"] = prob.torque_weight;
  return j;
}

TrackingGait load_gait(const std::string& path) {
  const io::Json doc = io::read_json(path);
  Section top(doc, path);
  if (top.integer("schema_version", 0) != io::kSchemaVersion)
    throw ConfigError(path + ": unsupported schema_version");
  top.text("kind", "", {"compass-hzd-gait"});
  TrackingGait g;
  Section pr = top.sub("problem");
  {
    Section m = pr.sub("model");
    auto& p = g.prob.params;
    p.m = m.positive("m", p.m);
    p.m_H = m.positive("m_H", p.m_H);
    p.l = m.positive("l", p.l);
    p.a = m.positive("a", p.a);
    p.b = m.positive("b", p.b);
    p.g = m.positive("g", p.g);
    p.slope = m.number("slope", 0.0);
    p.actuated = true;
    m.finish();
    p.validate();
  }
  g.prob.degree = pr.integer("degree", 5, 2);
  g.prob.eps = pr.positive("eps", 0.1);
  g.prob.kp = pr.positive("kp", 1.0);
  g.prob.kd = pr.positive("kd", 2.0);
  g.prob.u_max = pr.positive("u_max", 30.0);
  g.prob.friction_mu = pr.positive("mu", 0.8);
  g.prob.hip_limit = pr.positive("hip_limit", 1.2);
  g.prob.step_length = pr.number("step_length", 0.0);
  g.prob.samples = pr.integer("samples", 80, 4);
  g.prob.positive_work_only = pr.boolean("positive_work_only", false);
  g.prob.torque_weight = pr.number("torque_weight", 0.0);
  pr.finish();
  Section dec = top.sub("decision");
  g.decision.x_star = dec.vector("x_star", Vector(), 4);
  g.decision.alpha = Matrix(1, g.prob.degree + 1);
  g.decision.alpha.row(0) = dec.vector("alpha", Vector(), g.prob.degree + 1).transpose();
  dec.finish();
  // Result fields written alongside the decision are informational.
  for (const char* k : {"converged", "status", "residuals", "eigenvalues", "message"}) top.ignore(k);
  top.finish();
  return g;
}

TrackingGait tracking_gait(Section& run) {
  const std::string file = run.text("gait_file", "");
  if (!file.empty()) return load_gait(file);
  return {gait::reference_flat_problem(), gait::reference_flat_gait()};
}

hzd::PhaseVariable::Mode phase_mode(const std::string& s) {
  if (s == "time") return hzd::PhaseVariable::Mode::Time;
  if (s == "blended") return hzd::PhaseVariable::Mode::Blended;
  return hzd::PhaseVariable::Mode::State;
}

// ------------------------------------------------------------------ output

struct Output {
  std::string dir;
  RunSummary* summary;

  std::string csv(const std::string& name, const io::CsvTable& t) const {
    io::write_csv(dir + "/" + name, t);
    summary->files.push_back(name);
    return name;
  }
  void json(const std::string& name, const io::Json& j) const {
    io::write_json(dir + "/" + name, j);
    summary->files.push_back(name);
  }
};

io::Json magnitudes_json(const Eigen::VectorXcd& ev) {
  io::Json a = io::Json::array();
  for (Eigen::Index i = 0; i < ev.size(); ++i) a.push_back({ev[i].real(), ev[i].imag()});
  return a;
}

double max_norm_after_first(const hybrid::HybridTrajectory& tr) {
  double worst = 0.0;
  for (std::size_t k = 1; k < tr.arcs.size(); ++k)
    for (const auto& info : tr.arcs[k].info) {
      const double y = info.y.size() ? info.y[0] : 0.0;
      const double dy = info.extras.size() ? info.extras[0] : 0.0;
      worst = std::max(worst, std::hypot(y, dy));
    }
  return worst;
}

// Least-squares slope of log V against time over [0, window] on one arc.
double decay_time_constant(const hybrid::Arc& arc, double window, double floor) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t k = 0; k < arc.t.size(); ++k) {
    const double t = arc.t[k] - arc.t0;
    if (t > window || !(arc.info[k].V > floor)) break;
    const double y = std::log(arc.info[k].V);
    sx += t;
    sy += y;
    sxx += t * t;
    sxy += t * y;
    ++n;
  }
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return -1.0 / slope;
}

// ------------------------------------------------------------ scenarios

using Runner = std::function<void(const Output&, RunSummary&)>;

// Parses the scenario's sections; the returned closure runs it.
using Preparer = std::function<Runner(const ScenarioConfig&)>;

Runner prepare_passive(const ScenarioConfig& cfg) {
  const model::CompassParams p = compass_params(Section(cfg.model, "model"), 5.0);
  Section(cfg.controller, "controller").finish();
  Section run(cfg.run, "run");
  Vector g0(4);
  g0 << -0.3226218423, 0.3226218423, 1.1689339807, 0.0479425268;
  const Vector guess = run.vector("guess", g0, 4);
  const int steps = run.integer("steps", 50, 5);
  const double pert = run.positive("perturbation", 1e-3);
  const double dt = run.positive("sample_dt", 0.01);
  run.finish();
  const auto tol = cfg.tol.value_or(tolerances(1e-10));
  const std::uint64_t seed = cfg.seed;

  return [=](const Output& out, RunSummary& sum) {
    const auto spec = hybrid::compass_walker(p);
    poincare::PoincareOptions po;
    po.exec.tol = tol;
    const auto fp = poincare::find_fixed_point(spec, guess, po);
    io::Json m;
    m["fixed_point"] = {{"converged", fp.converged},
                        {"x_star", io::to_json(fp.x_star)},
                        {"residual", fp.residual},
                        {"newton_iterations", fp.newton_iterations},
                        {"eigenvalues", magnitudes_json(fp.eigenvalues)},
                        {"magnitudes", io::to_json(fp.magnitudes)},
                        {"max_magnitude", fp.max_magnitude()},
                        {"verdict", poincare::to_string(fp.verdict)},
                        {"message", fp.message}};
    if (!fp.converged) {
      sum.success = false;
      sum.message = "fixed point search failed: " + fp.message;
      sum.metrics = m;
      return;
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vector dir(4);
    for (int i = 0; i < 4; ++i) dir[i] = nd(rng);
    const Vector x0 = fp.x_star + pert * dir.normalized();

    hybrid::ExecOptions ex;
    ex.tol = tol;
    ex.sample_dt = dt;
    hybrid::HybridTrajectory tr;
    std::vector<double> errors;
    double t = 0.0, drift = 0.0, ke_ratio = 0.0;
    Vector x = x0;
    std::string fell;
    for (int k = 0; k < steps; ++k) {
      try {
        auto arc = hybrid::simulate_arc(spec, 0, x, t, ex);
        double e0 = model::total_energy(p, GeneralizedState::from_stacked(arc.x.front()));
        for (std::size_t i = 0; i < arc.x.size(); ++i) {
          const double e = model::total_energy(p, GeneralizedState::from_stacked(arc.x[i]));
          drift = std::max(drift, std::abs(e - e0) / std::abs(e0));
          arc.info[i].extras = Vector::Constant(1, e);
        }
        const auto& ev = *arc.event;
        ke_ratio = std::max(ke_ratio,
                            model::kinetic_energy(p, GeneralizedState::from_stacked(ev.post)) /
                                model::kinetic_energy(p, GeneralizedState::from_stacked(ev.pre)));
        x = ev.post;
        t = ev.t;
        tr.arcs.push_back(std::move(arc));
        errors.push_back((x - fp.x_star).norm());
      } catch (const SimulationError& e) {
        fell = e.what();
        break;
      }
    }
    const auto err_at = [&](int k) {
      return k <= static_cast<int>(errors.size()) ? errors[k - 1]
                                                  : std::numeric_limits<double>::quiet_NaN();
    };
    m["rollout"] = {{"steps", steps},
                    {"steps_completed", errors.size()},
                    {"fell", !fell.empty()},
                    {"failure", fell},
                    {"initial_error", (x0 - fp.x_star).norm()},
                    {"section_errors", errors},
                    {"error_step5", err_at(5)},
                    {"error_final", err_at(steps)},
                    {"contracts", fell.empty() && err_at(steps) < err_at(5)}};
    m["energy"] = {{"max_relative_drift_per_arc", drift}, {"max_impact_ke_ratio", ke_ratio}};
    sum.metrics = m;
    io::LogLayout lay;
    lay.nq = 2;
    lay.nl = 2;
    lay.extras = {"energy"};
    out.csv("trajectory.csv", io::trajectory_table(tr, lay));
  };
}

gait::GaitProblem gait_problem(const ScenarioConfig& cfg, Section& run) {
  gait::GaitProblem prob;
  prob.params = compass_params(Section(cfg.model, "model"), 0.0);
  prob.params.actuated = true;
  Section c(cfg.controller, "controller");
  prob.eps = c.positive("eps", prob.eps);
  prob.kp = c.positive("kp", prob.kp);
  prob.kd = c.positive("kd", prob.kd);
  c.finish();
  if (prob.eps > 1.0) throw ConfigError("controller.eps: must lie in (0, 1]");
  prob.degree = run.integer("degree", prob.degree, 3);
  prob.samples = run.integer("samples", prob.samples, 10);
  prob.u_max = run.positive("u_max", prob.u_max);
  prob.friction_mu = run.positive("mu", prob.friction_mu);
  prob.hip_limit = run.positive("hip_limit", prob.hip_limit);
  prob.step_length = run.number("step_length", 0.2);
  prob.positive_work_only = run.boolean("positive_work_only", false);
  prob.torque_weight = run.number("torque_weight", 0.0);
  if (prob.step_length < 0.0 || prob.torque_weight < 0.0)
    throw ConfigError("run: step_length and torque_weight must be non-negative");
  if (cfg.tol) prob.tol = *cfg.tol;
  return prob;
}

io::Json gait_document(const gait::GaitProblem& prob, const gait::GaitSolution& sol) {
  const auto& e = sol.evaluation;
  io::Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["kind"] = "compass-hzd-gait";
  j["problem"] = gait_problem_json(prob);
  j["decision"] = {{"x_star", io::to_json(sol.decision.x_star)},
                   {"alpha", io::to_json(Vector(sol.decision.alpha.row(0).transpose()))}};
  j["converged"] = sol.converged;
  j["status"] = numerics::to_string(sol.status);
  j["message"] = sol.message;
  j["residuals"] = {{"periodicity", e.periodicity.size() ? e.periodicity.norm() : NAN},
                    {"hzd_y", e.hzd_y},
                    {"hzd_dy", e.hzd_dy},
                    {"min_friction_margin", e.min_friction_margin},
                    {"max_torque", e.max_torque},
                    {"max_hip_angle", e.max_hip_angle},
                    {"step_length", e.step_length},
                    {"duration", e.duration},
                    {"mcot", e.cost}};
  j["eigenvalues"] = {{"restricted", io::to_json(sol.restricted_eigenvalues)},
                      {"full", io::to_json(sol.full_eigenvalues)}};
  return j;
}

// Closed-loop rollout of an HZD gait under its own controller.
hybrid::HybridTrajectory gait_rollout(const gait::GaitProblem& prob, const gait::GaitDecision& d,
                                      int steps, double dt) {
  hybrid::ExecOptions ex;
  ex.tol = prob.tol;
  ex.sample_dt = dt;
  return hybrid::simulate_steps(gait::closed_loop_walker(prob, d), d.x_star, steps, ex);
}

io::LogLayout compass_layout() {
  io::LogLayout lay;
  lay.nq = 2;
  lay.nu = 1;
  lay.nl = 2;
  lay.ny = 1;
  lay.extras = {"dy_0", "tau"};
  return lay;
}

void gait_report(const gait::GaitProblem& prob, const gait::GaitEvaluation& e,
                 const hybrid::HybridTrajectory& roll, io::Json& m) {
  const double per = e.periodicity.size() ? e.periodicity.norm() : NAN;
  m["residuals"] = {{"periodicity", per},
                    {"hzd_y", e.hzd_y},
                    {"hzd_dy", e.hzd_dy},
                    {"min_friction_margin", e.min_friction_margin},
                    {"max_torque", e.max_torque},
                    {"u_max", prob.u_max},
                    {"max_hip_angle", e.max_hip_angle},
                    {"step_length", e.step_length},
                    {"duration", e.duration}};
  m["mcot"] = e.cost;
  m["rollout"] = {{"steps", roll.arcs.size()},
                  {"max_output_norm_after_first_step", max_norm_after_first(roll)}};
}

Runner prepare_gait_opt(const ScenarioConfig& cfg) {
  Section run(cfg.run, "run");
  const gait::GaitProblem prob = gait_problem(cfg, run);
  Vector g0(4);
  g0 << -0.3226218423, 0.3226218423, 1.1689339807, 0.0479425268;
  const Vector guess = run.vector("passive_guess", g0, 4);
  const double seed_slope = run.number("seed_slope_deg", 5.0) * kDeg;
  const int stages = run.integer("stages", 6, 1);
  const int steps = run.integer("rollout_steps", 5, 2);
  const double dt = run.positive("sample_dt", 0.005);
  run.finish();

  return [=](const Output& out, RunSummary& sum) {
    const auto sol = gait::optimize_from_passive(prob, guess, seed_slope, stages);
    io::Json m;
    m["converged"] = sol.converged;
    m["status"] = numerics::to_string(sol.status);
    m["nlp_message"] = sol.message;
    m["evaluations"] = sol.evaluations;
    m["decision"] = {{"x_star", io::to_json(sol.decision.x_star)},
                     {"alpha", io::to_json(Vector(sol.decision.alpha.row(0).transpose()))}};
    m["eigenvalues"] = {{"restricted", io::to_json(sol.restricted_eigenvalues)},
                        {"full", io::to_json(sol.full_eigenvalues)}};
    out.json("gait.json", gait_document(prob, sol));
    if (!sol.converged || sol.evaluation.fell) {
      sum.success = false;
      sum.message = "gait optimization did not converge: " + sol.message;
      m["residuals"] = {{"max_violation", sol.max_violation}};
      sum.metrics = m;
      return;
    }
    const auto roll = gait_rollout(prob, sol.decision, steps, dt);
    gait_report(prob, sol.evaluation, roll, m);
    sum.metrics = m;
    out.csv("rollout.csv", io::trajectory_table(roll, compass_layout()));
  };
}

struct TrackSettings {
  std::string type = "fbl";
  control::PdGains pd;
  control::PdOutputMode mode = control::PdOutputMode::Inverse;
  hzd::PhaseVariable::Mode phase = hzd::PhaseVariable::Mode::State;
  double blend = 1.0;
};

// Tracking controller on the pinned compass for one step of a gait.
hybrid::CompassController tracker(const TrackingGait& g, const hzd::VirtualConstraintSet& vc,
                                  const TrackSettings& ts) {
  const auto p = g.prob.params;
  const Vector kp = Vector::Constant(1, g.prob.kp), kd = Vector::Constant(1, g.prob.kd);
  const double eps = g.prob.eps;
  return [=](double t, const GeneralizedState& s) {
    const auto ld = hzd::lie_derivatives(p, vc, s, t);
    hybrid::ControlOutput c;
    if (ts.type == "pd-output")
      c.u = control::pd_output(p, vc, s, t, ts.pd, ts.mode);
    else
      c.u = hzd::fbl_controller(ld, hzd::pd_aux(ld.y, ld.Lf, eps, kp, kd));
    c.info.y = ld.y;
    c.info.extras = Vector(2);
    c.info.extras << ld.Lf[0], ld.tau;
    return c;
  };
}

Runner prepare_track(const ScenarioConfig& cfg) {
  Section(cfg.model, "model").finish();
  Section run(cfg.run, "run");
  const TrackingGait g = tracking_gait(run);
  Section c(cfg.controller, "controller");
  TrackSettings ts;
  ts.type = c.text("type", "fbl", {"fbl", "pd-output"});
  ts.pd.kp = Vector::Constant(1, c.positive("kp", 2000.0));
  ts.pd.kd = Vector::Constant(1, c.positive("kd", 100.0));
  ts.mode = c.text("mode", "inverse", {"inverse", "transpose"}) == "transpose"
                ? control::PdOutputMode::Transpose
                : control::PdOutputMode::Inverse;
  c.finish();
  const int steps = run.integer("steps", 15, 1);
  const double vscale = run.positive("velocity_scale", 1.0);
  const Vector pert = run.vector("perturbation", Vector::Zero(4), 4);
  const double dt = run.positive("sample_dt", 0.005);
  ts.phase = phase_mode(run.text("phase", "state", {"state", "time", "blended"}));
  ts.blend = run.number("blend_weight", 0.5);
  if (ts.blend < 0.0 || ts.blend > 1.0) throw ConfigError("run.blend_weight: must lie in [0, 1]");
  const bool regulate = run.has("regulator");
  control::RegulatorGains rg;
  {
    Section r = run.sub("regulator");
    rg.kp = r.number("kp", 0.35);
    rg.kd = r.number("kd", 0.05);
    r.finish();
  }
  const double band = run.positive("settle_band", 0.02);
  run.finish();
  const auto tol = cfg.tol.value_or(tolerances(1e-10));

  return [=](const Output& out, RunSummary& sum) {
    const auto nominal = gait::evaluate_gait(g.prob, g.decision);
    if (nominal.fell) throw SolverError("gait does not complete a step: " + nominal.failure);
    control::RegulatorGains gains = rg;
    gains.v_ref = nominal.step_length / nominal.duration;

    hzd::VirtualConstraintSet vc0 = gait::virtual_constraints(g.prob, g.decision);
    vc0.phase.extrapolate = false;
    vc0.phase.mode = ts.phase;
    vc0.phase.duration = nominal.duration;
    vc0.phase.weight = ts.phase == hzd::PhaseVariable::Mode::Blended ? ts.blend : 1.0;
    const int M = vc0.desired.degree();
    const double end_angle = vc0.desired.alpha(0, M);

    hybrid::ExecOptions ex;
    ex.tol = tol;
    ex.sample_dt = dt;
    Vector x = g.decision.x_star;
    x.tail(2) *= vscale;
    x += pert;
    hybrid::HybridTrajectory tr;
    std::vector<double> v, err, drift, shifts;
    double t = 0.0, v_prev = gains.v_ref, dp = 0.0;
    for (int k = 0; k < steps; ++k) {
      auto vc = vc0;
      // A foot placement change dp moves the terminal swing angle by
      // -dp / (l cos theta) with both end coefficients, keeping the end slope.
      const double shift = -dp / (g.prob.params.l * std::cos(end_angle));
      vc.desired = control::bezier_transition(vc0.desired, Vector::Constant(1, shift));
      const auto spec = hybrid::compass_walker(g.prob.params, tracker(g, vc, ts));
      auto arc = hybrid::simulate_arc(spec, 0, x, t, ex);
      const double L = model::swing_foot_position(g.prob.params, arc.event->pre.head(2)).x();
      const double vk = L / arc.duration();
      v.push_back(vk);
      err.push_back((vk - gains.v_ref) / gains.v_ref);
      shifts.push_back(dp);
      drift.push_back((arc.event->post - x).norm());
      if (regulate) dp = control::raibert_regulator(vk, v_prev, gains);
      v_prev = vk;
      x = arc.event->post;
      t = arc.event->t;
      tr.arcs.push_back(std::move(arc));
    }
    int settle = -1;
    for (int k = steps; k >= 1; --k) {
      if (std::abs(err[k - 1]) > band) break;
      settle = k;
    }
    io::Json m;
    m["controller"] = ts.type;
    m["steps"] = steps;
    m["reference_velocity"] = gains.v_ref;
    m["step_velocities"] = v;
    m["velocity_errors"] = err;
    m["foot_shifts"] = shifts;
    m["step_drift"] = drift;
    m["final_step_drift"] = drift.back();
    m["first_step_error"] = err.front();
    m["settle_band"] = band;
    m["settle_step"] = settle > 0 ? io::Json(settle) : io::Json(nullptr);
    m["regulator"] = regulate ? io::Json{{"kp", rg.kp}, {"kd", rg.kd}} : io::Json(nullptr);
    m["max_output_norm_after_first_step"] = max_norm_after_first(tr);
    sum.metrics = m;
    out.csv("trajectory.csv", io::trajectory_table(tr, compass_layout()));
  };
}

reduced::LipmParams lipm_params(Section s) {
  reduced::LipmParams p;
  p.m = s.positive("m", p.m);
  p.z_c = s.positive("z_c", p.z_c);
  p.g = s.positive("g", p.g);
  s.finish();
  p.validate();
  return p;
}

io::LogLayout lipm_layout(std::vector<std::string> extras) {
  io::LogLayout lay;
  lay.nq = 2;
  lay.nu = 2;
  lay.extras = std::move(extras);
  return lay;
}

Vector lipm_x(const reduced::LipmState& s) {
  Vector x(4);
  x << s.c, s.dc;
  return x;
}

// Integrates the LIPM about a pivot with the general-purpose integrator.
reduced::LipmState lipm_numeric(const reduced::LipmParams& p, const reduced::LipmState& s0,
                                const reduced::Vec2& u, double t, const reduced::Vec2& pivot) {
  auto f = [&](double, const Vector& x) {
    reduced::LipmState s;
    s.c = x.head(2);
    s.dc = x.tail(2);
    Vector dx(4);
    dx << s.dc, reduced::lipm_acceleration(p, s, u, pivot);
    return dx;
  };
  const auto r = numerics::integrate(f, lipm_x(s0), 0.0, t, tolerances(1e-13));
  reduced::LipmState out;
  out.c = r.x_final.head(2);
  out.dc = r.x_final.tail(2);
  return out;
}

Runner prepare_lipm(const ScenarioConfig& cfg) {
  const auto p = lipm_params(Section(cfg.model, "model"));
  Section(cfg.controller, "controller").finish();
  Section run(cfg.run, "run");
  const int steps = run.integer("steps", 6, 1);
  const double len = run.positive("step_length", 0.3);
  const double width = run.positive("step_width", 0.2);
  const double T = run.positive("step_period", 0.8);
  const double offset = run.number("zmp_offset", 0.02);
  const double heel = run.positive("foot_heel", 0.08);
  const double toe = run.positive("foot_toe", 0.14);
  const double half_w = run.positive("foot_half_width", 0.05);
  const double dt = run.positive("sample_dt", 0.01);
  run.finish();

  return [=](const Output& out, RunSummary& sum) {
    const double w = p.omega();
    // Symmetric periodic gait about the effective pivots foot + offset.
    reduced::LipmState s;
    s.c = reduced::Vec2(0.0, 0.0);
    s.dc = reduced::Vec2(0.5 * len / std::sinh(0.5 * w * T) * w * std::cosh(0.5 * w * T),
                         0.5 * width * w * std::tanh(0.5 * w * T));
    io::CsvTable table;
    const auto lay = lipm_layout({"zmp_x", "zmp_y", "zmp_ref_x", "zmp_ref_y", "margin", "foot_x",
                                  "foot_y"});
    table.header = lay.header();
    double min_margin = std::numeric_limits<double>::infinity();
    double identity_err = 0.0, flow_err = 0.0;
    double t0 = 0.0;
    for (int k = 0; k < steps; ++k) {
      const double side = (k % 2 == 0) ? 0.5 * width : -0.5 * width;
      const reduced::Vec2 foot(0.5 * len + k * len - offset, side);
      const reduced::Vec2 u(-p.m * p.g * offset, 0.0);
      const reduced::Vec2 zmp_ref = foot - u / (p.m * p.g);
      const std::vector<reduced::Vec2> poly{
          foot + reduced::Vec2(-heel, -half_w), foot + reduced::Vec2(toe, -half_w),
          foot + reduced::Vec2(toe, half_w), foot + reduced::Vec2(-heel, half_w)};
      const int n = static_cast<int>(std::ceil(T / dt - 1e-9));
      for (int i = 0; i <= n; ++i) {
        const double tau = std::min(i * dt, T);
        const auto si = reduced::lipm_flow(p, s, u, tau, foot);
        const reduced::Vec2 acc = reduced::lipm_acceleration(p, si, u, foot);
        const reduced::Vec2 z = reduced::zmp_from_com(p, si, acc);
        const auto verdict = reduced::zmp_criterion(z, poly);
        min_margin = std::min(min_margin, verdict.margin);
        identity_err = std::max(identity_err, (z - zmp_ref).norm());
        hybrid::SampleInfo info;
        info.u = u;
        info.extras = Vector(7);
        info.extras << z, zmp_ref, verdict.margin, foot;
        const int flag = (i == 0 && k > 0) ? io::kPostImpact : (i == n ? io::kPreImpact : io::kSample);
        io::append_row(table, lay, t0 + tau, lipm_x(si), info, flag);
      }
      const auto end = reduced::lipm_flow(p, s, u, T, foot);
      const auto num = lipm_numeric(p, s, u, T, foot);
      flow_err = std::max(flow_err, (lipm_x(end) - lipm_x(num)).lpNorm<Eigen::Infinity>());
      s = end;
      t0 += T;
    }
    io::Json m;
    m["steps"] = steps;
    m["min_zmp_margin"] = min_margin;
    m["max_zmp_identity_error"] = identity_err;
    m["max_closed_form_vs_integrator"] = flow_err;
    m["samples"] = table.rows.size();
    sum.metrics = m;
    out.csv("trajectory.csv", table);
  };
}

Runner prepare_capture(const ScenarioConfig& cfg) {
  const auto p = lipm_params(Section(cfg.model, "model"));
  Section(cfg.controller, "controller").finish();
  Section run(cfg.run, "run");
  const Vector c0 = run.vector("com", Vector::Zero(2), 2);
  const Vector v0 = run.vector("com_velocity", (Vector(2) << 0.4, 0.1).finished(), 2);
  const double horizon = run.positive("time_constants", 10.0);
  const double offset = run.number("offset", 0.05);
  const double dt = run.positive("sample_dt", 0.01);
  run.finish();

  return [=](const Output& out, RunSummary& sum) {
    reduced::LipmState s0;
    s0.c = c0;
    s0.dc = v0;
    const reduced::Vec2 foot = reduced::capture_step(p, s0);
    const double T = horizon / p.omega();
    const reduced::Vec2 zero = reduced::Vec2::Zero();
    io::CsvTable table;
    const auto lay = lipm_layout({"icp_x", "icp_y", "foot_x", "foot_y", "speed"});
    table.header = lay.header();
    double drift = 0.0;
    const int n = static_cast<int>(std::ceil(T / dt - 1e-9));
    for (int i = 0; i <= n; ++i) {
      const double t = std::min(i * dt, T);
      const auto s = reduced::lipm_flow(p, s0, zero, t, foot);
      const reduced::Vec2 r = reduced::icp(p, s);
      drift = std::max(drift, (r - foot).norm());
      hybrid::SampleInfo info;
      info.u = zero;
      info.extras = Vector(5);
      info.extras << r, foot, s.dc.norm();
      io::append_row(table, lay, t, lipm_x(s), info, io::kSample);
    }
    const auto end = reduced::lipm_flow(p, s0, zero, T, foot);
    const reduced::Vec2 off(offset, 0.0);
    const auto miss = reduced::lipm_flow(p, s0, zero, T, foot + off);
    io::Json m;
    m["capture_point"] = io::to_json(Vector(foot));
    m["horizon"] = T;
    m["final_speed"] = end.dc.norm();
    m["final_com_error"] = (end.c - foot).norm();
    m["max_icp_drift"] = drift;
    m["offset"] = offset;
    m["offset_final_speed"] = miss.dc.norm();
    m["initial_speed"] = s0.dc.norm();
    sum.metrics = m;
    out.csv("trajectory.csv", table);
  };
}

reduced::SlipParams slip_params(Section s, double k_def, double aoa_deg) {
  reduced::SlipParams p;
  p.m = s.positive("m", p.m);
  p.l0 = s.positive("l0", p.l0);
  p.k = s.positive("k", k_def);
  p.g = s.positive("g", p.g);
  p.aoa = s.positive("aoa_deg", aoa_deg) * kDeg;
  s.finish();
  p.validate();
  return p;
}

Runner prepare_slip(const ScenarioConfig& cfg) {
  Section model(cfg.model, "model");
  const auto running = slip_params(model.sub("running"), 20000.0, 68.0);
  const auto walking = slip_params(model.sub("walking"), 20000.0, 74.0);
  model.finish();
  Section(cfg.controller, "controller").finish();
  Section run(cfg.run, "run");
  const double z_ref = run.positive("apex_height", 1.0);
  const double v_ref = run.positive("apex_speed", 5.0);
  const double z_guess = run.positive("apex_guess", 0.95);
  const double v_walk = run.positive("walking_speed_guess", 1.0);
  const double dt = run.positive("sample_dt", 1e-3);
  run.finish();
  const auto tol = cfg.tol.value_or(tolerances(1e-11));

  return [=](const Output& out, RunSummary& sum) {
    const double energy = reduced::slip_apex_energy(running, {z_ref, v_ref});
    const auto fp = reduced::find_slip_fixed_point(running, energy, z_guess, tol);
    io::Json m;
    m["running"] = {{"converged", fp.converged},
                    {"energy", energy},
                    {"apex_height", fp.apex.z},
                    {"apex_speed", fp.apex.dx},
                    {"residual", fp.residual},
                    {"return_derivative", fp.derivative},
                    {"newton_iterations", fp.iterations}};
    if (!fp.converged) {
      sum.success = false;
      sum.message = "no running apex fixed point";
      sum.metrics = m;
      return;
    }
    const auto td = reduced::slip_touchdown_from_apex(running, fp.apex);
    const auto stance = reduced::simulate_slip_stance(running, td, tol, 5.0, dt);
    double drift = 0.0;
    const double e0 = reduced::slip_stance_energy(running, stance.x.front());
    for (const auto& x : stance.x)
      drift = std::max(drift, std::abs(reduced::slip_stance_energy(running, x) - e0) / e0);
    m["running"]["stance_duration"] = stance.t_liftoff;
    m["running"]["stance_energy_drift"] = drift;

    io::LogLayout lay;
    lay.nq = 2;
    lay.nl = 2;
    auto stance_table = [&](const reduced::SlipParams& p, const reduced::SlipStanceArc& arc) {
      io::CsvTable t;
      t.header = lay.header();
      for (std::size_t i = 0; i < arc.t.size(); ++i) {
        const auto& s = arc.x[i];
        Vector x(4);
        x << s[0], s[2], s[1], s[3];
        const double f = p.k * (p.l0 - s[0]);
        hybrid::SampleInfo info;
        info.lambda = Vector(2);
        info.lambda << -f * std::sin(s[2]), f * std::cos(s[2]);
        io::append_row(t, lay, arc.t[i], x, info, io::kSample);
      }
      return t;
    };
    out.csv("running_stance.csv", stance_table(running, stance));

    const auto wg = reduced::find_slip_walking_gait(walking, v_walk, tol, dt);
    if (!wg.converged) {
      sum.success = false;
      sum.message = "no symmetric walking gait";
      sum.metrics = m;
      return;
    }
    const auto grf = reduced::slip_grf(walking, wg.stance);
    m["walking"] = {{"speed", wg.speed},
                    {"symmetry_residual", wg.symmetry_residual},
                    {"stance_duration", wg.stance.t_liftoff},
                    {"force_maxima", reduced::count_interior_maxima(grf.fz)},
                    {"peak_force", *std::max_element(grf.fz.begin(), grf.fz.end())}};
    sum.metrics = m;
    out.csv("walking_stance.csv", stance_table(walking, wg.stance));
  };
}

struct ClfSettings {
  double eps = 0.1;
  double gamma = 0.5;
  control::ClfQpOptions qp;
};

Runner prepare_clf(const ScenarioConfig& cfg) {
  Section(cfg.model, "model").finish();
  Section run(cfg.run, "run");
  const TrackingGait g = tracking_gait(run);
  Section c(cfg.controller, "controller");
  ClfSettings cs;
  cs.eps = c.positive("eps", 0.1);
  cs.gamma = c.positive("gamma", 0.5);
  cs.qp.rho = c.number("rho", 1e6);
  cs.qp.limits.u_max = Vector::Constant(1, c.positive("u_max", g.prob.u_max));
  cs.qp.limits.mu = c.positive("mu", g.prob.friction_mu);
  cs.qp.friction = c.boolean("friction", true);
  c.finish();
  if (cs.eps > 1.0) throw ConfigError("controller.eps: must lie in (0, 1]");
  const int steps = run.integer("steps", 2, 1);
  const Vector pert = run.vector("perturbation", (Vector(4) << 0, 0, 0, 0.2).finished(), 4);
  const double dt = run.positive("sample_dt", 0.002);
  const bool compare = run.boolean("compare_half_eps", true);
  const double window = run.positive("fit_window", 0.3);
  run.finish();
  const auto tol = cfg.tol.value_or(tolerances(1e-12));

  return [=](const Output& out, RunSummary& sum) {
    auto vc = gait::virtual_constraints(g.prob, g.decision);
    vc.phase.extrapolate = false;
    const auto p = g.prob.params;
    auto simulate = [&](double eps) {
      const auto clf = control::build_res_clf(eps, 1, cs.gamma);
      auto ctrl = [=](double t, const GeneralizedState& s) {
        const auto r = control::clf_qp(p, vc, clf, s, t, cs.qp);
        const auto o = hzd::outputs(vc, s, t);
        hybrid::ControlOutput co;
        co.u = r.u;
        co.info.V = r.V;
        co.info.delta = r.delta;
        co.info.y = o.y;
        co.info.extras = Vector(2);
        co.info.extras << o.dy[0], o.tau;
        return co;
      };
      hybrid::ExecOptions ex;
      ex.tol = tol;
      ex.sample_dt = dt;
      return hybrid::simulate_steps(hybrid::compass_walker(p, ctrl), g.decision.x_star + pert,
                                    steps, ex);
    };
    const auto tr = simulate(cs.eps);
    const double rate = cs.gamma / cs.eps;
    double excess = -std::numeric_limits<double>::infinity(), max_delta = 0.0;
    long checked = 0;
    for (const auto& arc : tr.arcs)
      for (std::size_t k = 0; k + 1 < arc.t.size(); ++k) {
        const double V0 = arc.info[k].V, V1 = arc.info[k + 1].V;
        const double bound = V0 * std::exp(-rate * (arc.t[k + 1] - arc.t[k]));
        excess = std::max(excess, (V1 - bound) / V0);
        max_delta = std::max(max_delta, arc.info[k].delta);
        ++checked;
      }
    io::Json m;
    m["eps"] = cs.eps;
    m["gamma"] = cs.gamma;
    m["rho"] = cs.qp.rho;
    m["steps"] = steps;
    m["bound_samples"] = checked;
    m["bound_max_relative_excess"] = excess;
    m["max_delta"] = max_delta;
    m["V_initial"] = tr.arcs.front().info.front().V;
    m["V_final"] = tr.arcs.back().info.back().V;
    const double tc = decay_time_constant(tr.arcs.front(), window, 0.0);
    m["decay_time_constant"] = tc;
    if (compare) {
      const auto half = simulate(0.5 * cs.eps);
      const double th = decay_time_constant(half.arcs.front(), window, 0.0);
      m["half_eps_decay_time_constant"] = th;
      m["half_eps_faster"] = th < tc;
    }
    sum.metrics = m;
    auto lay = compass_layout();
    out.csv("trajectory.csv", io::trajectory_table(tr, lay));
  };
}

struct IdQpSettings {
  control::PdGains gains;
  control::Limits limits;
  double sigma = 1e-6;
};

Runner prepare_idqp(const ScenarioConfig& cfg) {
  model::CompassParams p = compass_params(Section(cfg.model, "model"), 0.0);
  p.actuated = true;
  p.ankle_actuated = true;
  Section c(cfg.controller, "controller");
  IdQpSettings is;
  is.gains.kp = c.vector("kp", Vector::Constant(2, 1.0), 2);
  is.gains.kd = c.vector("kd", Vector::Constant(2, 2.0), 2);
  is.gains.eps = c.positive("eps", 0.1);
  is.limits.u_max = c.vector("u_max", Vector::Constant(2, 60.0), 2);
  is.limits.mu = c.positive("mu", 0.8);
  is.sigma = c.positive("sigma", 1e-6);
  c.finish();
  is.gains.validate(2);
  Section run(cfg.run, "run");
  const Vector offset = run.vector("initial_offset", (Vector(2) << 0.03, -0.05).finished(), 2);
  const double dt = run.positive("sample_dt", 0.005);
  const double demand = run.positive("tangential_demand", 400.0);
  run.finish();
  const auto tol = cfg.tol.value_or(tolerances(1e-10));

  return [=](const Output& out, RunSummary& sum) {
    const auto g = gait::reference_flat_gait();
    const auto nominal = gait::evaluate_gait(gait::reference_flat_problem(), g);
    const double T = nominal.duration;
    // Time-based outputs on the floating coordinates: both leg angles.
    hzd::VirtualConstraintSet vc;
    vc.H0 = Matrix::Zero(2, 4);
    vc.H0(0, 0) = vc.H0(1, 1) = 1.0;
    vc.desired.alpha = Matrix(2, g.alpha.cols());
    const int M = static_cast<int>(g.alpha.cols()) - 1;
    for (int i = 0; i <= M; ++i)
      vc.desired.alpha(0, i) = g.x_star[0] + (g.x_star[1] - g.x_star[0]) * i / M;
    vc.desired.alpha.row(1) = g.alpha.row(0);
    vc.phase.mode = hzd::PhaseVariable::Mode::Time;
    vc.phase.duration = T;

    struct Stats {
      double stationarity = 0, primal = 0, complementarity = 0, dual = 0, dynamics = 0, task = 0;
      double min_slack = std::numeric_limits<double>::infinity();
      long solves = 0;
      void add(const control::IdQpResult& r, double mu) {
        stationarity = std::max(stationarity, r.qp.kkt.stationarity);
        primal = std::max(primal, r.qp.kkt.primal_feasibility);
        complementarity = std::max(complementarity, r.qp.kkt.complementarity);
        dual = std::min(dual, r.qp.kkt.dual_feasibility);
        dynamics = std::max(dynamics, r.dynamics_residual);
        task = std::max(task, r.task_residual);
        min_slack = std::min(min_slack, mu / std::sqrt(2.0) * r.lambda[1] - std::abs(r.lambda[0]));
        ++solves;
      }
    };
    auto stats = std::make_shared<Stats>();
    auto solve = [=](double t, const Vector& x) {
      const auto s = GeneralizedState::from_stacked(x);
      const auto task = control::output_task(vc, s, t, is.gains);
      const auto r = control::id_qp(p, s, task, is.limits, is.sigma);
      stats->add(r, is.limits.mu);
      return r;
    };
    auto flow = [=](double t, const Vector& x) {
      const auto r = solve(t, x);
      Vector dx(8);
      dx << x.tail(4), r.ddq;
      return dx;
    };
    Vector q0 = g.x_star.head(2);
    q0 += offset;
    const auto fl = model::to_floating(p, GeneralizedState(q0, g.x_star.tail(2)));
    numerics::EventFunction ev;
    ev.value = [p](double, const Vector& x) { return model::swing_foot_height(p, x.head(4)); };
    ev.armed = [p](double, const Vector& x) {
      return model::swing_foot_position(p, x.head(4)).x() -
                 model::stance_foot_position(p, x.head(4)).x() >
             0.05 * p.l;
    };
    const auto res = numerics::integrate(flow, fl.stacked(), 0.0, 1.5 * T, tol, &ev);
    const double tend = res.event_time.value_or(1.5 * T);

    io::LogLayout lay;
    lay.nq = 4;
    lay.nu = 2;
    lay.nl = 2;
    lay.ny = 2;
    lay.extras = {"dy_0", "dy_1", "dynamics_residual", "pyramid_slack"};
    io::CsvTable table;
    table.header = lay.header();
    double y_end = 0.0;
    const int n = static_cast<int>(std::ceil(tend / dt - 1e-9));
    for (int i = 0; i <= n; ++i) {
      const double t = std::min(i * dt, tend);
      const Vector x = i == n ? res.x_final : res.trajectory(t);
      const auto r = solve(t, x);
      const auto o = hzd::outputs(vc, GeneralizedState::from_stacked(x), t);
      hybrid::SampleInfo info;
      info.u = r.u;
      info.lambda = r.lambda;
      info.y = o.y;
      info.extras = Vector(4);
      info.extras << o.dy, r.dynamics_residual,
          is.limits.mu / std::sqrt(2.0) * r.lambda[1] - std::abs(r.lambda[0]);
      io::append_row(table, lay, t, x, info, i == n && res.event_time ? io::kPreImpact : io::kSample);
      y_end = o.y.norm();
    }

    // Facet activation: demand a stance-leg acceleration whose tangential
    // reaction the pyramid cannot supply, with the torque box removed.
    const auto task0 = control::output_task(vc, fl, 0.0, is.gains);
    auto hard = task0;
    hard.ydd_star[0] -= demand;
    control::Limits open = is.limits;
    open.u_max = Vector();
    const double tracking_task = stats->task, tracking_slack = stats->min_slack;
    const auto rh = control::id_qp(p, fl, hard, open, is.sigma);
    stats->add(rh, is.limits.mu);
    const Vector& mult = rh.qp.ineq_multipliers;
    const double ratio = std::abs(rh.lambda[0]) / rh.lambda[1];

    io::Json m;
    m["solves"] = stats->solves;
    m["kkt"] = {{"stationarity", stats->stationarity},
                {"primal_feasibility", stats->primal},
                {"complementarity", stats->complementarity},
                {"dual_feasibility", stats->dual}};
    m["max_dynamics_residual"] = stats->dynamics;
    m["max_task_residual"] = tracking_task;
    m["min_pyramid_slack"] = tracking_slack;
    m["duration"] = tend;
    m["impact"] = res.event_time.has_value();
    m["final_output_error"] = y_end;
    m["facet"] = {{"tangential_demand", demand},
                  {"lambda", io::to_json(rh.lambda)},
                  {"ratio", ratio},
                  {"pyramid_multipliers", io::to_json(mult)},
                  {"mu_over_sqrt2", is.limits.mu / std::sqrt(2.0)},
                  {"dynamics_residual", rh.dynamics_residual},
                  {"task_residual", rh.task_residual}};
    sum.metrics = m;
    out.csv("trajectory.csv", table);
  };
}

const std::map<std::string, Preparer>& preparers() {
  static const std::map<std::string, Preparer> table{
      {"passive-compass", prepare_passive}, {"hzd-compass-opt", prepare_gait_opt},
      {"hzd-compass-track", prepare_track}, {"lipm-zmp", prepare_lipm},
      {"capture-point", prepare_capture},   {"slip-orbit", prepare_slip},
      {"clf-track", prepare_clf},           {"idqp-track", prepare_idqp}};
  return table;
}

Runner prepare(const ScenarioConfig& cfg) {
  const auto it = preparers().find(cfg.scenario);
  if (it == preparers().end()) throw ConfigError("unknown scenario '" + cfg.scenario + "'");
  return it->second(cfg);
}

RunSummary execute(const std::string& name, const std::string& dir, const Runner& runner) {
  std::filesystem::create_directories(dir);
  RunSummary sum;
  sum.scenario = name;
  const Output out{dir, &sum};
  const auto t0 = std::chrono::steady_clock::now();
  try {
    runner(out, sum);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    sum.success = false;
    sum.message = e.what();
  }
  sum.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_json(dir + "/summary.json", sum.to_json());
  io::write_json(dir + "/timing.json", io::Json{{"wall_time", sum.wall_time}});
  return sum;
}

}  // namespace

void validate_config(const ScenarioConfig& cfg) { prepare(cfg); }

RunSummary run_scenario(const ScenarioConfig& cfg) {
  return execute(cfg.scenario, cfg.output_dir, prepare(cfg));
}

RunSummary replay_gait(const std::string& gait_path, const std::string& output_dir,
                       const std::optional<numerics::Tolerances>& tol) {
  TrackingGait g = load_gait(gait_path);
  if (tol) g.prob.tol = *tol;
  return execute("replay", output_dir, [g](const Output& out, RunSummary& sum) {
    const auto e = gait::evaluate_gait(g.prob, g.decision);
    if (e.fell) throw SolverError("gait does not complete a step: " + e.failure);
    const auto roll = gait_rollout(g.prob, g.decision, 5, 0.005);
    io::Json m;
    gait_report(g.prob, e, roll, m);
    m["restricted_eigenvalue"] = gait::restricted_eigenvalue(g.prob, g.decision);
    sum.metrics = m;
    out.csv("rollout.csv", io::trajectory_table(roll, compass_layout()));
  });
}

}  // namespace walklab::scenario
