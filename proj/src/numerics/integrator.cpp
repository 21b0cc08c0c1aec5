#include "walklab/numerics/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace walklab::numerics {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension (Hairer, dopri5 contd5).
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

// Local error is held below a fraction of the requested tolerance so global
// error over long horizons stays near it.
constexpr double kLocalTarget = 0.2;

double error_norm(const Vector& err, const Vector& y0, const Vector& y1, const Tolerances& tol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = kLocalTarget * (tol.abs + tol.rel * std::max(std::abs(y0[i]), std::abs(y1[i])));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(std::max<Eigen::Index>(1, err.size())));
}

double initial_step(const OdeFunction& f, double t0, const Vector& x0, const Vector& f0,
                    double direction_span, const Tolerances& tol, long& evals) {
  Vector sc = (tol.abs + tol.rel * x0.array().abs()).matrix();
  const double dnf = std::sqrt((f0.array() / sc.array()).square().mean());
  const double dny = std::sqrt((x0.array() / sc.array()).square().mean());
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
  h = std::min(h, direction_span);
  const Vector x1 = x0 + h * f0;
  const Vector f1 = f(t0 + h, x1);
  ++evals;
  const double der2 = std::sqrt(((f1 - f0).array() / sc.array()).square().mean()) / h;
  const double der12 = std::max(std::abs(der2), dnf);
  const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
  return std::min({100.0 * h, h1, direction_span});
}

}  // namespace

Vector DenseSegment::eval(double t) const {
  const double th = h == 0.0 ? 0.0 : (t - t0) / h;
  const double th1 = 1.0 - th;
  return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
}

Vector DenseTrajectory::operator()(double t) const {
  if (segments_.empty()) throw Error("DenseTrajectory: empty");
  t = std::clamp(t, t_begin(), t_end());
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double tv, const DenseSegment& s) { return tv < s.t1(); });
  if (it == segments_.end()) it = std::prev(segments_.end());
  return it->eval(t);
}

std::vector<double> DenseTrajectory::knots() const {
  std::vector<double> out;
  if (segments_.empty()) return out;
  const double te = t_end();
  out.push_back(segments_.front().t0);
  for (const auto& s : segments_) {
    if (s.t1() >= te) break;
    out.push_back(s.t1());
  }
  if (out.back() < te) out.push_back(te);
  return out;
}

double localize_root(const std::function<double(double)>& g, double ta, double tb, double ga,
                     double gb) {
  if (ga == 0.0) return ta;
  if (gb == 0.0) return tb;
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    double tm = (ta * gb - tb * ga) / (gb - ga);
    if (!(tm > ta && tm < tb)) tm = 0.5 * (ta + tb);
    const double gm = g(tm);
    if (gm == 0.0) return tm;
    if ((gm > 0.0) == (ga > 0.0)) {
      ta = tm;
      ga = gm;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      tb = tm;
      gb = gm;
      if (side == +1) ga *= 0.5;
      side = +1;
    }
    if (tb - ta <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(tb)))
      break;
  }
  // Return the endpoint with the smaller residual; ties go to the later time.
  return std::abs(ga) < std::abs(gb) ? ta : tb;
}

IntegrationResult integrate(const OdeFunction& f, const Vector& x0, double t0, double t1,
                            const Tolerances& tol, const EventFunction* event) {
  IntegrationResult res;
  res.t_final = t0;
  res.x_final = x0;
  if (!(t1 > t0)) {
    DenseSegment s{t0, 0.0, x0, Vector::Zero(x0.size()), Vector::Zero(x0.size()),
                   Vector::Zero(x0.size()), Vector::Zero(x0.size())};
    res.trajectory.push(std::move(s));
    return res;
  }

  double t = t0;
  Vector x = x0;
  Vector k1 = f(t, x);
  ++res.evaluations;
  const bool fixed = tol.fixed_step > 0.0;
  double h = fixed ? tol.fixed_step
                   : std::min(tol.max_step, initial_step(f, t, x, k1, t1 - t0, tol, res.evaluations));

  double g_prev = 0.0;
  if (event) g_prev = event->value(t, x);

  double fac_old = 1e-4;
  bool last_rejected = false;
  while (t < t1) {
    if (res.accepted_steps + res.rejected_steps > tol.max_steps)
      throw SimulationError(SimulationError::Kind::IntegratorFailure, "integrate: too many steps");
    if (t + h > t1) h = t1 - t;
    if (!fixed && h < tol.min_step && t + h < t1)
      throw SimulationError(SimulationError::Kind::IntegratorFailure,
                            "integrate: step size underflow");

    const Vector k2 = f(t + c2 * h, x + h * (a21 * k1));
    const Vector k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector x_new = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const Vector k7 = f(t + h, x_new);
    res.evaluations += 6;

    if (!x_new.allFinite())
      throw SimulationError(SimulationError::Kind::IntegratorFailure,
                            "integrate: non-finite state");

    double err = 0.0;
    if (!fixed) {
      const Vector e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      err = error_norm(e, x, x_new, tol);
    }

    if (fixed || err <= 1.0) {
      DenseSegment seg;
      seg.t0 = t;
      seg.h = h;
      seg.r1 = x;
      seg.r2 = x_new - x;
      seg.r3 = h * k1 - seg.r2;
      seg.r4 = seg.r2 - h * k7 - seg.r3;
      seg.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      const double t_new = (t + h > t1 || t1 - (t + h) < 1e-15 * std::abs(t1)) ? t1 : t + h;
      res.trajectory.push(seg);
      ++res.accepted_steps;

      if (event) {
        const double g_new = event->value(t_new, x_new);
        const bool armed = !event->armed || event->armed(t_new, x_new);
        const bool crossed = (g_prev > 0.0 && g_new <= 0.0) || (g_prev == 0.0 && g_new < 0.0);
        if (armed && crossed) {
          const auto& segref = res.trajectory.segments().back();
          auto gfun = [&](double tt) { return event->value(tt, segref.eval(tt)); };
          const double te = localize_root(gfun, t, t_new, g_prev, g_new);
          res.trajectory.truncate(te);
          res.event_time = te;
          res.t_final = te;
          res.x_final = segref.eval(te);
          return res;
        }
        g_prev = g_new;
      }

      t = t_new;
      x = x_new;
      k1 = k7;
      if (!fixed) {
        // Lund-stabilized PI step control (as in dopri5).
        const double fac11 = std::pow(std::max(err, 1e-16), 0.2 - 0.04 * 0.75);
        double fac = fac11 / std::pow(fac_old, 0.04);
        fac = std::clamp(fac / 0.9, 0.1, 5.0);
        double h_new = h / fac;
        if (last_rejected) h_new = std::min(h_new, h);
        fac_old = std::max(err, 1e-4);
        h = std::min(h_new, tol.max_step);
        last_rejected = false;
      }
    } else {
      const double fac11 = std::pow(err, 0.2 - 0.04 * 0.75);
      h = h / std::min(5.0, fac11 / 0.9);
      ++res.rejected_steps;
      last_rejected = true;
    }
  }
  res.t_final = t;
  res.x_final = x;
  return res;
}

}  // namespace walklab::numerics
