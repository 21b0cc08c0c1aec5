#include "walklab/reduced/slip.hpp"

#include <algorithm>
#include <cmath>

#include "walklab/numerics/newton.hpp"

namespace walklab::reduced {

void SlipParams::validate() const {
  if (!(m > 0) || !(l0 > 0) || !(k > 0) || !(g > 0))
    throw ConfigError("slip: mass, rest length, stiffness and gravity must be positive");
  if (!(aoa > 0) || !(aoa < M_PI / 2)) throw ConfigError("slip: angle of attack must lie in (0, pi/2)");
}

double SlipParams::touchdown_height() const { return l0 * std::sin(aoa); }
double SlipParams::touchdown_angle() const { return -(M_PI / 2 - aoa); }

Eigen::Vector4d slip_stance_derivs(const SlipParams& p, const SlipStanceState& s) {
  const double l = s[0], dl = s[1], th = s[2], dth = s[3];
  if (!(l > 0)) throw DimensionError("slip: leg length must be positive");
  const double f = p.k * (l - p.l0);
  Eigen::Vector4d d;
  d << dl, l * dth * dth - p.g * std::cos(th) - f / p.m, dth,
      (p.g * std::sin(th) - 2.0 * dl * dth) / l;
  return d;
}

double slip_stance_energy(const SlipParams& p, const SlipStanceState& s) {
  const double l = s[0], dl = s[1], th = s[2], dth = s[3];
  return 0.5 * p.m * (dl * dl + l * l * dth * dth) + p.m * p.g * l * std::cos(th) +
         0.5 * p.k * (l - p.l0) * (l - p.l0);
}

double slip_apex_energy(const SlipParams& p, const SlipApex& a) {
  return p.m * p.g * a.z + 0.5 * p.m * a.dx * a.dx;
}

SlipStanceArc simulate_slip_stance(const SlipParams& p, const SlipStanceState& td,
                                   const numerics::Tolerances& tol, double max_time,
                                   double sample_dt) {
  auto f = [&p](double, const Vector& x) {
    return Vector(slip_stance_derivs(p, SlipStanceState(x)));
  };
  // Liftoff: l rises back through l0. The mass height is folded into the same
  // guard so a fall also stops the integration.
  numerics::EventFunction ev;
  ev.value = [&p](double, const Vector& x) {
    return std::min(p.l0 - x[0], x[0] * std::cos(x[2]));
  };
  const auto res = numerics::integrate(f, Vector(td), 0.0, max_time, tol, &ev);
  if (!res.event_time)
    throw SimulationError(SimulationError::Kind::NoEvent, "slip: no liftoff within max_time");
  if (res.x_final[0] * std::cos(res.x_final[2]) < 0.5 * p.l0 * 1e-6 ||
      std::abs(res.x_final[0] - p.l0) > 1e-8 * p.l0)
    throw SimulationError(SimulationError::Kind::NoEvent, "slip: mass fell during stance");

  SlipStanceArc arc;
  arc.t_liftoff = *res.event_time;
  arc.liftoff = res.x_final;
  std::vector<double> ts;
  if (sample_dt > 0) {
    for (long i = 0;; ++i) {
      const double t = static_cast<double>(i) * sample_dt;
      if (t >= arc.t_liftoff) break;
      ts.push_back(t);
    }
    ts.push_back(arc.t_liftoff);
  } else {
    ts = res.trajectory.knots();
  }
  for (std::size_t i = 0; i < ts.size(); ++i) {
    arc.t.push_back(ts[i]);
    arc.x.push_back(i == 0 ? td : (i + 1 == ts.size() ? arc.liftoff : SlipStanceState(res.trajectory(ts[i]))));
  }
  return arc;
}

SlipStanceState slip_touchdown_from_apex(const SlipParams& p, const SlipApex& apex) {
  const double z_td = p.touchdown_height();
  if (apex.z < z_td)
    throw SimulationError(SimulationError::Kind::NoEvent, "slip: apex below touchdown height");
  const double vz = -std::sqrt(2.0 * p.g * (apex.z - z_td));
  const double th = p.touchdown_angle();
  const Eigen::Vector2d radial(std::sin(th), std::cos(th)), tangential(std::cos(th), -std::sin(th));
  const Eigen::Vector2d v(apex.dx, vz);
  SlipStanceState s;
  s << p.l0, v.dot(radial), th, v.dot(tangential) / p.l0;
  return s;
}

SlipApex slip_apex_map(const SlipParams& p, const SlipApex& apex, const numerics::Tolerances& tol) {
  const auto arc = simulate_slip_stance(p, slip_touchdown_from_apex(p, apex), tol);
  const double l = arc.liftoff[0], dl = arc.liftoff[1], th = arc.liftoff[2], dth = arc.liftoff[3];
  const double vx = dl * std::sin(th) + l * dth * std::cos(th);
  const double vz = dl * std::cos(th) - l * dth * std::sin(th);
  if (!(vz > 0.0))
    throw SimulationError(SimulationError::Kind::NoEvent, "slip: no upward takeoff after stance");
  return {l * std::cos(th) + vz * vz / (2.0 * p.g), vx};
}

double slip_apex_speed(const SlipParams& p, double energy, double z) {
  const double ke = energy / p.m - p.g * z;
  if (ke < 0) throw DimensionError("slip: apex height exceeds the available energy");
  return std::sqrt(2.0 * ke);
}

SlipFixedPoint find_slip_fixed_point(const SlipParams& p, double energy, double z_guess,
                                     const numerics::Tolerances& tol) {
  auto r = [&](const Vector& z) {
    const SlipApex a{z[0], slip_apex_speed(p, energy, z[0])};
    return Vector::Constant(1, slip_apex_map(p, a, tol).z - z[0]);
  };
  const auto nr = numerics::newton_fd(r, Vector::Constant(1, z_guess));
  SlipFixedPoint out;
  out.iterations = nr.iterations;
  if (!nr.converged()) return out;
  out.apex = {nr.x[0], slip_apex_speed(p, energy, nr.x[0])};
  const SlipApex next = slip_apex_map(p, out.apex, tol);
  out.residual = std::hypot(next.z - out.apex.z, next.dx - out.apex.dx);
  out.derivative = numerics::fd_jacobian(r, nr.x)(0, 0) + 1.0;
  out.converged = out.residual < 1e-8;
  return out;
}

SlipStanceState slip_walking_touchdown(const SlipParams& p, double speed) {
  const double th = p.touchdown_angle();
  SlipStanceState s;
  s << p.l0, speed * std::sin(th), th, speed * std::cos(th) / p.l0;
  return s;
}

SlipWalkingGait find_slip_walking_gait(const SlipParams& p, double speed_guess,
                                       const numerics::Tolerances& tol, double sample_dt) {
  auto r = [&](const Vector& v) {
    const auto arc = simulate_slip_stance(p, slip_walking_touchdown(p, v[0]), tol);
    return Vector::Constant(1, arc.liftoff[2] + p.touchdown_angle());
  };
  numerics::NewtonOptions opt;
  opt.tol = 1e-11;
  const auto nr = numerics::newton_fd(r, Vector::Constant(1, speed_guess), opt);
  SlipWalkingGait g;
  if (!nr.converged()) return g;
  g.speed = nr.x[0];
  g.stance = simulate_slip_stance(p, slip_walking_touchdown(p, g.speed), tol, 5.0, sample_dt);
  g.symmetry_residual = g.stance.liftoff[2] + p.touchdown_angle();
  g.converged = true;
  return g;
}

ForceProfile slip_grf(const SlipParams& p, const SlipStanceArc& arc) {
  ForceProfile f;
  for (std::size_t i = 0; i < arc.t.size(); ++i) {
    f.t.push_back(arc.t[i]);
    f.fz.push_back(p.k * (p.l0 - arc.x[i][0]) * std::cos(arc.x[i][2]));
  }
  return f;
}

namespace {

double interp(const ForceProfile& f, double t) {
  if (f.t.empty() || t < f.t.front() || t > f.t.back()) return 0.0;
  const auto it = std::upper_bound(f.t.begin(), f.t.end(), t);
  if (it == f.t.end()) return f.fz.back();
  const std::size_t i = static_cast<std::size_t>(it - f.t.begin());
  if (i == 0) return f.fz.front();
  const double w = (t - f.t[i - 1]) / (f.t[i] - f.t[i - 1]);
  return (1 - w) * f.fz[i - 1] + w * f.fz[i];
}

}  // namespace

ForceProfile overlapped_grf(const ForceProfile& single, double step_period) {
  ForceProfile out;
  for (std::size_t i = 0; i < single.t.size(); ++i) {
    const double t = single.t[i];
    out.t.push_back(t);
    out.fz.push_back(single.fz[i] + interp(single, t + step_period) + interp(single, t - step_period));
  }
  return out;
}

int count_interior_maxima(const std::vector<double>& f, double rel_tol) {
  if (f.size() < 3) return 0;
  const double scale = *std::max_element(f.begin(), f.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  });
  const double eps = rel_tol * std::abs(scale);
  // Trend of the sequence with plateaus (|diff| <= eps) carried over.
  int count = 0, trend = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double d = f[i] - f[i - 1];
    const int s = d > eps ? 1 : (d < -eps ? -1 : 0);
    if (s == 0) continue;
    if (trend == 1 && s == -1) ++count;
    trend = s;
  }
  return count;
}

}  // namespace walklab::reduced
