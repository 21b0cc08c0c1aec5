#pragma once

#include <vector>

#include "walklab/numerics/integrator.hpp"
#include "walklab/types.hpp"

namespace walklab::reduced {

/// Point mass on a massless linear spring leg. The leg angle theta is measured
/// from the vertical, positive when the mass is ahead of the foot; the angle of
/// attack is the touchdown leg angle measured from the ground.
struct SlipParams {
  double m = 80.0;
  double l0 = 1.0;
  double k = 20000.0;
  double g = 9.81;
  double aoa = 68.0 * M_PI / 180.0;

  void validate() const;
  double touchdown_height() const;  // l0 sin(aoa)
  double touchdown_angle() const;   // theta at touchdown, negative
};

/// Stance coordinates (l, dl, theta, dtheta).
using SlipStanceState = Eigen::Vector4d;

struct SlipApex {
  double z = 0.0;
  double dx = 0.0;
};

Eigen::Vector4d slip_stance_derivs(const SlipParams& p, const SlipStanceState& s);

/// Kinetic + gravity + spring energy of a stance state (foot at height 0).
double slip_stance_energy(const SlipParams& p, const SlipStanceState& s);
double slip_apex_energy(const SlipParams& p, const SlipApex& a);

struct SlipStanceArc {
  std::vector<double> t;
  std::vector<SlipStanceState> x;
  double t_liftoff = 0.0;
  SlipStanceState liftoff;
};

/// Integrates stance from `touchdown` (l = l0) until the leg returns to rest
/// length while extending. Throws SimulationError if the mass reaches the
/// ground or the leg collapses.
SlipStanceArc simulate_slip_stance(const SlipParams& p, const SlipStanceState& touchdown,
                                   const numerics::Tolerances& tol = {}, double max_time = 5.0,
                                   double sample_dt = 0.0);

/// Stance state at touchdown reached from an apex by ballistic flight.
SlipStanceState slip_touchdown_from_apex(const SlipParams& p, const SlipApex& apex);

/// Flight, touchdown, stance, liftoff, flight to the next apex. Throws
/// SimulationError if the leg cannot touch down or the mass does not take off
/// upward after stance.
SlipApex slip_apex_map(const SlipParams& p, const SlipApex& apex,
                       const numerics::Tolerances& tol = {});

struct SlipFixedPoint {
  bool converged = false;
  SlipApex apex;
  double residual = 0.0;    // |P(x*) - x*| over (z, dx)
  double derivative = 0.0;  // dz_{k+1}/dz_k at fixed energy
  int iterations = 0;
};

/// Newton on the apex-height map at fixed total energy.
SlipFixedPoint find_slip_fixed_point(const SlipParams& p, double energy, double z_guess,
                                     const numerics::Tolerances& tol = {});

/// Forward speed at an apex of height z with the given total energy.
double slip_apex_speed(const SlipParams& p, double energy, double z);

/// Symmetric single-stance walking step: touchdown with horizontal velocity
/// only, liftoff at the mirrored leg angle. The next leg touches down at the
/// instant of liftoff, so the orbit has no velocity jumps.
struct SlipWalkingGait {
  bool converged = false;
  double speed = 0.0;  // horizontal touchdown speed
  double symmetry_residual = 0.0;  // theta_liftoff + theta_touchdown
  SlipStanceArc stance;
};

SlipStanceState slip_walking_touchdown(const SlipParams& p, double speed);
SlipWalkingGait find_slip_walking_gait(const SlipParams& p, double speed_guess,
                                       const numerics::Tolerances& tol = {},
                                       double sample_dt = 1e-3);

struct ForceProfile {
  std::vector<double> t;
  std::vector<double> fz;
};

/// Vertical ground reaction k (l0 - l) cos(theta) along a stance arc.
ForceProfile slip_grf(const SlipParams& p, const SlipStanceArc& arc);

/// Double-support approximation: over one leg's stance the ground force is its
/// own profile plus the neighbouring legs' profiles shifted by +-step_period.
ForceProfile overlapped_grf(const ForceProfile& single, double step_period);

/// Interior strict local maxima of a sampled profile.
int count_interior_maxima(const std::vector<double>& f, double rel_tol = 1e-9);

}  // namespace walklab::reduced
