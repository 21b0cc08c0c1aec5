#pragma once

#include "walklab/types.hpp"

namespace walklab::model {

/// Planar compass biped on a slope. Angles are absolute, measured from the
/// slope normal, each leg's angle being that of its foot-to-hip vector.
///
/// Two coordinate sets are supported and selected by the state dimension:
///   pinned   q = (theta_st, theta_sw)             stance foot is an ideal pivot
///   floating q = (theta_st, theta_sw, x_hip, y_hip) stance foot held by a
///            two-row contact constraint (tangential, normal)
/// Positions are expressed in the slope frame (x downhill, y along the normal).
struct CompassParams {
  double m = 5.0;       // each leg
  double m_H = 10.0;    // hip
  double l = 1.0;
  double a = 0.5;       // hip to leg mass
  double b = 0.5;       // leg mass to foot
  double slope = 0.0;   // rad, positive downhill
  double g = 9.81;
  bool actuated = false;        // hip torque between the legs
  bool ankle_actuated = false;  // stance-ankle torque against the ground

  /// Throws ConfigError on non-positive values or a + b != l.
  void validate() const;

  double total_mass() const { return m_H + 2.0 * m; }
  int num_inputs() const { return (ankle_actuated ? 1 : 0) + (actuated ? 1 : 0); }
};

struct DynamicsTerms {
  Matrix D;
  Vector H;
  Matrix B;
  Matrix Jh;      // empty (0 rows) for the pinned model
  Vector dJh_dq;  // dJh/dt * dq
};

struct ForwardDynamics {
  Vector ddq;
  Vector lambda;  // ground reaction (tangential, normal) for the floating model
};

struct ImpactResult {
  GeneralizedState post;        // pinned, relabeled
  GeneralizedState post_floating;  // floating, relabeled
  Vector impulse;               // swing-foot contact impulse (tangential, normal)
};

struct Centroidal {
  Eigen::Vector2d com;
  Eigen::Vector2d com_velocity;
  double angular_momentum = 0.0;  // about the COM
};

struct FrictionVerdict {
  bool inside = false;
  double margin = 0.0;
};

DynamicsTerms dynamics_terms(const CompassParams& p, const GeneralizedState& s);

ForwardDynamics forward_dynamics(const CompassParams& p, const GeneralizedState& s,
                                 const Vector& u);

/// Plastic impact at swing-foot strike followed by the stance/swing swap.
/// Throws GuardError if the swing foot is not on the ground (tolerance
/// guard_tol) or not moving toward it.
ImpactResult impact_map_full(const CompassParams& p, const GeneralizedState& pre,
                             double guard_tol = 1e-6);
GeneralizedState impact_map(const CompassParams& p, const GeneralizedState& pre,
                            double guard_tol = 1e-6);

/// Swaps stance and swing labels; an involution.
Matrix relabel_matrix();

double kinetic_energy(const CompassParams& p, const GeneralizedState& s);
double potential_energy(const CompassParams& p, const Vector& q);
/// Kinetic plus gravitational energy, zero at rest with both legs along the
/// slope normal.
double total_energy(const CompassParams& p, const GeneralizedState& s);

Centroidal centroidal(const CompassParams& p, const GeneralizedState& s);
/// COM acceleration implied by a joint acceleration.
Eigen::Vector2d com_acceleration(const CompassParams& p, const GeneralizedState& s,
                                 const Vector& ddq);

FrictionVerdict friction_check(const Vector& lambda, double mu);

Eigen::Vector2d hip_position(const CompassParams& p, const Vector& q);
Eigen::Vector2d stance_foot_position(const CompassParams& p, const Vector& q);
Eigen::Vector2d swing_foot_position(const CompassParams& p, const Vector& q);
/// Jacobian of the swing-foot position, 2 x dof.
Matrix swing_foot_jacobian(const CompassParams& p, const Vector& q);

/// Signed swing-foot height above the slope (the impact guard).
double swing_foot_height(const CompassParams& p, const Vector& q);
double swing_foot_height_rate(const CompassParams& p, const GeneralizedState& s);

/// Pinned state expressed in floating coordinates (stance foot at the origin).
GeneralizedState to_floating(const CompassParams& p, const GeneralizedState& pinned);

}  // namespace walklab::model
