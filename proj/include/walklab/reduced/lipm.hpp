#pragma once

#include <vector>

#include "walklab/types.hpp"

namespace walklab::reduced {

using Vec2 = Eigen::Vector2d;

struct LipmParams {
  double m = 30.0;
  double z_c = 0.8;
  double g = 9.81;

  void validate() const;
  double omega() const;  // sqrt(g / z_c)
};

/// Horizontal COM position and velocity (x, y).
struct LipmState {
  Vec2 c = Vec2::Zero();
  Vec2 dc = Vec2::Zero();
};

/// COM acceleration about a pivot with ankle torque u (per axis).
Vec2 lipm_acceleration(const LipmParams& p, const LipmState& s, const Vec2& u = Vec2::Zero(),
                       const Vec2& pivot = Vec2::Zero());

/// Closed-form solution of c'' = (g/z_c)(c - pivot) + u/(m z_c) after time t.
LipmState lipm_flow(const LipmParams& p, const LipmState& s0, const Vec2& u, double t,
                    const Vec2& pivot = Vec2::Zero());

/// Force-weighted mean of contact points. Throws DimensionError on size
/// mismatch and SingularError if the total normal force is not positive.
Vec2 zmp_from_contacts(const std::vector<Vec2>& points, const std::vector<double>& normal_forces);

/// p = c - (z_c/g) c''.
Vec2 zmp_from_com(const LipmParams& p, const LipmState& s, const Vec2& com_acc);

struct ZmpVerdict {
  bool inside = false;
  double margin = 0.0;  // signed distance to the support boundary, >= 0 inside
};

/// Signed distance of p to the convex hull of the support points. Hulls that
/// collapse to a segment are measured along the segment (distance to the
/// nearer endpoint) when p lies on it; a single point gives -|p - point|.
ZmpVerdict zmp_criterion(const Vec2& p, const std::vector<Vec2>& support);

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts);

/// Instantaneous capture point c + dc / omega.
Vec2 icp(const LipmParams& p, const LipmState& s);

/// Foot placement that brings the pendulum to rest (the current ICP).
Vec2 capture_step(const LipmParams& p, const LipmState& s);

}  // namespace walklab::reduced
