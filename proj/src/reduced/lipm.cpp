#include "walklab/reduced/lipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace walklab::reduced {

void LipmParams::validate() const {
  if (!(m > 0) || !(z_c > 0) || !(g > 0))
    throw ConfigError("lipm: mass, com height and gravity must be positive");
}

double LipmParams::omega() const { return std::sqrt(g / z_c); }

Vec2 lipm_acceleration(const LipmParams& p, const LipmState& s, const Vec2& u, const Vec2& pivot) {
  return (p.g / p.z_c) * (s.c - pivot) + u / (p.m * p.z_c);
}

LipmState lipm_flow(const LipmParams& p, const LipmState& s0, const Vec2& u, double t,
                    const Vec2& pivot) {
  const double w = p.omega();
  // Equilibrium shifted by the ankle torque.
  const Vec2 eq = pivot - u / (p.m * p.g);
  const double ch = std::cosh(w * t), sh = std::sinh(w * t);
  LipmState s;
  s.c = eq + (s0.c - eq) * ch + s0.dc * (sh / w);
  s.dc = (s0.c - eq) * (w * sh) + s0.dc * ch;
  return s;
}

Vec2 zmp_from_contacts(const std::vector<Vec2>& points, const std::vector<double>& normal_forces) {
  if (points.size() != normal_forces.size() || points.empty())
    throw DimensionError("zmp_from_contacts: need one normal force per contact point");
  Vec2 acc = Vec2::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    acc += normal_forces[i] * points[i];
    total += normal_forces[i];
  }
  if (!(total > 0.0)) throw SingularError("zmp_from_contacts: total normal force is not positive");
  return acc / total;
}

Vec2 zmp_from_com(const LipmParams& p, const LipmState& s, const Vec2& com_acc) {
  return s.c - (p.z_c / p.g) * com_acc;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double L2 = ab.squaredNorm();
  const double s = L2 > 0 ? std::clamp((p - a).dot(ab) / L2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

}  // namespace

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& q : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], q) <= 0) --k;
    h[k++] = q;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

ZmpVerdict zmp_criterion(const Vec2& p, const std::vector<Vec2>& support) {
  if (support.empty()) throw DimensionError("zmp_criterion: empty support polygon");
  const auto hull = convex_hull(support);
  ZmpVerdict v;
  if (hull.size() == 1) {
    v.margin = -(p - hull[0]).norm();
  } else if (hull.size() == 2) {
    const Vec2 a = hull[0], b = hull[1];
    const Vec2 dir = (b - a).normalized();
    const double off = std::abs(dir.x() * (p - a).y() - dir.y() * (p - a).x());
    const double s = (p - a).dot(dir), len = (b - a).norm();
    if (off <= 1e-12 * std::max(1.0, len) && s >= 0.0 && s <= len)
      v.margin = std::min(s, len - s);
    else
      v.margin = -segment_distance(p, a, b);
  } else {
    bool inside = true;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec2& a = hull[i];
      const Vec2& b = hull[(i + 1) % hull.size()];
      if (cross(a, b, p) < 0) inside = false;
      d = std::min(d, segment_distance(p, a, b));
    }
    v.margin = inside ? d : -d;
  }
  v.inside = v.margin >= 0.0;
  return v;
}

Vec2 icp(const LipmParams& p, const LipmState& s) { return s.c + s.dc / p.omega(); }

Vec2 capture_step(const LipmParams& p, const LipmState& s) { return icp(p, s); }

}  // namespace walklab::reduced
