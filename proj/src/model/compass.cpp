#include "walklab/model/compass.hpp"

#include <cmath>
#include <vector>

namespace walklab::model {

namespace {

using Vec2 = Eigen::Vector2d;

Vec2 e(double th) { return {std::sin(th), std::cos(th)}; }
Vec2 de(double th) { return {std::cos(th), -std::sin(th)}; }

struct PointMass {
  double m;
  Vec2 p;
  Matrix J;   // 2 x n
  Vec2 bias;  // dJ/dt * dq
};

bool is_floating(const Vector& q) {
  if (q.size() == 2) return false;
  if (q.size() == 4) return true;
  throw DimensionError("compass: state must have 2 (pinned) or 4 (floating) coordinates");
}

// Point on leg `leg` (0 stance, 1 swing) at distance d from the hip toward the
// foot, with its Jacobian and velocity-product term.
PointMass leg_point(const CompassParams& p, const Vector& q, const Vector& dq, int leg, double d,
                    double mass) {
  const Eigen::Index n = q.size();
  const double th = q[leg];
  const double w = dq.size() ? dq[leg] : 0.0;
  PointMass pm{mass, Vec2::Zero(), Matrix::Zero(2, n), Vec2::Zero()};
  if (is_floating(q)) {
    pm.p = Vec2(q[2], q[3]) - d * e(th);
    pm.J.col(leg) = -d * de(th);
    pm.J.block(0, 2, 2, 2).setIdentity();
    pm.bias = d * e(th) * w * w;
  } else {
    const double w0 = dq.size() ? dq[0] : 0.0;
    const Vec2 hip = p.l * e(q[0]);
    pm.p = hip - d * e(th);
    pm.J.col(0) += p.l * de(q[0]);
    pm.J.col(leg) -= d * de(th);
    pm.bias = -p.l * e(q[0]) * w0 * w0 + d * e(th) * w * w;
  }
  return pm;
}

std::vector<PointMass> masses(const CompassParams& p, const Vector& q, const Vector& dq) {
  return {leg_point(p, q, dq, 0, 0.0, p.m_H), leg_point(p, q, dq, 0, p.a, p.m),
          leg_point(p, q, dq, 1, p.a, p.m)};
}

Vec2 gravity_dir(const CompassParams& p) {
  // Unit vector of gravity in the slope frame.
  return {std::sin(p.slope), -std::cos(p.slope)};
}

Matrix actuation(const CompassParams& p, Eigen::Index n) {
  Matrix B = Matrix::Zero(n, p.num_inputs());
  int c = 0;
  if (p.ankle_actuated) B(0, c++) = 1.0;
  if (p.actuated) {
    B(0, c) = -1.0;
    B(1, c) = 1.0;
  }
  return B;
}

void check_state(const GeneralizedState& s) {
  if (s.q.size() != s.dq.size()) throw DimensionError("compass: q and dq differ in size");
  is_floating(s.q);
}

}  // namespace

void CompassParams::validate() const {
  if (!(m > 0) || !(m_H > 0) || !(l > 0) || !(a > 0) || !(b > 0) || !(g > 0))
    throw ConfigError("compass: masses, lengths and gravity must be positive");
  if (std::abs(a + b - l) > 1e-12 * l) throw ConfigError("compass: a + b must equal l");
  if (!std::isfinite(slope)) throw ConfigError("compass: slope must be finite");
}

DynamicsTerms dynamics_terms(const CompassParams& p, const GeneralizedState& s) {
  check_state(s);
  const Eigen::Index n = s.q.size();
  DynamicsTerms t;
  t.D = Matrix::Zero(n, n);
  t.H = Vector::Zero(n);
  const Vec2 gd = gravity_dir(p);
  for (const auto& pm : masses(p, s.q, s.dq)) {
    t.D += pm.m * pm.J.transpose() * pm.J;
    t.H += pm.m * pm.J.transpose() * (pm.bias - p.g * gd);
  }
  t.D = 0.5 * (t.D + t.D.transpose());
  t.B = actuation(p, n);
  if (n == 4) {
    const PointMass foot = leg_point(p, s.q, s.dq, 0, p.l, 0.0);
    t.Jh = foot.J;
    t.dJh_dq = foot.bias;
  } else {
    t.Jh = Matrix::Zero(0, n);
    t.dJh_dq = Vector::Zero(0);
  }
  return t;
}

ForwardDynamics forward_dynamics(const CompassParams& p, const GeneralizedState& s,
                                 const Vector& u) {
  const DynamicsTerms t = dynamics_terms(p, s);
  if (u.size() != t.B.cols()) throw DimensionError("compass: input size does not match B");
  const Eigen::Index n = s.q.size(), mh = t.Jh.rows();
  const Vector rhs = t.B * u - t.H;
  ForwardDynamics out;
  if (mh == 0) {
    out.ddq = t.D.llt().solve(rhs);
    out.lambda = Vector::Zero(0);
    return out;
  }
  Matrix K = Matrix::Zero(n + mh, n + mh);
  K.topLeftCorner(n, n) = t.D;
  K.topRightCorner(n, mh) = -t.Jh.transpose();
  K.bottomLeftCorner(mh, n) = t.Jh;
  Vector r(n + mh);
  r << rhs, -t.dJh_dq;
  const auto lu = K.fullPivLu();
  if (lu.rank() < n + mh) throw SingularError("compass: contact KKT matrix is singular");
  const Vector sol = lu.solve(r);
  out.ddq = sol.head(n);
  out.lambda = sol.tail(mh);
  return out;
}

Matrix relabel_matrix() {
  Matrix R(2, 2);
  R << 0, 1, 1, 0;
  return R;
}

GeneralizedState to_floating(const CompassParams& p, const GeneralizedState& pinned) {
  check_state(pinned);
  if (pinned.q.size() != 2) throw DimensionError("to_floating expects a pinned state");
  Vector q(4), dq(4);
  const Vec2 hip = p.l * e(pinned.q[0]);
  const Vec2 vhip = p.l * de(pinned.q[0]) * pinned.dq[0];
  q << pinned.q, hip;
  dq << pinned.dq, vhip;
  return {q, dq};
}

ImpactResult impact_map_full(const CompassParams& p, const GeneralizedState& pre,
                             double guard_tol) {
  check_state(pre);
  if (pre.q.size() != 2) throw DimensionError("impact_map expects a pinned state");
  const double h = swing_foot_height(p, pre.q);
  if (std::abs(h) > guard_tol)
    throw GuardError("impact_map: swing foot is not on the ground (height " + std::to_string(h) +
                     ")");
  if (swing_foot_height_rate(p, pre) > guard_tol)
    throw GuardError("impact_map: swing foot is moving away from the ground");

  const GeneralizedState fl = to_floating(p, pre);
  const Matrix D = dynamics_terms(p, fl).D;
  const Matrix J2 = swing_foot_jacobian(p, fl.q);
  Matrix K = Matrix::Zero(6, 6);
  K.topLeftCorner(4, 4) = D;
  K.topRightCorner(4, 2) = -J2.transpose();
  K.bottomLeftCorner(2, 4) = J2;
  Vector r = Vector::Zero(6);
  r.head(4) = D * fl.dq;
  const auto lu = K.fullPivLu();
  if (lu.rank() < 6) throw SingularError("impact_map: impact KKT matrix is singular");
  const Vector sol = lu.solve(r);

  ImpactResult out;
  out.impulse = sol.tail(2);
  Vector qf = fl.q, dqf = sol.head(4);
  std::swap(qf[0], qf[1]);
  std::swap(dqf[0], dqf[1]);
  out.post_floating = GeneralizedState(qf, dqf);
  out.post = GeneralizedState(relabel_matrix() * pre.q, dqf.head(2));
  return out;
}

GeneralizedState impact_map(const CompassParams& p, const GeneralizedState& pre, double guard_tol) {
  return impact_map_full(p, pre, guard_tol).post;
}

double kinetic_energy(const CompassParams& p, const GeneralizedState& s) {
  const DynamicsTerms t = dynamics_terms(p, s);
  return 0.5 * s.dq.dot(t.D * s.dq);
}

double potential_energy(const CompassParams& p, const Vector& q) {
  const Vec2 up = -gravity_dir(p);
  double u = 0.0;
  for (const auto& pm : masses(p, q, Vector::Zero(q.size()))) u += pm.m * p.g * up.dot(pm.p);
  // Reference: stance foot at the origin, both legs along the normal.
  const double ref = p.g * std::cos(p.slope) * (p.m_H * p.l + 2.0 * p.m * p.b);
  return u - ref;
}

double total_energy(const CompassParams& p, const GeneralizedState& s) {
  return kinetic_energy(p, s) + potential_energy(p, s.q);
}

Centroidal centroidal(const CompassParams& p, const GeneralizedState& s) {
  check_state(s);
  Centroidal c;
  c.com.setZero();
  c.com_velocity.setZero();
  const auto ms = masses(p, s.q, s.dq);
  const double M = p.total_mass();
  for (const auto& pm : ms) {
    c.com += pm.m * pm.p / M;
    c.com_velocity += pm.m * (pm.J * s.dq) / M;
  }
  for (const auto& pm : ms) {
    const Vec2 r = pm.p - c.com;
    const Vec2 v = pm.J * s.dq - c.com_velocity;
    c.angular_momentum += pm.m * (r.x() * v.y() - r.y() * v.x());
  }
  return c;
}

Eigen::Vector2d com_acceleration(const CompassParams& p, const GeneralizedState& s,
                                 const Vector& ddq) {
  check_state(s);
  Vec2 acc = Vec2::Zero();
  for (const auto& pm : masses(p, s.q, s.dq)) acc += pm.m * (pm.J * ddq + pm.bias);
  return acc / p.total_mass();
}

FrictionVerdict friction_check(const Vector& lambda, double mu) {
  if (lambda.size() != 2) throw DimensionError("friction_check: expects (tangential, normal)");
  FrictionVerdict v;
  v.margin = mu * lambda[1] - std::abs(lambda[0]);
  v.inside = lambda[1] >= 0.0 && v.margin >= 0.0;
  return v;
}

Eigen::Vector2d hip_position(const CompassParams& p, const Vector& q) {
  if (is_floating(q)) return {q[2], q[3]};
  return p.l * e(q[0]);
}

Eigen::Vector2d stance_foot_position(const CompassParams& p, const Vector& q) {
  if (is_floating(q)) return Vec2(q[2], q[3]) - p.l * e(q[0]);
  return Vec2::Zero();
}

Eigen::Vector2d swing_foot_position(const CompassParams& p, const Vector& q) {
  return hip_position(p, q) - p.l * e(q[1]);
}

Matrix swing_foot_jacobian(const CompassParams& p, const Vector& q) {
  return leg_point(p, q, Vector::Zero(q.size()), 1, p.l, 0.0).J;
}

double swing_foot_height(const CompassParams& p, const Vector& q) {
  const double ground = stance_foot_position(p, q).y();
  return swing_foot_position(p, q).y() - ground;
}

double swing_foot_height_rate(const CompassParams& p, const GeneralizedState& s) {
  check_state(s);
  double v = (swing_foot_jacobian(p, s.q) * s.dq).y();
  if (s.q.size() == 4) v -= (leg_point(p, s.q, s.dq, 0, p.l, 0.0).J * s.dq).y();
  return v;
}

}  // namespace walklab::model
