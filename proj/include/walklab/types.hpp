#pragma once

#include <Eigen/Dense>

#include "walklab/errors.hpp"

namespace walklab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Configuration and velocity of a planar model.
struct GeneralizedState {
  Vector q;
  Vector dq;

  GeneralizedState() = default;
  GeneralizedState(Vector q_in, Vector dq_in) : q(std::move(q_in)), dq(std::move(dq_in)) {
    if (q.size() != dq.size()) throw DimensionError("GeneralizedState: q and dq differ in size");
  }

  Eigen::Index dof() const { return q.size(); }

  /// Stacked (q, dq).
  Vector stacked() const {
    Vector x(2 * q.size());
    x << q, dq;
    return x;
  }

  static GeneralizedState from_stacked(const Vector& x) {
    if (x.size() % 2 != 0) throw DimensionError("stacked state must have even length");
    const Eigen::Index n = x.size() / 2;
    return GeneralizedState(x.head(n), x.tail(n));
  }

  bool finite() const { return q.allFinite() && dq.allFinite(); }
};

}  // namespace walklab
