#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "walklab/types.hpp"

namespace walklab::numerics {

/// Right-hand side of x' = f(t, x).
using OdeFunction = std::function<Vector(double, const Vector&)>;

struct Tolerances {
  double abs = 1e-10;
  double rel = 1e-10;
  double min_step = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  /// When positive, adaptivity is disabled and this step is used throughout.
  double fixed_step = 0.0;
  long max_steps = 2'000'000;
};

/// One accepted Dormand-Prince step with its continuous extension.
struct DenseSegment {
  double t0 = 0.0;
  double h = 0.0;
  Vector r1, r2, r3, r4, r5;

  double t1() const { return t0 + h; }
  Vector eval(double t) const;
};

/// Piecewise-quartic interpolant over the accepted steps.
class DenseTrajectory {
 public:
  void push(DenseSegment seg) { segments_.push_back(std::move(seg)); }

  bool empty() const { return segments_.empty(); }
  double t_begin() const { return segments_.front().t0; }
  double t_end() const { return end_override_ ? *end_override_ : segments_.back().t1(); }
  const std::vector<DenseSegment>& segments() const { return segments_; }

  /// Evaluates the interpolant; t is clamped to [t_begin, t_end].
  Vector operator()(double t) const;

  /// Accepted step boundaries, truncated at t_end().
  std::vector<double> knots() const;

  void truncate(double t_end) { end_override_ = t_end; }

 private:
  std::vector<DenseSegment> segments_;
  std::optional<double> end_override_;
};

/// Scalar guard g(t, x). A crossing is a transition of g from non-negative to
/// negative (strictly decreasing through zero) while `armed` holds.
struct EventFunction {
  std::function<double(double, const Vector&)> value;
  std::function<bool(double, const Vector&)> armed;
};

struct IntegrationResult {
  DenseTrajectory trajectory;
  double t_final = 0.0;
  Vector x_final;
  std::optional<double> event_time;
  long accepted_steps = 0;
  long rejected_steps = 0;
  long evaluations = 0;
};

/// Adaptive Dormand-Prince 5(4) with dense output. Integrates from t0 towards
/// t1 and stops early at the first guard crossing, localized on the dense
/// output to machine precision.
///
/// Throws SimulationError(IntegratorFailure) if the step size underflows or the
/// state stops being finite.
IntegrationResult integrate(const OdeFunction& f, const Vector& x0, double t0, double t1,
                            const Tolerances& tol = {}, const EventFunction* event = nullptr);

/// Root of g on [ta, tb] given g(ta) >= 0 > g(tb) (or g(ta) > 0 >= g(tb)).
/// Bracketing Illinois iteration; returns the root estimate.
double localize_root(const std::function<double(double)>& g, double ta, double tb, double ga,
                     double gb);

}  // namespace walklab::numerics
