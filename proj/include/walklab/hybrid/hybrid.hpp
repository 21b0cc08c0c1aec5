#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "walklab/numerics/integrator.hpp"
#include "walklab/types.hpp"

namespace walklab::hybrid {

/// Per-sample quantities logged alongside the state. Any field may be empty.
struct SampleInfo {
  Vector u;
  Vector lambda;
  Vector y;
  double V = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  Vector extras;
};

/// Continuous domain. Callbacks receive the time since the start of the arc.
struct Domain {
  std::string name;
  numerics::OdeFunction flow;
  std::function<SampleInfo(double, const Vector&)> annotate;
};

/// Transition out of `source`. The guard fires when `guard` decreases through
/// zero while `armed` (if set) holds.
struct Edge {
  int source = 0;
  int target = 0;
  std::function<double(double, const Vector&)> guard;
  std::function<bool(double, const Vector&)> armed;
  std::function<Vector(const Vector&)> reset;
};

/// Directed cycle of domains; edge i leaves vertex edges[i].source.
struct HybridSystemSpec {
  std::vector<Domain> domains;
  std::vector<Edge> edges;

  /// Throws DimensionError unless every vertex has exactly one outgoing edge
  /// and the edges form a single cycle through all vertices.
  void validate() const;
  const Edge& outgoing(int vertex) const;
};

struct ExecOptions {
  numerics::Tolerances tol;
  double max_time = 10.0;   // per arc
  double zeno_eps = 1e-6;
  double sample_dt = 0.0;   // 0 logs the integrator's accepted steps
};

struct EventRecord {
  int edge = 0;
  double t = 0.0;
  Vector pre;
  Vector post;
  double guard_value = 0.0;
  double guard_rate = 0.0;
};

struct Arc {
  int vertex = 0;
  double t0 = 0.0;  // global start time
  std::vector<double> t;  // global sample times
  std::vector<Vector> x;
  std::vector<SampleInfo> info;
  numerics::DenseTrajectory dense;  // in arc-local time
  std::optional<EventRecord> event;

  double duration() const { return t.empty() ? 0.0 : t.back() - t0; }
};

struct HybridTrajectory {
  std::vector<Arc> arcs;

  bool empty() const { return arcs.empty(); }
  /// Post-reset state at the start of each arc.
  std::vector<Vector> section_states() const;
  Vector final_state() const;
};

/// Integrates one domain until its outgoing guard fires.
/// Throws SimulationError: NoEvent past max_time, Zeno if the guard fires
/// within zeno_eps of the arc start, IntegratorFailure on solver breakdown.
Arc simulate_arc(const HybridSystemSpec& spec, int vertex, const Vector& x0, double t0,
                 const ExecOptions& opt = {});

/// Chains arcs and resets for n_steps arcs starting at `vertex`.
HybridTrajectory simulate_steps(const HybridSystemSpec& spec, const Vector& x0, int n_steps,
                                const ExecOptions& opt = {}, int vertex = 0);

}  // namespace walklab::hybrid
