#include "walklab/hybrid/hybrid.hpp"

#include <cmath>
#include <set>

namespace walklab::hybrid {

void HybridSystemSpec::validate() const {
  const int n = static_cast<int>(domains.size());
  if (n == 0) throw DimensionError("hybrid spec: no domains");
  if (static_cast<int>(edges.size()) != n)
    throw DimensionError("hybrid spec: need exactly one outgoing edge per domain");
  std::vector<int> next(n, -1);
  for (const auto& e : edges) {
    if (e.source < 0 || e.source >= n || e.target < 0 || e.target >= n)
      throw DimensionError("hybrid spec: edge endpoint out of range");
    if (next[e.source] != -1) throw DimensionError("hybrid spec: vertex with two outgoing edges");
    if (!e.guard || !e.reset) throw DimensionError("hybrid spec: edge without guard or reset");
    next[e.source] = e.target;
  }
  for (const auto& d : domains)
    if (!d.flow) throw DimensionError("hybrid spec: domain without vector field");
  std::set<int> seen;
  int v = 0;
  for (int k = 0; k < n; ++k) {
    seen.insert(v);
    v = next[v];
  }
  if (v != 0 || static_cast<int>(seen.size()) != n)
    throw DimensionError("hybrid spec: edges do not form a single directed cycle");
}

const Edge& HybridSystemSpec::outgoing(int vertex) const {
  for (const auto& e : edges)
    if (e.source == vertex) return e;
  throw DimensionError("hybrid spec: vertex has no outgoing edge");
}

std::vector<Vector> HybridTrajectory::section_states() const {
  std::vector<Vector> out;
  for (const auto& a : arcs)
    if (!a.x.empty()) out.push_back(a.x.front());
  if (!arcs.empty() && arcs.back().event) out.push_back(arcs.back().event->post);
  return out;
}

Vector HybridTrajectory::final_state() const {
  if (arcs.empty()) throw SimulationError(SimulationError::Kind::NoEvent, "empty trajectory");
  const Arc& a = arcs.back();
  return a.event ? a.event->post : a.x.back();
}

Arc simulate_arc(const HybridSystemSpec& spec, int vertex, const Vector& x0, double t0,
                 const ExecOptions& opt) {
  if (vertex < 0 || vertex >= static_cast<int>(spec.domains.size()))
    throw DimensionError("simulate_arc: vertex out of range");
  const Domain& dom = spec.domains[vertex];
  const Edge& edge = spec.outgoing(vertex);

  numerics::EventFunction ev;
  ev.value = edge.guard;
  ev.armed = edge.armed;
  const auto res = numerics::integrate(dom.flow, x0, 0.0, opt.max_time, opt.tol, &ev);
  if (!res.event_time)
    throw SimulationError(SimulationError::Kind::NoEvent,
                          "no guard event in domain '" + dom.name + "' within max_time");
  const double te = *res.event_time;
  if (te < opt.zeno_eps)
    throw SimulationError(SimulationError::Kind::Zeno,
                          "guard fired immediately in domain '" + dom.name + "'");

  Arc arc;
  arc.vertex = vertex;
  arc.t0 = t0;
  arc.dense = res.trajectory;

  std::vector<double> local;
  if (opt.sample_dt > 0.0) {
    for (long k = 0;; ++k) {
      const double s = static_cast<double>(k) * opt.sample_dt;
      if (s >= te) break;
      local.push_back(s);
    }
    local.push_back(te);
  } else {
    local = res.trajectory.knots();
  }
  for (std::size_t i = 0; i < local.size(); ++i) {
    Vector xi = (i == 0) ? x0 : (i + 1 == local.size() ? res.x_final : res.trajectory(local[i]));
    arc.t.push_back(t0 + local[i]);
    if (dom.annotate) arc.info.push_back(dom.annotate(local[i], xi));
    else arc.info.emplace_back();
    arc.x.push_back(std::move(xi));
  }

  EventRecord rec;
  rec.edge = static_cast<int>(&edge - spec.edges.data());
  rec.t = t0 + te;
  rec.pre = res.x_final;
  rec.guard_value = edge.guard(te, rec.pre);
  const Vector f = dom.flow(te, rec.pre);
  const double d = 1e-7;
  rec.guard_rate = (edge.guard(te + d, rec.pre + d * f) - edge.guard(te - d, rec.pre - d * f)) /
                   (2.0 * d);
  rec.post = edge.reset(rec.pre);
  arc.event = std::move(rec);
  return arc;
}

HybridTrajectory simulate_steps(const HybridSystemSpec& spec, const Vector& x0, int n_steps,
                                const ExecOptions& opt, int vertex) {
  if (n_steps < 1) throw DimensionError("simulate_steps: n_steps must be at least 1");
  spec.validate();
  HybridTrajectory traj;
  Vector x = x0;
  double t = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    Arc arc = simulate_arc(spec, vertex, x, t, opt);
    x = arc.event->post;
    t = arc.event->t;
    vertex = spec.edges[arc.event->edge].target;
    traj.arcs.push_back(std::move(arc));
  }
  return traj;
}

}  // namespace walklab::hybrid
