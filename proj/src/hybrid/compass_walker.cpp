#include "walklab/hybrid/compass_walker.hpp"

namespace walklab::hybrid {

HybridSystemSpec compass_walker(const model::CompassParams& p, CompassController ctrl,
                                WalkerOptions opt) {
  p.validate();
  if (!ctrl && p.num_inputs() != 0)
    throw ConfigError("compass_walker: actuated model needs a controller");

  auto control = [p, ctrl](double t, const Vector& x) {
    const auto s = GeneralizedState::from_stacked(x);
    ControlOutput c;
    if (ctrl) c = ctrl(t, s);
    if (c.u.size() == 0) c.u = Vector::Zero(p.num_inputs());
    return std::make_pair(s, c);
  };

  Domain d;
  d.name = "single-support";
  d.flow = [p, control](double t, const Vector& x) {
    const auto [s, c] = control(t, x);
    const auto fd = model::forward_dynamics(p, s, c.u);
    Vector dx(x.size());
    dx << s.dq, fd.ddq;
    return dx;
  };
  d.annotate = [p, control](double t, const Vector& x) {
    const auto [s, c] = control(t, x);
    SampleInfo info = c.info;
    info.u = c.u;
    info.lambda = model::forward_dynamics(p, model::to_floating(p, s), c.u).lambda;
    return info;
  };

  Edge e;
  e.source = e.target = 0;
  e.guard = [p](double, const Vector& x) { return model::swing_foot_height(p, x.head(2)); };
  const double lead = opt.min_step_fraction * p.l;
  e.armed = [p, lead](double, const Vector& x) {
    return model::swing_foot_position(p, x.head(2)).x() > lead;
  };
  e.reset = [p](const Vector& x) {
    return model::impact_map(p, GeneralizedState::from_stacked(x)).stacked();
  };

  HybridSystemSpec spec;
  spec.domains.push_back(std::move(d));
  spec.edges.push_back(std::move(e));
  return spec;
}

}  // namespace walklab::hybrid
