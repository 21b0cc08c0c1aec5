#pragma once

#include <functional>

#include "walklab/hybrid/hybrid.hpp"
#include "walklab/model/compass.hpp"

namespace walklab::hybrid {

struct ControlOutput {
  Vector u;
  SampleInfo info;  // u and lambda are filled in by the walker
};

/// Feedback on the pinned compass state; t is time since the step began.
using CompassController = std::function<ControlOutput(double, const GeneralizedState&)>;

struct WalkerOptions {
  /// The strike guard is armed once the swing foot leads the stance foot by
  /// this fraction of the leg length; earlier ground contact is scuffing.
  double min_step_fraction = 0.05;
};

/// Single-domain hybrid system for the pinned compass: swing phase, swing-foot
/// strike guard, plastic impact plus relabeling. The state is (q, dq).
/// Without a controller the walker is passive (the params must then have no
/// inputs).
HybridSystemSpec compass_walker(const model::CompassParams& p, CompassController ctrl = {},
                                WalkerOptions opt = {});

}  // namespace walklab::hybrid
