#pragma once

#include "reachguard/model.hpp"

namespace reachguard {

/// Everything needed to build and analyse one attacked loop.
struct SystemModel {
  PlantModel plant;
  ControllerModel controller;
  DetectorModel detector;
  AttackModel attack;
  SafeSet safe;
};

/// Linearized three-tank process with an output-feedback controller,
/// both level sensors attacked, chi^2-style unit ellipsoid as detector threshold.
SystemModel three_tank();

}  // namespace reachguard
