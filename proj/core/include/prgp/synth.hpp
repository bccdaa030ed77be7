#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "prgp/data.hpp"
#include "prgp/physics.hpp"

namespace prgp {

// Platoon generator: a lead vehicle follows a prescribed smooth speed
// profile and each follower evolves by the configured model. Positions
// integrate forward-Euler so the velocity/acceleration definition residuals
// vanish exactly on the generated samples, as does the follower model's own
// residual.
struct SynthSpec {
  PhysicsModel follower = make_physics_model(PhysicsKind::kNewellNonlinear);
  int n_vehicles = 5;  // including the lead vehicle
  double horizon_s = 60.0;
  double dt = 0.1;

  double lead_speed_mean = 30.0;      // ft/s
  double lead_speed_amplitude = 4.0;  // ft/s
  double lead_speed_period_s = 30.0;
  double initial_gap_ft = 80.0;

  double lane_center_ft = 6.0;
  double lateral_wander_ft = 0.3;
  double wander_period_s = 20.0;

  // Per-dimension observation noise, indexed by OutputDim. Leave empty and
  // set noise_fraction instead to scale each sigma off the ground-truth
  // standard deviation of that dimension.
  Eigen::VectorXd noise_std;
  double noise_fraction = 0.0;

  std::uint64_t seed = 0;
};

struct SynthScene {
  std::vector<TrajectoryRecord> observed;
  std::vector<TrajectoryRecord> ground_truth;
  Eigen::VectorXd noise_std_used;  // per OutputDim
  std::vector<std::string> warnings;
};

SynthScene synth_generate(const SynthSpec& spec);

// Per-dimension sample standard deviation over the 7 trajectory outputs.
Eigen::VectorXd dimension_std(const std::vector<TrajectoryRecord>& records);

}  // namespace prgp
