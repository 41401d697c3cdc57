#pragma once

#include <vector>

#include "a2pr/matrix.hpp"
#include "a2pr/rng.hpp"

namespace a2pr {

struct GoalSpec {
  double x = 0.0;
  double y = 0.0;
  double reward = 0.0;
  double radius = 0.5;
};

// Point-mass maze: force actions in [-1,1]^2, damped velocity, box bounds,
// sparse terminal reward at the first goal disk the agent lands in.
struct MazeConfig {
  std::vector<GoalSpec> goals;
  double x_min = 0.0, x_max = 7.0;
  double y_min = 0.0, y_max = 7.0;
  double dt = 0.1;
  double damping = 0.9;
  double max_speed = 2.0;
  int max_steps = 200;
  double start_x = 3.5, start_y = 3.5;
  double start_noise = 0.25;

  static MazeConfig defaults();
  bool valid() const;
};

struct MazeState {
  double x = 0.0, y = 0.0;
  double vx = 0.0, vy = 0.0;
  int t = 0;
};

struct MazeAction {
  double fx = 0.0, fy = 0.0;
};

struct StepResult {
  MazeState next;
  double reward = 0.0;
  bool done = false;
};

constexpr int kMazeStateDim = 4;
constexpr int kMazeActionDim = 2;

// Observation fed to policies: raw (x, y, vx, vy). Normalization is the
// dataset module's job.
Vec observe(const MazeState& state);

MazeState reset(const MazeConfig& config, Rng& rng);

StepResult step(const MazeConfig& config, const MazeState& state, MazeAction action);

// Proportional pursuit of one goal: unit vector toward it, a velocity
// braking term, optional Gaussian noise; clipped to the action box.
MazeAction expert_controller(const MazeConfig& config, const MazeState& state,
                             int target_goal_index, double noise_scale, Rng& rng);

MazeAction random_controller(Rng& rng);

}  // namespace a2pr
