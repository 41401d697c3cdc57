#include "a2pr/maze.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace a2pr {

MazeConfig MazeConfig::defaults() {
  MazeConfig c;
  c.goals = {{1.0, 1.0, 4.0, 0.5}, {6.0, 1.0, 2.0, 0.5}, {1.0, 6.0, 1.0, 0.5}};
  return c;
}

bool MazeConfig::valid() const {
  if (goals.empty() || dt <= 0.0 || damping <= 0.0 || damping > 1.0) return false;
  if (max_speed <= 0.0 || max_steps < 1 || start_noise < 0.0) return false;
  if (x_min >= x_max || y_min >= y_max) return false;
  for (const auto& g : goals) {
    if (g.radius <= 0.0) return false;
    if (g.x < x_min || g.x > x_max || g.y < y_min || g.y > y_max) return false;
  }
  return true;
}

Vec observe(const MazeState& state) {
  Vec s(kMazeStateDim);
  s << state.x, state.y, state.vx, state.vy;
  return s;
}

MazeState reset(const MazeConfig& config, Rng& rng) {
  MazeState s;
  s.x = std::clamp(config.start_x + rng.uniform(-config.start_noise, config.start_noise),
                   config.x_min, config.x_max);
  s.y = std::clamp(config.start_y + rng.uniform(-config.start_noise, config.start_noise),
                   config.y_min, config.y_max);
  s.vx = 0.0;
  s.vy = 0.0;
  s.t = 0;
  return s;
}

StepResult step(const MazeConfig& config, const MazeState& state, MazeAction action) {
  action.fx = std::clamp(action.fx, -1.0, 1.0);
  action.fy = std::clamp(action.fy, -1.0, 1.0);

  double vx = config.damping * state.vx + action.fx * config.dt;
  double vy = config.damping * state.vy + action.fy * config.dt;
  const double speed = std::sqrt(vx * vx + vy * vy);
  if (speed > config.max_speed) {
    vx *= config.max_speed / speed;
    vy *= config.max_speed / speed;
  }

  StepResult out;
  out.next.x = std::clamp(state.x + vx * config.dt, config.x_min, config.x_max);
  out.next.y = std::clamp(state.y + vy * config.dt, config.y_min, config.y_max);
  out.next.vx = vx;
  out.next.vy = vy;
  out.next.t = state.t + 1;

  // Highest-reward goal wins if several disks are hit at once; nearest
  // breaks a reward tie.
  int hit = -1;
  for (int i = 0; i < static_cast<int>(config.goals.size()); ++i) {
    const auto& g = config.goals[i];
    const double dx = out.next.x - g.x;
    const double dy = out.next.y - g.y;
    if (std::sqrt(dx * dx + dy * dy) > g.radius) continue;
    if (hit < 0) {
      hit = i;
      continue;
    }
    const auto& best = config.goals[hit];
    const double d_best = std::hypot(out.next.x - best.x, out.next.y - best.y);
    const double d_new = std::hypot(dx, dy);
    if (g.reward > best.reward || (g.reward == best.reward && d_new < d_best)) hit = i;
  }

  if (hit >= 0) {
    out.reward = config.goals[hit].reward;
    out.done = true;
  } else {
    out.reward = 0.0;
    out.done = out.next.t >= config.max_steps;
  }
  return out;
}

MazeAction expert_controller(const MazeConfig& config, const MazeState& state,
                             int target_goal_index, double noise_scale, Rng& rng) {
  if (target_goal_index < 0 || target_goal_index >= static_cast<int>(config.goals.size()))
    throw std::invalid_argument("expert_controller: goal index out of range");
  const auto& g = config.goals[target_goal_index];
  const double ex = g.x - state.x;
  const double ey = g.y - state.y;
  const double dist = std::sqrt(ex * ex + ey * ey);
  double dir_x = 0.0, dir_y = 0.0;
  if (dist > 1e-9) {
    dir_x = ex / dist;
    dir_y = ey / dist;
  }
  constexpr double kBrake = 0.5;
  MazeAction a;
  a.fx = dir_x - kBrake * state.vx + noise_scale * rng.normal();
  a.fy = dir_y - kBrake * state.vy + noise_scale * rng.normal();
  a.fx = std::clamp(a.fx, -1.0, 1.0);
  a.fy = std::clamp(a.fy, -1.0, 1.0);
  return a;
}

MazeAction random_controller(Rng& rng) {
  MazeAction a;
  a.fx = rng.uniform(-1.0, 1.0);
  a.fy = rng.uniform(-1.0, 1.0);
  return a;
}

}  // namespace a2pr
