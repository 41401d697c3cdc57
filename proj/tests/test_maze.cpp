#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "a2pr/maze.hpp"

using namespace a2pr;

TEST_CASE("default config is valid and carries the three goal rewards") {
  const MazeConfig env = MazeConfig::defaults();
  CHECK(env.valid());
  REQUIRE(env.goals.size() == 3);
  CHECK(env.goals[0].reward == 4.0);
  CHECK(env.goals[1].reward == 2.0);
  CHECK(env.goals[2].reward == 1.0);
}

TEST_CASE("reset with zero start noise lands exactly on the start center") {
  MazeConfig env = MazeConfig::defaults();
  env.start_noise = 0.0;
  Rng rng(0);
  const MazeState s = reset(env, rng);
  CHECK(s.x == env.start_x);
  CHECK(s.y == env.start_y);
  CHECK(s.vx == 0.0);
  CHECK(s.vy == 0.0);
  CHECK(s.t == 0);
}

TEST_CASE("reset is deterministic and stays in bounds") {
  const MazeConfig env = MazeConfig::defaults();
  Rng a(9), b(9);
  for (int i = 0; i < 200; ++i) {
    const MazeState sa = reset(env, a);
    const MazeState sb = reset(env, b);
    CHECK(sa.x == sb.x);
    CHECK(sa.y == sb.y);
    CHECK(sa.x >= env.x_min);
    CHECK(sa.x <= env.x_max);
    CHECK(sa.y >= env.y_min);
    CHECK(sa.y <= env.y_max);
  }
}

TEST_CASE("zero action from rest leaves the position unchanged") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 3.0;
  s.y = 3.0;
  const StepResult r = step(env, s, {0.0, 0.0});
  CHECK(r.next.x == 3.0);
  CHECK(r.next.y == 3.0);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
}

TEST_CASE("landing inside the high-reward goal pays 4 and terminates") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 1.0;
  s.y = 1.52;  // just outside the disk, moving in ends inside
  s.vx = 0.0;
  s.vy = -1.0;
  const StepResult r = step(env, s, {0.0, -1.0});
  const double dist = std::hypot(r.next.x - 1.0, r.next.y - 1.0);
  REQUIRE(dist <= 0.5);
  CHECK(r.reward == 4.0);
  CHECK(r.done);
}

TEST_CASE("horizon expiry terminates with zero reward") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 3.5;
  s.y = 3.5;
  s.t = env.max_steps - 1;
  const StepResult r = step(env, s, {0.0, 0.0});
  CHECK(r.done);
  CHECK(r.reward == 0.0);
}

TEST_CASE("dynamics are a pure function of state and action") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 2.0;
  s.y = 5.0;
  s.vx = 0.3;
  s.vy = -0.2;
  const StepResult a = step(env, s, {0.7, -0.4});
  const StepResult b = step(env, s, {0.7, -0.4});
  CHECK(a.next.x == b.next.x);
  CHECK(a.next.y == b.next.y);
  CHECK(a.next.vx == b.next.vx);
  CHECK(a.next.vy == b.next.vy);
}

TEST_CASE("speed never exceeds max_speed and position stays in the box") {
  const MazeConfig env = MazeConfig::defaults();
  Rng rng(4);
  MazeState s = reset(env, rng);
  for (int i = 0; i < 5000; ++i) {
    const StepResult r = step(env, s, random_controller(rng));
    CHECK(std::hypot(r.next.vx, r.next.vy) <= env.max_speed + 1e-12);
    CHECK(r.next.x >= env.x_min);
    CHECK(r.next.x <= env.x_max);
    CHECK(r.next.y >= env.y_min);
    CHECK(r.next.y <= env.y_max);
    s = r.done ? reset(env, rng) : r.next;
  }
}

TEST_CASE("out-of-range action components are clipped") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 3.5;
  s.y = 3.5;
  const StepResult clipped = step(env, s, {50.0, -50.0});
  const StepResult unit = step(env, s, {1.0, -1.0});
  CHECK(clipped.next.x == unit.next.x);
  CHECK(clipped.next.y == unit.next.y);
}

TEST_CASE("reward support is {0, 1, 2, 4} under random play") {
  const MazeConfig env = MazeConfig::defaults();
  const std::set<double> support = {0.0, 1.0, 2.0, 4.0};
  Rng rng(12);
  MazeState s = reset(env, rng);
  for (int i = 0; i < 20000; ++i) {
    const StepResult r = step(env, s, random_controller(rng));
    CHECK(support.count(r.reward) == 1);
    s = r.done ? reset(env, rng) : r.next;
  }
}

TEST_CASE("expert controller with zero noise is deterministic and pursues the goal") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 0.2;  // left of and below goal (1, 1)
  s.y = 0.2;
  Rng rng(0);
  const MazeAction a1 = expert_controller(env, s, 0, 0.0, rng);
  const MazeAction a2 = expert_controller(env, s, 0, 0.0, rng);
  CHECK(a1.fx == a2.fx);
  CHECK(a1.fy == a2.fy);
  CHECK(a1.fx > 0.0);
  CHECK(a1.fy > 0.0);
}

TEST_CASE("expert action at the goal center only brakes") {
  const MazeConfig env = MazeConfig::defaults();
  MazeState s;
  s.x = 1.0;
  s.y = 1.0;
  s.vx = 0.4;
  s.vy = -0.2;
  Rng rng(0);
  const MazeAction a = expert_controller(env, s, 0, 0.0, rng);
  const double mag = std::hypot(a.fx, a.fy);
  CHECK(mag <= 0.5 * std::hypot(s.vx, s.vy) + 1e-12);
}

TEST_CASE("random controller stays in the action box and is seed-stable") {
  Rng a(3), b(3);
  for (int i = 0; i < 1000; ++i) {
    const MazeAction ra = random_controller(a);
    const MazeAction rb = random_controller(b);
    CHECK(ra.fx == rb.fx);
    CHECK(ra.fy == rb.fy);
    CHECK(ra.fx >= -1.0);
    CHECK(ra.fx <= 1.0);
    CHECK(ra.fy >= -1.0);
    CHECK(ra.fy <= 1.0);
  }
}

TEST_CASE("random controller mean is near zero over many samples") {
  // Law of large numbers: empirical mean of U(-1,1) over 1e5 draws.
  Rng rng(777);
  double sx = 0.0, sy = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const MazeAction a = random_controller(rng);
    sx += a.fx;
    sy += a.fy;
  }
  CHECK(std::abs(sx / n) < 0.02);
  CHECK(std::abs(sy / n) < 0.02);
}

TEST_CASE("expert reaches every goal in at least 99% of episodes") {
  const MazeConfig env = MazeConfig::defaults();
  for (int goal = 0; goal < 3; ++goal) {
    Rng rng(1000 + goal);
    int hits = 0;
    const int episodes = 200;
    for (int ep = 0; ep < episodes; ++ep) {
      MazeState s = reset(env, rng);
      bool done = false;
      double reward = 0.0;
      while (!done) {
        const StepResult r = step(env, s, expert_controller(env, s, goal, 0.1, rng));
        reward = r.reward;
        s = r.next;
        done = r.done;
      }
      if (reward == env.goals[static_cast<std::size_t>(goal)].reward) ++hits;
    }
    CHECK(hits >= 198);  // >= 99% of 200
  }
}
