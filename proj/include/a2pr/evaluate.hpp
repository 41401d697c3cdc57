#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "a2pr/critic.hpp"
#include "a2pr/dataset.hpp"
#include "a2pr/maze.hpp"
#include "a2pr/mlp.hpp"
#include "a2pr/policy.hpp"

namespace a2pr {

// Fixed stream tags so every consumer derives disjoint RNG streams from one
// run seed.
namespace stream {
constexpr uint64_t kTrainEval = 1;
constexpr uint64_t kDiagStates = 2;
constexpr uint64_t kAnchorRandom = 3;
constexpr uint64_t kAnchorExpert = 4;
constexpr uint64_t kCliEval = 5;
constexpr uint64_t kCliTraj = 6;
constexpr uint64_t kCliStates = 7;
}  // namespace stream

// Monte-Carlo score anchors for the normalized scale:
// 100 * (J - j_random) / (j_expert - j_random).
struct Anchors {
  double j_random = 0.0;
  double j_expert = 1.0;
  int episodes = 0;
};

Anchors compute_anchors(const MazeConfig& env, int episodes_each);

// Cached per environment config: <dir>/anchors_<env_hash>.json. Computes
// and writes the sidecar when missing; empty dir skips caching.
Anchors anchors_for(const MazeConfig& env, const std::string& cache_dir,
                    int episodes_each = 1000);

double normalized_score(double j, const Anchors& anchors);

uint64_t env_config_hash(const MazeConfig& env);

struct TrajectoryPoint {
  int episode = 0;
  int t = 0;
  double x = 0, y = 0, vx = 0, vy = 0;
  double fx = 0, fy = 0;
  double reward = 0;
  bool done = false;
};

struct EpisodeResult {
  double undiscounted_return = 0.0;
  double discounted_return = 0.0;
  int steps = 0;
  int goal_index = -1;  // -1 when no goal was reached
};

// One deterministic-policy episode. noise_scale > 0 perturbs only the
// observation the policy sees; the dynamics always see the true state.
// When start is non-null the episode begins from *start instead of reset().
EpisodeResult rollout_episode(const MazeConfig& env, const MlpParams& actor,
                              const NormStats& stats, Rng& rng, double noise_scale,
                              double gamma, const MazeState* start = nullptr,
                              std::vector<TrajectoryPoint>* traj = nullptr,
                              int episode_index = 0);

struct EvalReport {
  int episodes = 0;
  double return_mean = 0.0;
  double return_std = 0.0;
  double normalized_score = 0.0;
  std::vector<double> goal_hit_fractions;
  double length_mean = 0.0;
  int length_min = 0;
  int length_max = 0;
};

// Episode e uses the stream derive(seed, tag_a, tag_b, e), so reports are
// reproducible and episodes independent.
EvalReport evaluate_policy(const MlpParams& actor, const NormStats& stats,
                           const MazeConfig& env, int episodes, double noise_scale,
                           uint64_t seed, uint64_t tag_a, uint64_t tag_b,
                           const Anchors& anchors,
                           std::vector<TrajectoryPoint>* traj = nullptr);

struct TrueQReport {
  int states = 0;
  double est_q_mean = 0.0;
  double true_q_mean = 0.0;
  double gap = 0.0;  // est - true
};

// Draws n start states from the initial distribution and samples them once.
Mat sample_initial_states(const MazeConfig& env, int n, uint64_t seed, uint64_t tag);

// est = min(q1, q2)(s, pi(s)) on normalized states; true = discounted
// Monte-Carlo return of a full rollout under pi from the same state.
TrueQReport true_q_report(const MlpParams& actor, const CriticEnsemble& critic,
                          const NormStats& stats, const MazeConfig& env, double gamma,
                          const Mat& initial_states);

struct MeanAdvantageRow {
  std::string method;
  double mean_adv_policy = 0.0;  // mean A(s, pi(s)) under the method's critic
  double mean_adv_data = 0.0;    // mean A(s, a_data) under the same critic
};

MeanAdvantageRow mean_advantage_row(const std::string& method, const MlpParams& actor,
                                    const CriticEnsemble& critic, const NormStats& stats,
                                    const OfflineDataset& dataset,
                                    const std::vector<int64_t>& state_indices);

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj);

}  // namespace a2pr
