#include "a2pr/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "a2pr/format.hpp"

namespace a2pr {

namespace {

int best_goal_index(const MazeConfig& env) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(env.goals.size()); ++i)
    if (env.goals[i].reward > env.goals[best].reward) best = i;
  return best;
}

}  // namespace

uint64_t env_config_hash(const MazeConfig& env) {
  std::string text;
  for (const auto& g : env.goals)
    text += fmt_real(g.x) + "," + fmt_real(g.y) + "," + fmt_real(g.reward) + "," +
            fmt_real(g.radius) + ";";
  text += fmt_real(env.x_min) + "," + fmt_real(env.x_max) + "," + fmt_real(env.y_min) + "," +
          fmt_real(env.y_max) + "," + fmt_real(env.dt) + "," + fmt_real(env.damping) + "," +
          fmt_real(env.max_speed) + "," + std::to_string(env.max_steps) + "," +
          fmt_real(env.start_x) + "," + fmt_real(env.start_y) + "," + fmt_real(env.start_noise);
  return fnv1a(text);
}

Anchors compute_anchors(const MazeConfig& env, int episodes_each) {
  const uint64_t hash = env_config_hash(env);
  Anchors a;
  a.episodes = episodes_each;

  double random_sum = 0.0;
  for (int ep = 0; ep < episodes_each; ++ep) {
    Rng rng = Rng::derive(hash, stream::kAnchorRandom, 0, static_cast<uint64_t>(ep));
    MazeState state = reset(env, rng);
    double ret = 0.0;
    bool done = false;
    while (!done) {
      const StepResult r = step(env, state, random_controller(rng));
      ret += r.reward;
      state = r.next;
      done = r.done;
    }
    random_sum += ret;
  }
  a.j_random = random_sum / episodes_each;

  const int goal = best_goal_index(env);
  double expert_sum = 0.0;
  for (int ep = 0; ep < episodes_each; ++ep) {
    Rng rng = Rng::derive(hash, stream::kAnchorExpert, 0, static_cast<uint64_t>(ep));
    MazeState state = reset(env, rng);
    double ret = 0.0;
    bool done = false;
    while (!done) {
      const StepResult r = step(env, state, expert_controller(env, state, goal, 0.0, rng));
      ret += r.reward;
      state = r.next;
      done = r.done;
    }
    expert_sum += ret;
  }
  a.j_expert = expert_sum / episodes_each;

  if (a.j_expert <= a.j_random)
    throw std::runtime_error("anchors: expert return does not exceed random return");
  return a;
}

Anchors anchors_for(const MazeConfig& env, const std::string& cache_dir, int episodes_each) {
  if (cache_dir.empty()) return compute_anchors(env, episodes_each);
  const uint64_t hash = env_config_hash(env);
  char name[64];
  std::snprintf(name, sizeof(name), "anchors_%016llx.json",
                static_cast<unsigned long long>(hash));
  const std::filesystem::path path = std::filesystem::path(cache_dir) / name;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    Anchors a;
    a.j_random = j.at("j_random").get<double>();
    a.j_expert = j.at("j_expert").get<double>();
    a.episodes = j.at("episodes").get<int>();
    if (a.episodes >= episodes_each) return a;
  }
  const Anchors a = compute_anchors(env, episodes_each);
  std::filesystem::create_directories(path.parent_path());
  nlohmann::json j;
  j["env_hash"] = fmt_u64_hex(hash);
  j["j_random"] = a.j_random;
  j["j_expert"] = a.j_expert;
  j["episodes"] = a.episodes;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  return a;
}

double normalized_score(double j, const Anchors& anchors) {
  return 100.0 * (j - anchors.j_random) / (anchors.j_expert - anchors.j_random);
}

EpisodeResult rollout_episode(const MazeConfig& env, const MlpParams& actor,
                              const NormStats& stats, Rng& rng, double noise_scale,
                              double gamma, const MazeState* start,
                              std::vector<TrajectoryPoint>* traj, int episode_index) {
  MazeState state = start ? *start : reset(env, rng);
  EpisodeResult result;
  double discount = 1.0;
  bool done = false;
  // Which goal disk the episode ended in, resolved by reward value.
  double final_reward = 0.0;
  while (!done) {
    Vec obs = observe(state);
    if (noise_scale > 0.0)
      for (int j = 0; j < obs.size(); ++j) obs(j) += noise_scale * rng.normal();
    const Vec s_norm = normalize_state(stats, obs);
    const Mat a = act(actor, s_norm.transpose());
    MazeAction action{a(0, 0), a(0, 1)};
    const StepResult r = step(env, state, action);
    if (traj)
      traj->push_back({episode_index, state.t, state.x, state.y, state.vx, state.vy,
                       action.fx, action.fy, r.reward, r.done});
    result.undiscounted_return += r.reward;
    result.discounted_return += discount * r.reward;
    discount *= gamma;
    result.steps += 1;
    final_reward = r.reward;
    state = r.next;
    done = r.done;
  }
  if (final_reward > 0.0)
    for (int i = 0; i < static_cast<int>(env.goals.size()); ++i) {
      const auto& g = env.goals[i];
      if (std::hypot(state.x - g.x, state.y - g.y) <= g.radius && g.reward == final_reward) {
        result.goal_index = i;
        break;
      }
    }
  return result;
}

EvalReport evaluate_policy(const MlpParams& actor, const NormStats& stats,
                           const MazeConfig& env, int episodes, double noise_scale,
                           uint64_t seed, uint64_t tag_a, uint64_t tag_b,
                           const Anchors& anchors, std::vector<TrajectoryPoint>* traj) {
  EvalReport report;
  report.episodes = episodes;
  report.goal_hit_fractions.assign(env.goals.size(), 0.0);
  if (episodes < 1) return report;
  double sum = 0.0, sq_sum = 0.0;
  long len_sum = 0;
  report.length_min = env.max_steps;
  report.length_max = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng = Rng::derive(seed, tag_a, tag_b, static_cast<uint64_t>(ep));
    const EpisodeResult r =
        rollout_episode(env, actor, stats, rng, noise_scale, 1.0, nullptr, traj, ep);
    sum += r.undiscounted_return;
    sq_sum += r.undiscounted_return * r.undiscounted_return;
    len_sum += r.steps;
    report.length_min = std::min(report.length_min, r.steps);
    report.length_max = std::max(report.length_max, r.steps);
    if (r.goal_index >= 0)
      report.goal_hit_fractions[static_cast<std::size_t>(r.goal_index)] += 1.0;
  }
  for (auto& f : report.goal_hit_fractions) f /= episodes;
  report.return_mean = sum / episodes;
  report.return_std =
      std::sqrt(std::max(sq_sum / episodes - report.return_mean * report.return_mean, 0.0));
  report.length_mean = static_cast<double>(len_sum) / episodes;
  report.normalized_score = normalized_score(report.return_mean, anchors);
  return report;
}

Mat sample_initial_states(const MazeConfig& env, int n, uint64_t seed, uint64_t tag) {
  Mat states(n, kMazeStateDim);
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::derive(seed, tag, 0, static_cast<uint64_t>(i));
    states.row(i) = observe(reset(env, rng)).transpose();
  }
  return states;
}

TrueQReport true_q_report(const MlpParams& actor, const CriticEnsemble& critic,
                          const NormStats& stats, const MazeConfig& env, double gamma,
                          const Mat& initial_states) {
  TrueQReport report;
  report.states = static_cast<int>(initial_states.rows());
  if (report.states == 0) return report;

  const Mat s_norm = normalize_states(stats, initial_states);
  const Mat pi = act(actor, s_norm);
  const Vec est = min_q(critic, s_norm, pi);
  report.est_q_mean = est.mean();

  Rng unused(0);
  double true_sum = 0.0;
  for (int i = 0; i < report.states; ++i) {
    MazeState start;
    start.x = initial_states(i, 0);
    start.y = initial_states(i, 1);
    start.vx = initial_states(i, 2);
    start.vy = initial_states(i, 3);
    start.t = 0;
    const EpisodeResult r =
        rollout_episode(env, actor, stats, unused, 0.0, gamma, &start);
    true_sum += r.discounted_return;
  }
  report.true_q_mean = true_sum / report.states;
  report.gap = report.est_q_mean - report.true_q_mean;
  return report;
}

MeanAdvantageRow mean_advantage_row(const std::string& method, const MlpParams& actor,
                                    const CriticEnsemble& critic, const NormStats& stats,
                                    const OfflineDataset& dataset,
                                    const std::vector<int64_t>& state_indices) {
  const int n = static_cast<int>(state_indices.size());
  Mat states(n, dataset.state_dim);
  Mat a_data(n, dataset.action_dim);
  for (int i = 0; i < n; ++i) {
    states.row(i) = dataset.states.row(state_indices[static_cast<std::size_t>(i)]);
    a_data.row(i) = dataset.actions.row(state_indices[static_cast<std::size_t>(i)]);
  }
  const Mat s_norm = normalize_states(stats, states);
  const Mat pi = act(actor, s_norm);
  MeanAdvantageRow row;
  row.method = method;
  row.mean_adv_policy = advantage(critic, s_norm, pi).mean();
  row.mean_adv_data = advantage(critic, s_norm, a_data).mean();
  return row;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryPoint>& traj) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("trajectory: cannot write " + path);
  out << "episode,t,x,y,vx,vy,fx,fy,reward,done\n";
  for (const auto& p : traj)
    out << p.episode << "," << p.t << "," << fmt_real(p.x) << "," << fmt_real(p.y) << ","
        << fmt_real(p.vx) << "," << fmt_real(p.vy) << "," << fmt_real(p.fx) << ","
        << fmt_real(p.fy) << "," << fmt_real(p.reward) << "," << (p.done ? 1 : 0) << "\n";
  if (!out) throw std::runtime_error("trajectory: write failed for " + path);
}

}  // namespace a2pr
