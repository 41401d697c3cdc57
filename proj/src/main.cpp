#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "a2pr/dataset.hpp"
#include "a2pr/evaluate.hpp"
#include "a2pr/format.hpp"
#include "a2pr/maze.hpp"
#include "a2pr/trainer.hpp"

namespace fs = std::filesystem;
using namespace a2pr;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}


struct CheckpointBundle {
  MlpParams actor;
  CriticEnsemble critic;
  NormStats stats;
};

// The eval tools need only the forward networks; optimizer state stays on
// disk.
CheckpointBundle load_bundle(const std::string& dir, bool need_critic) {
  fs::path base(dir);
  if (!fs::exists(base / "actor.bin") && fs::exists(base / "checkpoint" / "actor.bin"))
    base /= "checkpoint";
  CheckpointBundle b;
  b.actor = load_params_infer((base / "actor.bin").string(), OutputActivation::kTanhScaled, 1.0);
  b.stats = load_norm_stats((base / "norm_stats.bin").string());
  if (need_critic) {
    b.critic.q1 = load_params_infer((base / "q1.bin").string());
    b.critic.q2 = load_params_infer((base / "q2.bin").string());
    b.critic.v = load_params_infer((base / "v.bin").string());
  }
  return b;
}

int run_gen_data(const std::string& recipe_text, long n, uint64_t seed, double expert_noise,
                 const std::string& out) {
  const MazeConfig env = MazeConfig::defaults();
  const auto recipe = parse_recipe(recipe_text, env, expert_noise);
  Rng rng(seed);
  const OfflineDataset d = generate_maze_dataset(env, recipe, n, rng);
  save(d, out);

  std::map<double, long> reward_hist;
  for (int64_t i = 0; i < d.n; ++i) reward_hist[d.rewards(i)] += 1;
  std::cout << "wrote " << out << ": n=" << d.n << " state_dim=" << d.state_dim
            << " action_dim=" << d.action_dim << "\n";
  double cum = 0.0;
  int64_t prev = 0;
  for (std::size_t k = 0; k < recipe.size(); ++k) {
    cum += recipe[k].fraction;
    const int64_t upto = std::llround(cum * static_cast<double>(n));
    std::cout << "  entry " << k << ": "
              << (recipe[k].controller == ControllerKind::kRandom ? "random" : "expert")
              << " transitions=" << (upto - prev) << "\n";
    prev = upto;
  }
  std::cout << "  reward histogram:";
  for (const auto& [r, count] : reward_hist) std::cout << " " << r << "x" << count;
  std::cout << "\n";
  return 0;
}

int run_eval(const std::string& ckpt, int episodes, double noise, uint64_t seed,
             const std::string& anchor_dir, const std::string& out) {
  const MazeConfig env = MazeConfig::defaults();
  const CheckpointBundle b = load_bundle(ckpt, /*need_critic=*/false);
  const Anchors anchors = anchors_for(env, anchor_dir);
  const EvalReport report = evaluate_policy(b.actor, b.stats, env, episodes, noise, seed,
                                            stream::kCliEval, 0, anchors);
  std::ostringstream header, row;
  header << "episodes,return_mean,return_std,normalized_score";
  row << report.episodes << "," << fmt_real(report.return_mean) << ","
      << fmt_real(report.return_std) << "," << fmt_real(report.normalized_score);
  for (std::size_t g = 0; g < report.goal_hit_fractions.size(); ++g) {
    header << ",goal" << g << "_hit_fraction";
    row << "," << fmt_real(report.goal_hit_fractions[g]);
  }
  header << ",length_mean,length_min,length_max";
  row << "," << fmt_real(report.length_mean) << "," << report.length_min << ","
      << report.length_max;
  std::cout << header.str() << "\n" << row.str() << "\n";
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << header.str() << "\n" << row.str() << "\n";
  }
  return 0;
}

int run_true_q(const std::string& ckpt, int n_states, double gamma, uint64_t seed,
               const std::string& out) {
  const MazeConfig env = MazeConfig::defaults();
  const CheckpointBundle b = load_bundle(ckpt, /*need_critic=*/true);
  const Mat states = sample_initial_states(env, n_states, seed, stream::kCliStates);
  const TrueQReport report = true_q_report(b.actor, b.critic, b.stats, env, gamma, states);
  const std::string header = "states,est_q_mean,true_q_mean,gap";
  const std::string row = std::to_string(report.states) + "," + fmt_real(report.est_q_mean) +
                          "," + fmt_real(report.true_q_mean) + "," + fmt_real(report.gap);
  std::cout << header << "\n" << row << "\n";
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << header << "\n" << row << "\n";
  }
  return 0;
}

int run_mean_adv(const std::string& ckpts, const std::string& dataset_path, int n_states,
                 uint64_t seed, const std::string& out) {
  const OfflineDataset dataset = load(dataset_path);
  if (static_cast<int64_t>(n_states) > dataset.n)
    std::cerr << "warning: n_states " << n_states << " exceeds dataset size " << dataset.n
              << "; sampling with replacement\n";
  Rng rng = Rng::derive(seed, stream::kCliStates, 1);
  std::vector<int64_t> indices(static_cast<std::size_t>(n_states));
  for (auto& idx : indices)
    idx = static_cast<int64_t>(rng.below(static_cast<uint64_t>(dataset.n)));

  std::ostringstream text;
  text << "method,mean_adv_policy,mean_adv_data\n";
  for (const std::string& part : split(ckpts, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--ckpts entry '" + part + "' is not name=dir");
    const std::string name = part.substr(0, eq);
    const CheckpointBundle b = load_bundle(part.substr(eq + 1), /*need_critic=*/true);
    const MeanAdvantageRow row =
        mean_advantage_row(name, b.actor, b.critic, b.stats, dataset, indices);
    text << row.method << "," << fmt_real(row.mean_adv_policy) << ","
         << fmt_real(row.mean_adv_data) << "\n";
  }
  std::cout << text.str();
  if (!out.empty()) {
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text.str();
  }
  return 0;
}

int run_export_traj(const std::string& ckpt, const std::string& trace, int episodes,
                    double noise, uint64_t seed, const std::string& window,
                    const std::string& out) {
  if (!trace.empty()) {
    long lo = 0, hi = std::numeric_limits<long>::max();
    if (!window.empty()) {
      const auto parts = split(window, ':');
      if (parts.size() != 2)
        throw std::invalid_argument("--window must be start:end, got '" + window + "'");
      lo = std::stol(parts[0]);
      hi = std::stol(parts[1]);
    }
    std::ifstream in(trace);
    if (!in) throw std::runtime_error("cannot open trace " + trace);
    std::string line;
    if (!std::getline(in, line) || line != "train_step,episode,t,x,y,vx,vy,fx,fy,reward,done")
      throw std::runtime_error("unexpected trace header in " + trace);
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << "episode,t,x,y,vx,vy,fx,fy,reward,done\n";
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const long step = std::stol(line.substr(0, comma));
      if (step >= lo && step <= hi) f << line.substr(comma + 1) << "\n";
    }
    std::cout << "wrote " << out << "\n";
    return 0;
  }
  if (ckpt.empty()) throw std::invalid_argument("export-traj needs --ckpt or --trace");
  const MazeConfig env = MazeConfig::defaults();
  const CheckpointBundle b = load_bundle(ckpt, /*need_critic=*/false);
  std::vector<TrajectoryPoint> traj;
  const Anchors trivial{0.0, 1.0, 0};
  evaluate_policy(b.actor, b.stats, env, episodes, noise, seed, stream::kCliTraj, 0, trivial,
                  &traj);
  write_trajectory_csv(out, traj);
  std::cout << "wrote " << out << " (" << episodes << " episodes)\n";
  return 0;
}

int run_train(const std::string& config_path, const std::map<std::string, std::string>& flags,
              const std::string& resume_from) {
  TrainConfig config;
  if (!config_path.empty()) apply_config_map(config, parse_config_file(config_path));
  for (const auto& [key, value] : flags) set_config_field(config, key, value);

  Trainer trainer = resume_from.empty() ? Trainer(config)
                                        : Trainer::resume(resume_from, config);
  trainer.run();
  const auto& rows = trainer.rows();
  std::cout << "trained " << variant_name(config.variant) << " to step "
            << trainer.current_step() << "; metrics in " << config.checkpoint_dir
            << "/metrics.csv\n";
  if (!rows.empty()) {
    const MetricsRow& last = rows.back();
    std::cout << "final eval: return " << fmt_real(last.eval_return_mean) << " +- "
              << fmt_real(last.eval_return_std) << ", normalized score "
              << fmt_real(last.normalized_score) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline RL laboratory: advantage-gated VAE + adaptive policy constraint "
               "on a twin-critic TD backbone, with a 2D multi-goal maze"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate an offline maze dataset");
  std::string gen_recipe, gen_out;
  long gen_n = 100000;
  uint64_t gen_seed = 0;
  double gen_expert_noise = 0.1;
  gen->add_option("--recipe", gen_recipe,
                  "controller:target:fraction list, e.g. expert:g0:0.05,expert:g1:0.45,"
                  "expert:g2:0.50 or random:_:0.99,expert:g0:0.01")
      ->required();
  gen->add_option("--n", gen_n, "total transitions");
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--expert-noise", gen_expert_noise, "expert action noise scale");
  gen->add_option("--out", gen_out, "output dataset path")->required();

  // train
  auto* train = app.add_subcommand("train", "Train a policy on an offline dataset");
  std::string train_config, train_resume;
  train->add_option("--config", train_config, "key = value config file; flags override");
  train->add_option("--resume", train_resume, "checkpoint directory to continue from");
  std::map<std::string, std::string> flag_values;
  for (const auto& [key, value] : config_to_map(TrainConfig{}))
    train->add_option("--" + key, flag_values[key], "config key (default " + value + ")");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint");
  std::string ev_ckpt, ev_out, ev_anchor_dir = "anchors";
  int ev_episodes = 10;
  double ev_noise = 0.0;
  uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--episodes", ev_episodes, "evaluation episodes");
  ev->add_option("--noise", ev_noise, "observation noise scale");
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--anchor-dir", ev_anchor_dir, "score anchor cache directory");
  ev->add_option("--out", ev_out, "report CSV path");

  // true-q
  auto* tq = app.add_subcommand("true-q", "Estimated vs Monte-Carlo Q on initial states");
  std::string tq_ckpt, tq_out;
  int tq_states = 10;
  double tq_gamma = 0.99;
  uint64_t tq_seed = 0;
  tq->add_option("--ckpt", tq_ckpt, "checkpoint directory")->required();
  tq->add_option("--n-states", tq_states, "initial states to sample");
  tq->add_option("--gamma", tq_gamma, "discount for the Monte-Carlo return");
  tq->add_option("--seed", tq_seed, "state sampling seed");
  tq->add_option("--out", tq_out, "report CSV path");

  // mean-adv
  auto* ma = app.add_subcommand("mean-adv", "Mean advantage of each method's policy actions");
  std::string ma_ckpts, ma_dataset, ma_out;
  int ma_states = 1000;
  uint64_t ma_seed = 0;
  ma->add_option("--ckpts", ma_ckpts, "name=dir[,name=dir...]")->required();
  ma->add_option("--dataset", ma_dataset, "dataset file")->required();
  ma->add_option("--n-states", ma_states, "dataset states to sample");
  ma->add_option("--seed", ma_seed, "state sampling seed");
  ma->add_option("--out", ma_out, "report CSV path");

  // export-traj
  auto* ex = app.add_subcommand("export-traj", "Export evaluation trajectories as CSV");
  std::string ex_ckpt, ex_trace, ex_window, ex_out;
  int ex_episodes = 50;
  double ex_noise = 0.0;
  uint64_t ex_seed = 0;
  ex->add_option("--ckpt", ex_ckpt, "checkpoint directory to roll out");
  ex->add_option("--trace", ex_trace, "recorded eval_traj.csv from training");
  ex->add_option("--window", ex_window, "training-step range start:end for --trace");
  ex->add_option("--episodes", ex_episodes, "episodes to roll out with --ckpt");
  ex->add_option("--noise", ex_noise, "observation noise scale");
  ex->add_option("--seed", ex_seed, "rollout seed");
  ex->add_option("--out", ex_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen_data(gen_recipe, gen_n, gen_seed, gen_expert_noise, gen_out);
    if (train->parsed()) {
      std::map<std::string, std::string> set_flags;
      for (const auto& [key, value] : flag_values)
        if (train->count("--" + key) > 0) set_flags[key] = value;
      return run_train(train_config, set_flags, train_resume);
    }
    if (ev->parsed()) return run_eval(ev_ckpt, ev_episodes, ev_noise, ev_seed, ev_anchor_dir, ev_out);
    if (tq->parsed()) return run_true_q(tq_ckpt, tq_states, tq_gamma, tq_seed, tq_out);
    if (ma->parsed()) return run_mean_adv(ma_ckpts, ma_dataset, ma_states, ma_seed, ma_out);
    if (ex->parsed())
      return run_export_traj(ex_ckpt, ex_trace, ex_episodes, ex_noise, ex_seed, ex_window, ex_out);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
