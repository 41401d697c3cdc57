#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "a2pr/dataset.hpp"
#include "a2pr/evaluate.hpp"
#include "a2pr/maze.hpp"
#include "a2pr/mlp.hpp"
#include "a2pr/trainer.hpp"

namespace py = pybind11;
using namespace a2pr;

namespace {

TrainConfig config_from_map(const std::map<std::string, std::string>& overrides) {
  TrainConfig c;
  apply_config_map(c, overrides);
  return c;
}

py::dict row_to_dict(const MetricsRow& row) {
  py::dict d;
  d["step"] = row.step;
  d["q_loss"] = row.q_loss;
  d["v_loss"] = row.v_loss;
  d["vae_recon"] = row.vae_recon;
  d["vae_kl"] = row.vae_kl;
  d["policy_loss"] = row.policy_loss;
  d["lambda"] = row.lambda;
  d["mean_adv_data"] = row.mean_adv_data;
  d["mean_adv_selected"] = row.mean_adv_selected;
  d["frac_vae_chosen"] = row.frac_vae_chosen;
  d["frac_self_learn"] = row.frac_self_learn;
  d["constraint_gap"] = row.constraint_gap;
  d["eval_return_mean"] = row.eval_return_mean;
  d["eval_return_std"] = row.eval_return_std;
  d["normalized_score"] = row.normalized_score;
  d["est_q"] = row.est_q;
  d["true_q"] = row.true_q;
  d["value_gap"] = row.value_gap;
  return d;
}

std::filesystem::path checkpoint_base(const std::string& dir) {
  std::filesystem::path base(dir);
  if (!std::filesystem::exists(base / "actor.bin") &&
      std::filesystem::exists(base / "checkpoint" / "actor.bin"))
    base /= "checkpoint";
  return base;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Offline RL laboratory core: maze environment, dataset tools, trainer, evaluation";

  m.def("config_defaults", [] { return config_to_map(TrainConfig{}); },
        "Default training configuration as a key -> string map.");

  m.def(
      "generate_dataset",
      [](const std::string& recipe_text, long n, uint64_t seed, double expert_noise,
         const std::string& out) {
        const MazeConfig env = MazeConfig::defaults();
        const auto recipe = parse_recipe(recipe_text, env, expert_noise);
        Rng rng(seed);
        const OfflineDataset d = generate_maze_dataset(env, recipe, n, rng);
        save(d, out);
        py::dict info;
        info["n"] = d.n;
        info["state_dim"] = d.state_dim;
        info["action_dim"] = d.action_dim;
        info["path"] = out;
        return info;
      },
      py::arg("recipe"), py::arg("n"), py::arg("seed"), py::arg("expert_noise"),
      py::arg("out"),
      "Generates an offline maze dataset from a controller:target:fraction recipe.");

  m.def(
      "load_dataset",
      [](const std::string& path) {
        const OfflineDataset d = load(path);
        py::dict out;
        out["states"] = d.states;
        out["actions"] = d.actions;
        out["rewards"] = Vec(d.rewards);
        out["next_states"] = d.next_states;
        out["dones"] = std::vector<int>(d.dones.begin(), d.dones.end());
        return out;
      },
      py::arg("path"), "Loads a dataset file into numpy arrays.");

  m.def(
      "train",
      [](const std::map<std::string, std::string>& config) {
        Trainer trainer(config_from_map(config));
        trainer.run();
        return row_to_dict(trainer.rows().back());
      },
      py::arg("config"),
      "Runs a full training loop from a config map; returns the final metrics row.");

  m.def(
      "resume_train",
      [](const std::string& checkpoint_dir, const std::map<std::string, std::string>& config) {
        Trainer trainer = Trainer::resume(checkpoint_dir, config_from_map(config));
        trainer.run();
        return row_to_dict(trainer.rows().back());
      },
      py::arg("checkpoint_dir"), py::arg("config"),
      "Continues a checkpointed run; the config must match its seed and architecture.");

  m.def(
      "read_metrics",
      [](const std::string& path) {
        std::vector<py::dict> rows;
        for (const MetricsRow& row : read_metrics_csv(path)) rows.push_back(row_to_dict(row));
        return rows;
      },
      py::arg("path"), "Parses a metrics.csv into a list of dicts.");

  m.def(
      "evaluate",
      [](const std::string& ckpt, int episodes, double noise_scale, uint64_t seed,
         const std::string& anchor_dir) {
        const auto base = checkpoint_base(ckpt);
        const MlpParams actor = load_params_infer((base / "actor.bin").string(),
                                                  OutputActivation::kTanhScaled, 1.0);
        const NormStats stats = load_norm_stats((base / "norm_stats.bin").string());
        const MazeConfig env = MazeConfig::defaults();
        const Anchors anchors = anchors_for(env, anchor_dir);
        const EvalReport r = evaluate_policy(actor, stats, env, episodes, noise_scale, seed,
                                             stream::kCliEval, 0, anchors);
        py::dict out;
        out["episodes"] = r.episodes;
        out["return_mean"] = r.return_mean;
        out["return_std"] = r.return_std;
        out["normalized_score"] = r.normalized_score;
        out["goal_hit_fractions"] = r.goal_hit_fractions;
        out["length_mean"] = r.length_mean;
        out["length_min"] = r.length_min;
        out["length_max"] = r.length_max;
        return out;
      },
      py::arg("ckpt"), py::arg("episodes") = 10, py::arg("noise_scale") = 0.0,
      py::arg("seed") = 0, py::arg("anchor_dir") = "anchors",
      "Evaluates a policy checkpoint in the maze.");

  m.def(
      "true_q",
      [](const std::string& ckpt, int n_states, double gamma, uint64_t seed) {
        const auto base = checkpoint_base(ckpt);
        const MlpParams actor = load_params_infer((base / "actor.bin").string(),
                                                  OutputActivation::kTanhScaled, 1.0);
        const NormStats stats = load_norm_stats((base / "norm_stats.bin").string());
        CriticEnsemble critic;
        critic.q1 = load_params_infer((base / "q1.bin").string());
        critic.q2 = load_params_infer((base / "q2.bin").string());
        critic.v = load_params_infer((base / "v.bin").string());
        const MazeConfig env = MazeConfig::defaults();
        const Mat starts = sample_initial_states(env, n_states, seed, stream::kCliStates);
        const TrueQReport r = true_q_report(actor, critic, stats, env, gamma, starts);
        py::dict out;
        out["states"] = r.states;
        out["est_q_mean"] = r.est_q_mean;
        out["true_q_mean"] = r.true_q_mean;
        out["gap"] = r.gap;
        return out;
      },
      py::arg("ckpt"), py::arg("n_states") = 10, py::arg("gamma") = 0.99, py::arg("seed") = 0,
      "Compares the critic's value estimate against Monte-Carlo rollouts.");
}
