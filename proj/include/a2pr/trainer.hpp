#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a2pr/critic.hpp"
#include "a2pr/dataset.hpp"
#include "a2pr/evaluate.hpp"
#include "a2pr/maze.hpp"
#include "a2pr/policy.hpp"
#include "a2pr/vae.hpp"

namespace a2pr {

enum class Variant { kA2pr, kTd3bc, kBaseVae, kNoEpbl, kNoAapc };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct TrainConfig {
  std::string dataset_path;
  std::string checkpoint_dir;
  Variant variant = Variant::kA2pr;
  long total_steps = 500000;
  int batch_size = 256;
  int policy_update_freq = 2;
  long eval_every = 5000;
  int eval_episodes = 10;
  uint64_t seed = 0;
  double gamma = 0.99;
  double tau = 5e-3;
  double alpha = 2.5;
  double w1 = 1.0;
  double w2 = 1.0;
  double epsilon_a = 0.0;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double value_lr = 3e-4;
  double vae_lr = 3e-4;
  double policy_noise_sigma = 0.2;
  double noise_clip = 0.5;
  double expectile = 0.5;
  double kl_weight = 1.0;
  double latent_clip = 0.5;
  int q_hidden_dim = 256;
  int q_hidden_layers = 3;
  int v_hidden_dim = 256;
  int v_hidden_layers = 3;
  int actor_hidden_dim = 256;
  int actor_hidden_layers = 2;
  int vae_hidden_dim = 750;
  int vae_hidden_layers = 2;
  int latent_dim = 0;  // 0 -> 2 * action_dim
  long checkpoint_every = 0;  // 0 -> final checkpoint only
  double eval_noise_scale = 0.0;
  int true_q_states = 10;
  int record_eval_traj = 0;
  int anchor_episodes = 1000;
  std::string anchor_dir = "anchors";
};

// Runs fn("key", field) over every field, in declared order. Config files
// use exactly these keys.
template <class Config, class Fn>
void visit_config(Config& c, Fn&& fn) {
  fn("dataset_path", c.dataset_path);
  fn("checkpoint_dir", c.checkpoint_dir);
  fn("variant", c.variant);
  fn("total_steps", c.total_steps);
  fn("batch_size", c.batch_size);
  fn("policy_update_freq", c.policy_update_freq);
  fn("eval_every", c.eval_every);
  fn("eval_episodes", c.eval_episodes);
  fn("seed", c.seed);
  fn("gamma", c.gamma);
  fn("tau", c.tau);
  fn("alpha", c.alpha);
  fn("w1", c.w1);
  fn("w2", c.w2);
  fn("epsilon_a", c.epsilon_a);
  fn("actor_lr", c.actor_lr);
  fn("critic_lr", c.critic_lr);
  fn("value_lr", c.value_lr);
  fn("vae_lr", c.vae_lr);
  fn("policy_noise_sigma", c.policy_noise_sigma);
  fn("noise_clip", c.noise_clip);
  fn("expectile", c.expectile);
  fn("kl_weight", c.kl_weight);
  fn("latent_clip", c.latent_clip);
  fn("q_hidden_dim", c.q_hidden_dim);
  fn("q_hidden_layers", c.q_hidden_layers);
  fn("v_hidden_dim", c.v_hidden_dim);
  fn("v_hidden_layers", c.v_hidden_layers);
  fn("actor_hidden_dim", c.actor_hidden_dim);
  fn("actor_hidden_layers", c.actor_hidden_layers);
  fn("vae_hidden_dim", c.vae_hidden_dim);
  fn("vae_hidden_layers", c.vae_hidden_layers);
  fn("latent_dim", c.latent_dim);
  fn("checkpoint_every", c.checkpoint_every);
  fn("eval_noise_scale", c.eval_noise_scale);
  fn("true_q_states", c.true_q_states);
  fn("record_eval_traj", c.record_eval_traj);
  fn("anchor_episodes", c.anchor_episodes);
  fn("anchor_dir", c.anchor_dir);
}

std::map<std::string, std::string> config_to_map(const TrainConfig& config);
void set_config_field(TrainConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" lines, "#" comments, blank lines ignored.
std::map<std::string, std::string> parse_config_file(const std::string& path);
void apply_config_map(TrainConfig& config, const std::map<std::string, std::string>& kv);
uint64_t config_hash(const TrainConfig& config);

struct MetricsRow {
  long step = 0;
  double q_loss = 0, v_loss = 0, vae_recon = 0, vae_kl = 0;
  double policy_loss = 0, lambda = 0;
  double mean_adv_data = 0, mean_adv_selected = 0;
  double frac_vae_chosen = 0, frac_self_learn = 0, constraint_gap = 0;
  double eval_return_mean = 0, eval_return_std = 0, normalized_score = 0;
  double est_q = 0, true_q = 0;
  double value_gap = 0;  // extra diagnostic: mean |Q(s, pi(s)) - Q(s, a_bar)|
};

extern const char* const kMetricsHeader;
std::string metrics_row_csv(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Training-loss running sums between logged rows; serialized in checkpoints
// so a resumed run logs the same averages.
struct MetricsAccum {
  double q_loss = 0, v_loss = 0, vae_recon = 0, vae_kl = 0;
  long steps = 0;
  double policy_loss = 0, lambda = 0, adv_data = 0, adv_selected = 0;
  double frac_vae = 0, frac_self = 0, constraint_gap = 0, value_gap = 0;
  long policy_steps = 0;
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);

  // Continues a checkpointed run. The config must carry the same seed and
  // architecture; total_steps may extend the run.
  static Trainer resume(const std::string& checkpoint_dir, const TrainConfig& config);

  // Steps to total_steps with periodic evaluation rows and checkpoints,
  // then writes the final checkpoint.
  void run();

  // One Algorithm-1 iteration (plus any due evaluation/checkpoint).
  void step_once();

  void save_checkpoint(const std::string& dir) const;

  long current_step() const { return step_; }
  const TrainConfig& config() const { return config_; }
  const MazeConfig& env() const { return env_; }
  const NormStats& stats() const { return stats_; }
  const Anchors& anchors() const { return anchors_; }
  const std::vector<MetricsRow>& rows() const { return rows_; }
  const MlpParams& actor() const { return actor_; }
  const CriticEnsemble& critic() const { return critic_; }
  const VaeModel& vae() const { return vae_; }
  const OfflineDataset& dataset() const { return dataset_; }

  // Test hook: called as ("sample" | "vae_update" | "q_update" | "v_update"
  // | "policy_select" | "policy_update" | "polyak" | "eval", step).
  std::function<void(const char*, long)> trace;

 private:
  Trainer() = default;
  void init_networks();
  void open_metrics(bool append);
  void eval_and_log();
  void nan_abort(const Batch& batch, const std::string& what);
  MetricsRow make_row() const;

  TrainConfig config_;
  MazeConfig env_;
  OfflineDataset dataset_;
  NormStats stats_;
  Anchors anchors_;
  Mat diag_states_;

  MlpParams actor_;
  AdamState actor_opt_;
  CriticEnsemble critic_;
  VaeModel vae_;
  AdamState enc_opt_, dec_opt_;

  BatchSampler sampler_;
  Rng noise_rng_, vae_rng_;

  long step_ = 0;
  MetricsAccum accum_;
  std::vector<MetricsRow> rows_;
  std::string metrics_path_;
};

}  // namespace a2pr
