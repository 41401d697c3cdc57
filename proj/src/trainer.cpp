#include "a2pr/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "a2pr/format.hpp"

namespace a2pr {

namespace fs = std::filesystem;
using nlohmann::json;

Variant parse_variant(const std::string& name) {
  if (name == "a2pr") return Variant::kA2pr;
  if (name == "td3bc") return Variant::kTd3bc;
  if (name == "base_vae") return Variant::kBaseVae;
  if (name == "no_epbl") return Variant::kNoEpbl;
  if (name == "no_aapc") return Variant::kNoAapc;
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected a2pr, td3bc, base_vae, no_epbl, no_aapc)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kA2pr: return "a2pr";
    case Variant::kTd3bc: return "td3bc";
    case Variant::kBaseVae: return "base_vae";
    case Variant::kNoEpbl: return "no_epbl";
    case Variant::kNoAapc: return "no_aapc";
  }
  throw std::logic_error("variant_name: bad enum");
}

namespace {

struct FieldPrinter {
  std::map<std::string, std::string>* out;
  void operator()(const char* key, const std::string& v) { (*out)[key] = v; }
  void operator()(const char* key, const Variant& v) { (*out)[key] = variant_name(v); }
  void operator()(const char* key, const long& v) { (*out)[key] = std::to_string(v); }
  void operator()(const char* key, const int& v) { (*out)[key] = std::to_string(v); }
  void operator()(const char* key, const uint64_t& v) { (*out)[key] = std::to_string(v); }
  void operator()(const char* key, const double& v) { (*out)[key] = fmt_real(v); }
};

struct FieldSetter {
  const std::string* key;
  const std::string* value;
  bool matched = false;

  template <class T>
  void parse_into(T& field) {
    std::istringstream in(*value);
    T parsed{};
    in >> parsed;
    if (in.fail()) throw std::invalid_argument("config: bad value '" + *value + "' for " + *key);
    field = parsed;
  }
  void operator()(const char* k, std::string& v) {
    if (*key == k) { v = *value; matched = true; }
  }
  void operator()(const char* k, Variant& v) {
    if (*key == k) { v = parse_variant(*value); matched = true; }
  }
  void operator()(const char* k, long& v) {
    if (*key == k) { parse_into(v); matched = true; }
  }
  void operator()(const char* k, int& v) {
    if (*key == k) { parse_into(v); matched = true; }
  }
  void operator()(const char* k, uint64_t& v) {
    if (*key == k) { parse_into(v); matched = true; }
  }
  void operator()(const char* k, double& v) {
    if (*key == k) { parse_into(v); matched = true; }
  }
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> config_to_map(const TrainConfig& config) {
  std::map<std::string, std::string> out;
  FieldPrinter printer{&out};
  visit_config(const_cast<TrainConfig&>(config), printer);
  return out;
}

void set_config_field(TrainConfig& config, const std::string& key, const std::string& value) {
  FieldSetter setter{&key, &value};
  visit_config(config, setter);
  if (!setter.matched) throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                  " of " + path + " is not key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config_map(TrainConfig& config, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) set_config_field(config, key, value);
}

uint64_t config_hash(const TrainConfig& config) {
  std::string text;
  for (const auto& [key, value] : config_to_map(config)) text += key + "=" + value + "\n";
  return fnv1a(text);
}

const char* const kMetricsHeader =
    "step,q_loss,v_loss,vae_recon,vae_kl,policy_loss,lambda,mean_adv_data,"
    "mean_adv_selected,frac_vae_chosen,frac_self_learn,constraint_gap,"
    "eval_return_mean,eval_return_std,normalized_score,est_q,true_q,value_gap";

std::string metrics_row_csv(const MetricsRow& r) {
  std::string out = std::to_string(r.step);
  for (double v : {r.q_loss, r.v_loss, r.vae_recon, r.vae_kl, r.policy_loss, r.lambda,
                   r.mean_adv_data, r.mean_adv_selected, r.frac_vae_chosen,
                   r.frac_self_learn, r.constraint_gap, r.eval_return_mean,
                   r.eval_return_std, r.normalized_score, r.est_q, r.true_q, r.value_gap})
    out += "," + fmt_real(v);
  return out;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics: empty file " + path);
  if (line != kMetricsHeader) throw std::runtime_error("metrics: unexpected header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() != 18) throw std::runtime_error("metrics: bad row in " + path);
    MetricsRow r;
    r.step = static_cast<long>(vals[0]);
    r.q_loss = vals[1]; r.v_loss = vals[2]; r.vae_recon = vals[3]; r.vae_kl = vals[4];
    r.policy_loss = vals[5]; r.lambda = vals[6]; r.mean_adv_data = vals[7];
    r.mean_adv_selected = vals[8]; r.frac_vae_chosen = vals[9]; r.frac_self_learn = vals[10];
    r.constraint_gap = vals[11]; r.eval_return_mean = vals[12]; r.eval_return_std = vals[13];
    r.normalized_score = vals[14]; r.est_q = vals[15]; r.true_q = vals[16];
    r.value_gap = vals[17];
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::vector<int> hidden_vec(int dim, int layers) {
  return std::vector<int>(static_cast<std::size_t>(layers), dim);
}

void validate_config(const TrainConfig& c) {
  if (c.dataset_path.empty()) throw std::invalid_argument("config: dataset_path is required");
  if (c.checkpoint_dir.empty()) throw std::invalid_argument("config: checkpoint_dir is required");
  if (c.total_steps < 0) throw std::invalid_argument("config: total_steps must be >= 0");
  if (c.batch_size < 1 || c.policy_update_freq < 1 || c.eval_every < 1 || c.eval_episodes < 1)
    throw std::invalid_argument("config: counts must be positive");
  for (double rate : {c.actor_lr, c.critic_lr, c.value_lr, c.vae_lr, c.tau, c.alpha, c.w1})
    if (rate <= 0.0) throw std::invalid_argument("config: rates must be positive");
  if (c.gamma <= 0.0 || c.gamma > 1.0) throw std::invalid_argument("config: gamma outside (0, 1]");
  if (c.expectile <= 0.0 || c.expectile >= 1.0)
    throw std::invalid_argument("config: expectile outside (0, 1)");
}

constexpr uint64_t kStreamSampler = 100;
constexpr uint64_t kStreamNoise = 101;
constexpr uint64_t kStreamVae = 102;
constexpr uint64_t kStreamInit = 103;

constexpr int kCheckpointVersion = 1;

}  // namespace

Trainer::Trainer(const TrainConfig& config) {
  validate_config(config);
  config_ = config;
  env_ = MazeConfig::defaults();
  dataset_ = load(config_.dataset_path);
  stats_ = compute_norm_stats(dataset_);
  anchors_ = anchors_for(env_, config_.anchor_dir, config_.anchor_episodes);
  diag_states_ = sample_initial_states(env_, config_.true_q_states, config_.seed,
                                       stream::kDiagStates);
  init_networks();
  sampler_.rng = Rng::derive(config_.seed, kStreamSampler);
  sampler_.batch_size = config_.batch_size;
  noise_rng_ = Rng::derive(config_.seed, kStreamNoise);
  vae_rng_ = Rng::derive(config_.seed, kStreamVae);
  fs::create_directories(config_.checkpoint_dir);
  open_metrics(/*append=*/false);
}

void Trainer::init_networks() {
  Rng init_rng = Rng::derive(config_.seed, kStreamInit);
  const int s_dim = dataset_.state_dim;
  const int a_dim = dataset_.action_dim;
  actor_ = make_actor(s_dim, a_dim,
                      hidden_vec(config_.actor_hidden_dim, config_.actor_hidden_layers), 1.0,
                      init_rng);
  actor_opt_ = make_adam_state(actor_);
  critic_ = make_critic(s_dim, a_dim, hidden_vec(config_.q_hidden_dim, config_.q_hidden_layers),
                        hidden_vec(config_.v_hidden_dim, config_.v_hidden_layers),
                        hidden_vec(config_.actor_hidden_dim, config_.actor_hidden_layers), 1.0,
                        init_rng);
  critic_.policy_target = actor_;
  vae_ = make_vae(s_dim, a_dim, hidden_vec(config_.vae_hidden_dim, config_.vae_hidden_layers),
                  config_.latent_dim, 1.0, init_rng);
  enc_opt_ = make_adam_state(vae_.encoder);
  dec_opt_ = make_adam_state(vae_.decoder);
}

void Trainer::open_metrics(bool append) {
  metrics_path_ = (fs::path(config_.checkpoint_dir) / "metrics.csv").string();
  if (append && fs::exists(metrics_path_)) return;
  std::ofstream out(metrics_path_, std::ios::trunc);
  if (!out) throw std::runtime_error("trainer: cannot write " + metrics_path_);
  out << kMetricsHeader << "\n";
}

void Trainer::nan_abort(const Batch& batch, const std::string& what) {
  const fs::path dump = fs::path(config_.checkpoint_dir) / "nan_dump.csv";
  std::ofstream out(dump, std::ios::trunc);
  out << "index";
  for (int j = 0; j < dataset_.state_dim; ++j) out << ",s" << j;
  for (int j = 0; j < dataset_.action_dim; ++j) out << ",a" << j;
  out << ",r";
  for (int j = 0; j < dataset_.state_dim; ++j) out << ",s_next" << j;
  out << ",done\n";
  for (Eigen::Index i = 0; i < batch.states.rows(); ++i) {
    out << batch.indices[static_cast<std::size_t>(i)];
    for (int j = 0; j < dataset_.state_dim; ++j) out << "," << fmt_real(batch.states(i, j));
    for (int j = 0; j < dataset_.action_dim; ++j) out << "," << fmt_real(batch.actions(i, j));
    out << "," << fmt_real(batch.rewards(i));
    for (int j = 0; j < dataset_.state_dim; ++j) out << "," << fmt_real(batch.next_states(i, j));
    out << "," << batch.dones(i) << "\n";
  }
  throw std::runtime_error("trainer: non-finite " + what + " at step " +
                           std::to_string(step_ + 1) + "; offending batch dumped to " +
                           dump.string());
}

void Trainer::step_once() {
  const long t = step_ + 1;
  const Variant variant = config_.variant;

  Batch batch = sample_batch(dataset_, sampler_);
  if (trace) trace("sample", t);
  // All learners see normalized states; raw states live only in the file.
  batch.states = normalize_states(stats_, batch.states);
  batch.next_states = normalize_states(stats_, batch.next_states);
  const Eigen::Index b = batch.states.rows();

  const bool has_vae =
      variant == Variant::kA2pr || variant == Variant::kBaseVae || variant == Variant::kNoAapc;

  if (has_vae) {
    Vec gate_adv;
    if (variant == Variant::kBaseVae) {
      // Ungated reconstruction: every sample passes the gate.
      gate_adv = Vec::Constant(b, config_.epsilon_a + 1.0);
    } else {
      gate_adv = advantage(critic_, batch.states, batch.actions);
    }
    Mat noise(b, vae_.latent_dim);
    for (Eigen::Index i = 0; i < b; ++i)
      for (int j = 0; j < vae_.latent_dim; ++j) noise(i, j) = vae_rng_.normal();
    VaeConfig vae_cfg;
    vae_cfg.w1 = config_.w1;
    vae_cfg.epsilon_A = config_.epsilon_a;
    vae_cfg.kl_weight = config_.kl_weight;
    vae_cfg.latent_clip = config_.latent_clip;
    const VaeLoss vl = elbo_loss(vae_, batch.states, batch.actions, gate_adv, vae_cfg, noise);
    if (!std::isfinite(vl.loss)) nan_abort(batch, "VAE loss");
    adam_step(vae_.encoder, vl.encoder_grads, enc_opt_, config_.vae_lr);
    adam_step(vae_.decoder, vl.decoder_grads, dec_opt_, config_.vae_lr);
    accum_.vae_recon += vl.recon_term;
    accum_.vae_kl += vl.kl_term;
    if (trace) trace("vae_update", t);
  }

  CriticConfig critic_cfg;
  critic_cfg.gamma = config_.gamma;
  critic_cfg.tau = config_.tau;
  critic_cfg.policy_noise_sigma = config_.policy_noise_sigma;
  critic_cfg.noise_clip = config_.noise_clip;
  critic_cfg.q_lr = config_.critic_lr;
  critic_cfg.v_lr = config_.value_lr;
  critic_cfg.expectile = config_.expectile;

  const Vec y = td_target(critic_, critic_cfg, batch, noise_rng_);
  const double q_loss = q_update(critic_, critic_cfg, batch, y);
  if (!std::isfinite(q_loss)) nan_abort(batch, "Q loss");
  accum_.q_loss += q_loss;
  if (trace) trace("q_update", t);

  const double v_loss = v_update(critic_, critic_cfg, batch);
  if (!std::isfinite(v_loss)) nan_abort(batch, "V loss");
  accum_.v_loss += v_loss;
  if (trace) trace("v_update", t);

  accum_.steps += 1;

  if (t % config_.policy_update_freq == 0) {
    PolicyConfig policy_cfg;
    policy_cfg.alpha = config_.alpha;
    policy_cfg.w2 = config_.w2;
    policy_cfg.epsilon_A = config_.epsilon_a;
    policy_cfg.actor_lr = config_.actor_lr;

    SelectionOutcome sel;
    if (has_vae) {
      select_tilde(batch.states, batch.actions, vae_, config_.latent_clip, critic_, vae_rng_,
                   sel);
    } else {
      sel.a_tilde = batch.actions;
      sel.a_data_advantage = advantage(critic_, batch.states, batch.actions);
      sel.a_tilde_advantage = sel.a_data_advantage;
      sel.tilde_source.assign(static_cast<std::size_t>(b), TildeSource::kDataset);
    }
    if (trace) trace("policy_select", t);

    switch (variant) {
      case Variant::kTd3bc:
        sel.a_bar = batch.actions;
        sel.branch.assign(static_cast<std::size_t>(b), Branch::kConstrainToTilde);
        break;
      case Variant::kNoAapc:
        sel.a_bar = sel.a_tilde;
        sel.branch.assign(static_cast<std::size_t>(b), Branch::kConstrainToTilde);
        break;
      default:
        select_bar(actor_, batch.states, policy_cfg, sel);
    }

    const PolicyUpdateResult pu =
        policy_update(actor_, actor_opt_, critic_, batch.states, sel.a_bar, policy_cfg);
    if (!std::isfinite(pu.policy_loss)) nan_abort(batch, "policy loss");
    if (trace) trace("policy_update", t);

    polyak_update(critic_, actor_, config_.tau);
    if (trace) trace("polyak", t);

    accum_.policy_loss += pu.policy_loss;
    accum_.lambda += pu.lambda;
    accum_.adv_data += sel.a_data_advantage.mean();
    accum_.adv_selected += sel.a_tilde_advantage.mean();
    double n_vae = 0, n_self = 0;
    for (std::size_t i = 0; i < sel.tilde_source.size(); ++i) {
      if (sel.tilde_source[i] == TildeSource::kVae) n_vae += 1;
      if (sel.branch[i] == Branch::kSelfLearn) n_self += 1;
    }
    accum_.frac_vae += n_vae / static_cast<double>(b);
    accum_.frac_self += n_self / static_cast<double>(b);
    accum_.constraint_gap += pu.constraint_gap;
    accum_.value_gap += pu.value_gap;
    accum_.policy_steps += 1;
  }

  step_ = t;

  if (config_.eval_every > 0 && t % config_.eval_every == 0) eval_and_log();
  if (config_.checkpoint_every > 0 && t % config_.checkpoint_every == 0)
    save_checkpoint((fs::path(config_.checkpoint_dir) / "checkpoint").string());
}

MetricsRow Trainer::make_row() const {
  MetricsRow row;
  row.step = step_;
  if (accum_.steps > 0) {
    const double n = static_cast<double>(accum_.steps);
    row.q_loss = accum_.q_loss / n;
    row.v_loss = accum_.v_loss / n;
    row.vae_recon = accum_.vae_recon / n;
    row.vae_kl = accum_.vae_kl / n;
  }
  if (accum_.policy_steps > 0) {
    const double n = static_cast<double>(accum_.policy_steps);
    row.policy_loss = accum_.policy_loss / n;
    row.lambda = accum_.lambda / n;
    row.mean_adv_data = accum_.adv_data / n;
    row.mean_adv_selected = accum_.adv_selected / n;
    row.frac_vae_chosen = accum_.frac_vae / n;
    row.frac_self_learn = accum_.frac_self / n;
    row.constraint_gap = accum_.constraint_gap / n;
    row.value_gap = accum_.value_gap / n;
  }
  return row;
}

void Trainer::eval_and_log() {
  MetricsRow row = make_row();
  std::vector<TrajectoryPoint> traj;
  const EvalReport report = evaluate_policy(
      actor_, stats_, env_, config_.eval_episodes, config_.eval_noise_scale, config_.seed,
      stream::kTrainEval, static_cast<uint64_t>(step_), anchors_,
      config_.record_eval_traj ? &traj : nullptr);
  row.eval_return_mean = report.return_mean;
  row.eval_return_std = report.return_std;
  row.normalized_score = report.normalized_score;
  const TrueQReport tq =
      true_q_report(actor_, critic_, stats_, env_, config_.gamma, diag_states_);
  row.est_q = tq.est_q_mean;
  row.true_q = tq.true_q_mean;
  if (trace) trace("eval", step_);

  rows_.push_back(row);
  std::ofstream out(metrics_path_, std::ios::app);
  if (!out) throw std::runtime_error("trainer: cannot append " + metrics_path_);
  out << metrics_row_csv(row) << "\n";

  if (config_.record_eval_traj) {
    const fs::path path = fs::path(config_.checkpoint_dir) / "eval_traj.csv";
    const bool fresh = !fs::exists(path);
    std::ofstream traj_out(path, std::ios::app);
    if (fresh) traj_out << "train_step,episode,t,x,y,vx,vy,fx,fy,reward,done\n";
    for (const auto& p : traj)
      traj_out << step_ << "," << p.episode << "," << p.t << "," << fmt_real(p.x) << ","
               << fmt_real(p.y) << "," << fmt_real(p.vx) << "," << fmt_real(p.vy) << ","
               << fmt_real(p.fx) << "," << fmt_real(p.fy) << "," << fmt_real(p.reward) << ","
               << (p.done ? 1 : 0) << "\n";
  }

  accum_ = MetricsAccum{};
}

void Trainer::run() {
  if (config_.total_steps == 0 && step_ == 0) {
    eval_and_log();
  }
  while (step_ < config_.total_steps) step_once();
  if (config_.total_steps > 0 && config_.total_steps % config_.eval_every != 0 &&
      (rows_.empty() || rows_.back().step != step_))
    eval_and_log();
  save_checkpoint((fs::path(config_.checkpoint_dir) / "checkpoint").string());
}

void Trainer::save_checkpoint(const std::string& dir) const {
  fs::create_directories(dir);
  const fs::path base(dir);
  save_params((base / "actor.bin").string(), actor_);
  save_adam_state((base / "actor_opt.bin").string(), actor_opt_);
  save_params((base / "q1.bin").string(), critic_.q1);
  save_params((base / "q2.bin").string(), critic_.q2);
  save_params((base / "v.bin").string(), critic_.v);
  save_adam_state((base / "q1_opt.bin").string(), critic_.q1_opt);
  save_adam_state((base / "q2_opt.bin").string(), critic_.q2_opt);
  save_adam_state((base / "v_opt.bin").string(), critic_.v_opt);
  save_params((base / "q1_target.bin").string(), critic_.q1_target);
  save_params((base / "q2_target.bin").string(), critic_.q2_target);
  save_params((base / "policy_target.bin").string(), critic_.policy_target);
  save_params((base / "vae_encoder.bin").string(), vae_.encoder);
  save_params((base / "vae_decoder.bin").string(), vae_.decoder);
  save_adam_state((base / "vae_encoder_opt.bin").string(), enc_opt_);
  save_adam_state((base / "vae_decoder_opt.bin").string(), dec_opt_);
  save_norm_stats((base / "norm_stats.bin").string(), stats_);

  {
    std::ofstream out(base / "diag_states.bin", std::ios::binary | std::ios::trunc);
    const uint32_t shape[2] = {static_cast<uint32_t>(diag_states_.rows()),
                               static_cast<uint32_t>(diag_states_.cols())};
    out.write(reinterpret_cast<const char*>(shape), sizeof(shape));
    out.write(reinterpret_cast<const char*>(diag_states_.data()),
              static_cast<std::streamsize>(sizeof(double) * diag_states_.size()));
  }

  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["step"] = step_;
  manifest["seed"] = config_.seed;
  manifest["config_hash"] = fmt_u64_hex(config_hash(config_));
  manifest["variant"] = variant_name(config_.variant);
  {
    std::ofstream out(base / "manifest.json");
    out << manifest.dump(2) << "\n";
  }

  json state;
  auto rng_json = [](const Rng& rng) {
    json arr = json::array();
    for (uint64_t w : rng.state()) arr.push_back(fmt_u64_hex(w));
    return arr;
  };
  state["sampler_rng"] = rng_json(sampler_.rng);
  state["noise_rng"] = rng_json(noise_rng_);
  state["vae_rng"] = rng_json(vae_rng_);
  json acc;
  acc["q_loss"] = fmt_real_hex(accum_.q_loss);
  acc["v_loss"] = fmt_real_hex(accum_.v_loss);
  acc["vae_recon"] = fmt_real_hex(accum_.vae_recon);
  acc["vae_kl"] = fmt_real_hex(accum_.vae_kl);
  acc["steps"] = accum_.steps;
  acc["policy_loss"] = fmt_real_hex(accum_.policy_loss);
  acc["lambda"] = fmt_real_hex(accum_.lambda);
  acc["adv_data"] = fmt_real_hex(accum_.adv_data);
  acc["adv_selected"] = fmt_real_hex(accum_.adv_selected);
  acc["frac_vae"] = fmt_real_hex(accum_.frac_vae);
  acc["frac_self"] = fmt_real_hex(accum_.frac_self);
  acc["constraint_gap"] = fmt_real_hex(accum_.constraint_gap);
  acc["value_gap"] = fmt_real_hex(accum_.value_gap);
  acc["policy_steps"] = accum_.policy_steps;
  state["accum"] = acc;
  {
    std::ofstream out(base / "state.json");
    out << state.dump(2) << "\n";
  }
}

Trainer Trainer::resume(const std::string& checkpoint_dir, const TrainConfig& config) {
  validate_config(config);
  fs::path base(checkpoint_dir);
  if (!fs::exists(base / "manifest.json") && fs::exists(base / "checkpoint" / "manifest.json"))
    base /= "checkpoint";
  if (!fs::exists(base / "manifest.json"))
    throw std::runtime_error("resume: no manifest.json under " + checkpoint_dir);

  json manifest;
  {
    std::ifstream in(base / "manifest.json");
    in >> manifest;
  }
  if (manifest.at("format_version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("resume: checkpoint format version mismatch");
  if (manifest.at("seed").get<uint64_t>() != config.seed)
    throw std::runtime_error("resume: checkpoint seed " +
                             std::to_string(manifest.at("seed").get<uint64_t>()) +
                             " does not match config seed " + std::to_string(config.seed));

  Trainer t;
  t.config_ = config;
  t.env_ = MazeConfig::defaults();
  t.dataset_ = load(config.dataset_path);
  t.stats_ = load_norm_stats((base / "norm_stats.bin").string());
  t.anchors_ = anchors_for(t.env_, config.anchor_dir, config.anchor_episodes);
  t.init_networks();  // establishes specs; parameters replaced below

  t.actor_ = load_params((base / "actor.bin").string(), t.actor_.spec);
  t.actor_opt_ = load_adam_state((base / "actor_opt.bin").string(), t.actor_);
  t.critic_.q1 = load_params((base / "q1.bin").string(), t.critic_.q1.spec);
  t.critic_.q2 = load_params((base / "q2.bin").string(), t.critic_.q2.spec);
  t.critic_.v = load_params((base / "v.bin").string(), t.critic_.v.spec);
  t.critic_.q1_opt = load_adam_state((base / "q1_opt.bin").string(), t.critic_.q1);
  t.critic_.q2_opt = load_adam_state((base / "q2_opt.bin").string(), t.critic_.q2);
  t.critic_.v_opt = load_adam_state((base / "v_opt.bin").string(), t.critic_.v);
  t.critic_.q1_target = load_params((base / "q1_target.bin").string(), t.critic_.q1.spec);
  t.critic_.q2_target = load_params((base / "q2_target.bin").string(), t.critic_.q2.spec);
  t.critic_.policy_target = load_params((base / "policy_target.bin").string(), t.actor_.spec);
  t.vae_.encoder = load_params((base / "vae_encoder.bin").string(), t.vae_.encoder.spec);
  t.vae_.decoder = load_params((base / "vae_decoder.bin").string(), t.vae_.decoder.spec);
  t.enc_opt_ = load_adam_state((base / "vae_encoder_opt.bin").string(), t.vae_.encoder);
  t.dec_opt_ = load_adam_state((base / "vae_decoder_opt.bin").string(), t.vae_.decoder);

  {
    std::ifstream in(base / "diag_states.bin", std::ios::binary);
    uint32_t shape[2];
    in.read(reinterpret_cast<char*>(shape), sizeof(shape));
    if (!in) throw std::runtime_error("resume: truncated diag_states.bin");
    t.diag_states_ = Mat(shape[0], shape[1]);
    in.read(reinterpret_cast<char*>(t.diag_states_.data()),
            static_cast<std::streamsize>(sizeof(double) * t.diag_states_.size()));
    if (!in) throw std::runtime_error("resume: truncated diag_states.bin");
  }

  json state;
  {
    std::ifstream in(base / "state.json");
    in >> state;
  }
  auto rng_from = [&](const char* key) {
    std::array<uint64_t, 4> words{};
    const auto& arr = state.at(key);
    for (int i = 0; i < 4; ++i) words[static_cast<std::size_t>(i)] =
        parse_u64_hex(arr.at(i).get<std::string>());
    Rng rng;
    rng.set_state(words);
    return rng;
  };
  t.sampler_.rng = rng_from("sampler_rng");
  t.sampler_.batch_size = config.batch_size;
  t.noise_rng_ = rng_from("noise_rng");
  t.vae_rng_ = rng_from("vae_rng");
  const auto& acc = state.at("accum");
  t.accum_.q_loss = parse_real_hex(acc.at("q_loss").get<std::string>());
  t.accum_.v_loss = parse_real_hex(acc.at("v_loss").get<std::string>());
  t.accum_.vae_recon = parse_real_hex(acc.at("vae_recon").get<std::string>());
  t.accum_.vae_kl = parse_real_hex(acc.at("vae_kl").get<std::string>());
  t.accum_.steps = acc.at("steps").get<long>();
  t.accum_.policy_loss = parse_real_hex(acc.at("policy_loss").get<std::string>());
  t.accum_.lambda = parse_real_hex(acc.at("lambda").get<std::string>());
  t.accum_.adv_data = parse_real_hex(acc.at("adv_data").get<std::string>());
  t.accum_.adv_selected = parse_real_hex(acc.at("adv_selected").get<std::string>());
  t.accum_.frac_vae = parse_real_hex(acc.at("frac_vae").get<std::string>());
  t.accum_.frac_self = parse_real_hex(acc.at("frac_self").get<std::string>());
  t.accum_.constraint_gap = parse_real_hex(acc.at("constraint_gap").get<std::string>());
  t.accum_.value_gap = parse_real_hex(acc.at("value_gap").get<std::string>());
  t.accum_.policy_steps = acc.at("policy_steps").get<long>();

  t.step_ = manifest.at("step").get<long>();
  fs::create_directories(config.checkpoint_dir);
  t.open_metrics(/*append=*/true);
  return t;
}

}  // namespace a2pr
