#pragma once

#include <vector>

#include "a2pr/critic.hpp"
#include "a2pr/matrix.hpp"
#include "a2pr/mlp.hpp"
#include "a2pr/vae.hpp"

namespace a2pr {

struct PolicyConfig {
  double alpha = 2.5;      // lambda numerator scale
  double w2 = 1.0;         // regularizer weight
  double epsilon_A = 0.0;  // branch threshold; inclusive >=
  double actor_lr = 3e-4;
};

enum class Branch { kConstrainToTilde, kSelfLearn };
enum class TildeSource { kDataset, kVae };

// Per-batch outcome of candidate selection and the adaptive branch.
struct SelectionOutcome {
  Mat a_tilde;                       // argmax-advantage candidate per sample
  Mat a_bar;                         // regularization anchor (detached)
  std::vector<Branch> branch;
  std::vector<TildeSource> tilde_source;
  Vec a_tilde_advantage;
  Vec a_data_advantage;
};

MlpParams make_actor(int state_dim, int action_dim, const std::vector<int>& hidden_dims,
                     double action_bound, Rng& rng);

// a_tilde = argmax over {a_data, vae sample} of A(s, .); ties keep the
// dataset action.
void select_tilde(const Mat& states, const Mat& a_data, const VaeModel& vae,
                  double latent_clip, const CriticEnsemble& critic, Rng& rng,
                  SelectionOutcome& out);

// a_bar = a_tilde where A(s, a_tilde) >= epsilon_A, otherwise the actor's
// own (gradient-detached) output, which makes the regularizer inert there.
void select_bar(const MlpParams& actor, const Mat& states, const PolicyConfig& config,
                SelectionOutcome& out);

// lambda = alpha * N / max(sum |Q|, 1e-8); constant w.r.t. gradients.
double lambda_coeff(const Vec& q_values, double alpha);

struct PolicyUpdateResult {
  double policy_loss = 0.0;
  double lambda = 0.0;
  double constraint_gap = 0.0;  // mean ||pi(s) - a_bar||
  double value_gap = 0.0;       // mean |minQ(s, pi(s)) - minQ(s, a_bar)|
};

// One Adam step on mean[-lambda * min(q1, q2)(s, pi(s)) + w2 ||pi(s) - a_bar||^2];
// gradients reach only the actor.
PolicyUpdateResult policy_update(MlpParams& actor, AdamState& actor_opt,
                                 const CriticEnsemble& critic, const Mat& states,
                                 const Mat& a_bar, const PolicyConfig& config);

// Deterministic evaluation action.
Mat act(const MlpParams& actor, const Mat& states);

}  // namespace a2pr
