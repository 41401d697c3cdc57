#include "a2pr/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace a2pr {

MlpParams make_actor(int state_dim, int action_dim, const std::vector<int>& hidden_dims,
                     double action_bound, Rng& rng) {
  MlpSpec spec;
  spec.input_dim = state_dim;
  spec.hidden_dims = hidden_dims;
  spec.output_dim = action_dim;
  spec.output_activation = OutputActivation::kTanhScaled;
  spec.output_bound = action_bound;
  return init_params(spec, rng);
}

void select_tilde(const Mat& states, const Mat& a_data, const VaeModel& vae,
                  double latent_clip, const CriticEnsemble& critic, Rng& rng,
                  SelectionOutcome& out) {
  const Eigen::Index b = states.rows();
  const Mat a_hat = sample_action(vae, states, latent_clip, rng);
  out.a_data_advantage = advantage(critic, states, a_data);
  const Vec adv_hat = advantage(critic, states, a_hat);

  out.a_tilde = a_data;
  out.a_tilde_advantage = out.a_data_advantage;
  out.tilde_source.assign(static_cast<std::size_t>(b), TildeSource::kDataset);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (adv_hat(i) > out.a_data_advantage(i)) {
      out.a_tilde.row(i) = a_hat.row(i);
      out.a_tilde_advantage(i) = adv_hat(i);
      out.tilde_source[static_cast<std::size_t>(i)] = TildeSource::kVae;
    }
  }
}

void select_bar(const MlpParams& actor, const Mat& states, const PolicyConfig& config,
                SelectionOutcome& out) {
  const Eigen::Index b = states.rows();
  const Mat pi = forward(actor, states);
  out.a_bar = out.a_tilde;
  out.branch.assign(static_cast<std::size_t>(b), Branch::kConstrainToTilde);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (out.a_tilde_advantage(i) >= config.epsilon_A) continue;
    out.a_bar.row(i) = pi.row(i);
    out.branch[static_cast<std::size_t>(i)] = Branch::kSelfLearn;
  }
}

double lambda_coeff(const Vec& q_values, double alpha) {
  const double denom = std::max(q_values.array().abs().sum(), 1e-8);
  return alpha * static_cast<double>(q_values.size()) / denom;
}

PolicyUpdateResult policy_update(MlpParams& actor, AdamState& actor_opt,
                                 const CriticEnsemble& critic, const Mat& states,
                                 const Mat& a_bar, const PolicyConfig& config) {
  const Eigen::Index b = states.rows();
  ActivationCache pi_cache;
  const Mat pi = forward(actor, states, &pi_cache);

  const Mat sa = concat_state_action(states, pi);
  ActivationCache c1, c2;
  const Vec q1 = forward(critic.q1, sa, &c1).col(0);
  const Vec q2 = forward(critic.q2, sa, &c2).col(0);
  const Vec qmin = q1.cwiseMin(q2);

  PolicyUpdateResult result;
  result.lambda = lambda_coeff(qmin, config.alpha);

  const Mat diff = pi - a_bar;
  const Vec reg_per_sample = diff.array().square().rowwise().sum();
  const double inv_b = 1.0 / static_cast<double>(b);
  result.policy_loss =
      (-result.lambda * qmin.sum() + config.w2 * reg_per_sample.sum()) * inv_b;
  result.constraint_gap = diff.rowwise().norm().sum() * inv_b;

  // Q term: -lambda/b flows into whichever Q net realizes the minimum
  // (ties to q1). Only the input gradient is kept; the critic stays frozen.
  Vec d_q1 = Vec::Zero(b);
  Vec d_q2 = Vec::Zero(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (q1(i) <= q2(i))
      d_q1(i) = -result.lambda * inv_b;
    else
      d_q2(i) = -result.lambda * inv_b;
  }
  Mat d_sa_1, d_sa_2;
  MlpGrads scratch1 = backward(critic.q1, c1, d_q1, &d_sa_1);
  MlpGrads scratch2 = backward(critic.q2, c2, d_q2, &d_sa_2);
  Mat d_pi = d_sa_1.rightCols(pi.cols()) + d_sa_2.rightCols(pi.cols());

  d_pi += (2.0 * config.w2 * inv_b) * diff;

  MlpGrads actor_grads = backward(actor, pi_cache, d_pi);
  adam_step(actor, actor_grads, actor_opt, config.actor_lr);

  // Diagnostic: how far the constraint anchor sits from the (pre-update)
  // policy in value space.
  const Vec q_bar = min_q(critic, states, a_bar);
  result.value_gap = (qmin - q_bar).array().abs().sum() * inv_b;
  return result;
}

Mat act(const MlpParams& actor, const Mat& states) { return forward(actor, states); }

}  // namespace a2pr
