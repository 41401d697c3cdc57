#include "a2pr/critic.hpp"

#include <cmath>
#include <stdexcept>

namespace a2pr {

Mat concat_state_action(const Mat& states, const Mat& actions) {
  Mat out(states.rows(), states.cols() + actions.cols());
  out.leftCols(states.cols()) = states;
  out.rightCols(actions.cols()) = actions;
  return out;
}

CriticEnsemble make_critic(int state_dim, int action_dim, const std::vector<int>& q_hidden,
                           const std::vector<int>& v_hidden,
                           const std::vector<int>& actor_hidden, double action_bound,
                           Rng& rng) {
  CriticEnsemble e;
  MlpSpec q_spec;
  q_spec.input_dim = state_dim + action_dim;
  q_spec.hidden_dims = q_hidden;
  q_spec.output_dim = 1;
  e.q1 = init_params(q_spec, rng);
  e.q2 = init_params(q_spec, rng);

  MlpSpec v_spec;
  v_spec.input_dim = state_dim;
  v_spec.hidden_dims = v_hidden;
  v_spec.output_dim = 1;
  e.v = init_params(v_spec, rng);

  e.q1_target = e.q1;
  e.q2_target = e.q2;

  MlpSpec pi_spec;
  pi_spec.input_dim = state_dim;
  pi_spec.hidden_dims = actor_hidden;
  pi_spec.output_dim = action_dim;
  pi_spec.output_activation = OutputActivation::kTanhScaled;
  pi_spec.output_bound = action_bound;
  // The trainer copies the freshly initialized actor in here; an
  // independent init keeps the ensemble usable standalone.
  e.policy_target = init_params(pi_spec, rng);

  e.q1_opt = make_adam_state(e.q1);
  e.q2_opt = make_adam_state(e.q2);
  e.v_opt = make_adam_state(e.v);
  return e;
}

Vec td_target(const CriticEnsemble& ensemble, const CriticConfig& config,
              const Batch& batch, Rng& rng) {
  const Eigen::Index b = batch.next_states.rows();
  Mat a_next = forward(ensemble.policy_target, batch.next_states);
  for (Eigen::Index i = 0; i < b; ++i)
    for (Eigen::Index j = 0; j < a_next.cols(); ++j) {
      const double e = std::clamp(config.policy_noise_sigma * rng.normal(),
                                  -config.noise_clip, config.noise_clip);
      a_next(i, j) = std::clamp(a_next(i, j) + e, -config.action_bound, config.action_bound);
    }
  const Mat sa = concat_state_action(batch.next_states, a_next);
  const Vec q1t = forward(ensemble.q1_target, sa).col(0);
  const Vec q2t = forward(ensemble.q2_target, sa).col(0);
  const Vec qmin = q1t.cwiseMin(q2t);
  return batch.rewards.array() +
         config.gamma * (1.0 - batch.dones.array()) * qmin.array();
}

double q_update(CriticEnsemble& ensemble, const CriticConfig& config,
                const Batch& batch, const Vec& y) {
  const Eigen::Index b = batch.states.rows();
  const Mat sa = concat_state_action(batch.states, batch.actions);

  ActivationCache c1, c2;
  const Vec q1 = forward(ensemble.q1, sa, &c1).col(0);
  const Vec q2 = forward(ensemble.q2, sa, &c2).col(0);
  const Vec e1 = q1 - y;
  const Vec e2 = q2 - y;
  const double inv_b = 1.0 / static_cast<double>(b);
  const double loss = (e1.squaredNorm() + e2.squaredNorm()) * inv_b;

  const Mat d1 = (2.0 * inv_b) * e1;
  const Mat d2 = (2.0 * inv_b) * e2;
  MlpGrads g1 = backward(ensemble.q1, c1, d1);
  MlpGrads g2 = backward(ensemble.q2, c2, d2);
  adam_step(ensemble.q1, g1, ensemble.q1_opt, config.q_lr);
  adam_step(ensemble.q2, g2, ensemble.q2_opt, config.q_lr);
  return loss;
}

double v_update(CriticEnsemble& ensemble, const CriticConfig& config, const Batch& batch) {
  const Eigen::Index b = batch.states.rows();
  const Vec qmin = min_q(ensemble, batch.states, batch.actions);

  ActivationCache cv;
  const Vec v = forward(ensemble.v, batch.states, &cv).col(0);
  const Vec u = qmin - v;
  Vec weight(b);
  for (Eigen::Index i = 0; i < b; ++i)
    weight(i) = std::abs(config.expectile - (u(i) < 0.0 ? 1.0 : 0.0));
  const double inv_b = 1.0 / static_cast<double>(b);
  const double loss = (weight.array() * u.array().square()).sum() * inv_b;

  // d loss / d v = -2 weight u / b.
  const Mat dv = (-2.0 * inv_b) * weight.cwiseProduct(u);
  MlpGrads gv = backward(ensemble.v, cv, dv);
  adam_step(ensemble.v, gv, ensemble.v_opt, config.v_lr);
  return loss;
}

Vec min_q(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions) {
  const Mat sa = concat_state_action(states, actions);
  const Vec q1 = forward(ensemble.q1, sa).col(0);
  const Vec q2 = forward(ensemble.q2, sa).col(0);
  return q1.cwiseMin(q2);
}

Vec advantage(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions) {
  const Vec qmin = min_q(ensemble, states, actions);
  const Vec v = forward(ensemble.v, states).col(0);
  return qmin - v;
}

namespace {

void polyak_params(const MlpParams& source, MlpParams& target, double tau) {
  for (std::size_t l = 0; l < source.weights.size(); ++l) {
    target.weights[l] = tau * source.weights[l] + (1.0 - tau) * target.weights[l];
    target.biases[l] = tau * source.biases[l] + (1.0 - tau) * target.biases[l];
  }
}

}  // namespace

void polyak_update(CriticEnsemble& ensemble, const MlpParams& actor, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("polyak_update: tau outside [0, 1]");
  polyak_params(ensemble.q1, ensemble.q1_target, tau);
  polyak_params(ensemble.q2, ensemble.q2_target, tau);
  polyak_params(actor, ensemble.policy_target, tau);
}

}  // namespace a2pr
