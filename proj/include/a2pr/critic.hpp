#pragma once

#include "a2pr/dataset.hpp"
#include "a2pr/matrix.hpp"
#include "a2pr/mlp.hpp"
#include "a2pr/rng.hpp"

namespace a2pr {

// Twin Q networks with Polyak targets, a state-value network, and the
// target policy used for TD bootstrapping.
struct CriticEnsemble {
  MlpParams q1, q2;          // input s (+) a -> scalar
  MlpParams v;               // input s -> scalar
  MlpParams q1_target, q2_target;
  MlpParams policy_target;   // input s -> action, tanh-scaled

  AdamState q1_opt, q2_opt, v_opt;
};

struct CriticConfig {
  double gamma = 0.99;
  double tau = 5e-3;
  double policy_noise_sigma = 0.2;
  double noise_clip = 0.5;
  double action_bound = 1.0;
  double q_lr = 3e-4;
  double v_lr = 3e-4;
  double expectile = 0.5;
};

CriticEnsemble make_critic(int state_dim, int action_dim, const std::vector<int>& q_hidden,
                           const std::vector<int>& v_hidden,
                           const std::vector<int>& actor_hidden, double action_bound,
                           Rng& rng);

Mat concat_state_action(const Mat& states, const Mat& actions);

// Smoothed bootstrap target:
//   a' = clip(policy_target(s') + e, +-bound), e = clip(N(0, sigma^2), +-c)
//   y  = r + gamma * (1 - done) * min(q1_target, q2_target)(s', a').
Vec td_target(const CriticEnsemble& ensemble, const CriticConfig& config,
              const Batch& batch, Rng& rng);

// One Adam step each on mean[(y - q1)^2 + (y - q2)^2]; y is a constant.
double q_update(CriticEnsemble& ensemble, const CriticConfig& config,
                const Batch& batch, const Vec& y);

// Expectile regression of v toward min(q1, q2), Q detached:
//   u = min(q1, q2)(s, a) - v(s), loss = mean |expectile - 1(u < 0)| u^2.
double v_update(CriticEnsemble& ensemble, const CriticConfig& config, const Batch& batch);

// A(s, a) = min(q1, q2)(s, a) - v(s).
Vec advantage(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions);

// Per-sample min(q1, q2)(s, a).
Vec min_q(const CriticEnsemble& ensemble, const Mat& states, const Mat& actions);

// target <- tau * source + (1 - tau) * target, for both Q targets and the
// policy target. Called on the delayed policy cadence.
void polyak_update(CriticEnsemble& ensemble, const MlpParams& actor, double tau);

}  // namespace a2pr
