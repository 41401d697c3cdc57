#pragma once

#include "a2pr/matrix.hpp"
#include "a2pr/mlp.hpp"
#include "a2pr/rng.hpp"

namespace a2pr {

// Conditional VAE over (state -> action). The encoder maps s (+) a to
// (mu, log_sigma); the decoder maps s (+) z back to a bounded action.
struct VaeModel {
  MlpParams encoder;  // input (state_dim + action_dim) -> 2 * latent_dim
  MlpParams decoder;  // input (state_dim + latent_dim) -> action_dim, tanh-scaled
  int state_dim = 0;
  int action_dim = 0;
  int latent_dim = 0;
  double action_bound = 1.0;
};

struct VaeConfig {
  double w1 = 1.0;          // reconstruction gate weight
  double epsilon_A = 0.0;   // advantage threshold; gate is strict >
  double kl_weight = 1.0;
  double latent_clip = 0.5;
  double learning_rate = 3e-4;
};

struct VaeLoss {
  double loss = 0.0;
  double recon_term = 0.0;  // mean over batch of gate * squared error
  double kl_term = 0.0;     // mean over batch of KL(q || N(0, I))
  MlpGrads encoder_grads;
  MlpGrads decoder_grads;
};

VaeModel make_vae(int state_dim, int action_dim, const std::vector<int>& hidden_dims,
                  int latent_dim, double action_bound, Rng& rng);

// mu = first latent_dim outputs, sigma = exp(log_sigma clamped to [-4, 15]).
void encode(const VaeModel& model, const Mat& states, const Mat& actions, Mat& mu, Mat& sigma);

// z = mu + sigma (.) noise, noise ~ N(0, I).
Mat reparameterize(const Mat& mu, const Mat& sigma, Rng& rng);

// Gated ELBO: mean_i [ w1 * 1(A_i > epsilon_A) * ||a_i - decode(s_i, z_i)||^2
//                      + kl_weight * KL_i ],
// KL_i = sum_d 0.5 (sigma^2 + mu^2 - 1 - ln sigma^2). `noise` is the frozen
// reparameterization draw (batch x latent_dim), so gradients are exact.
VaeLoss elbo_loss(const VaeModel& model, const Mat& states, const Mat& actions,
                  const Vec& advantages, const VaeConfig& config, const Mat& noise);

// z ~ N(0, I) clipped elementwise to [-latent_clip, latent_clip], decoded.
Mat sample_action(const VaeModel& model, const Mat& states, double latent_clip, Rng& rng);

// Deterministic decode, used by sample_action and tests.
Mat decode(const VaeModel& model, const Mat& states, const Mat& z);

}  // namespace a2pr
