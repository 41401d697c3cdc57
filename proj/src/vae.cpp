#include "a2pr/vae.hpp"

#include <cmath>
#include <stdexcept>

namespace a2pr {

namespace {

constexpr double kLogSigmaMin = -4.0;
constexpr double kLogSigmaMax = 15.0;

Mat concat_cols(const Mat& a, const Mat& b) {
  Mat out(a.rows(), a.cols() + b.cols());
  out.leftCols(a.cols()) = a;
  out.rightCols(b.cols()) = b;
  return out;
}

}  // namespace

VaeModel make_vae(int state_dim, int action_dim, const std::vector<int>& hidden_dims,
                  int latent_dim, double action_bound, Rng& rng) {
  if (latent_dim < 1) latent_dim = 2 * action_dim;
  VaeModel m;
  m.state_dim = state_dim;
  m.action_dim = action_dim;
  m.latent_dim = latent_dim;
  m.action_bound = action_bound;

  MlpSpec enc_spec;
  enc_spec.input_dim = state_dim + action_dim;
  enc_spec.hidden_dims = hidden_dims;
  enc_spec.output_dim = 2 * latent_dim;
  enc_spec.output_activation = OutputActivation::kIdentity;
  m.encoder = init_params(enc_spec, rng);

  MlpSpec dec_spec;
  dec_spec.input_dim = state_dim + latent_dim;
  dec_spec.hidden_dims = hidden_dims;
  dec_spec.output_dim = action_dim;
  dec_spec.output_activation = OutputActivation::kTanhScaled;
  dec_spec.output_bound = action_bound;
  m.decoder = init_params(dec_spec, rng);
  return m;
}

void encode(const VaeModel& model, const Mat& states, const Mat& actions, Mat& mu, Mat& sigma) {
  const Mat out = forward(model.encoder, concat_cols(states, actions));
  mu = out.leftCols(model.latent_dim);
  sigma = out.rightCols(model.latent_dim)
              .array()
              .min(kLogSigmaMax)
              .max(kLogSigmaMin)
              .exp()
              .matrix();
}

Mat reparameterize(const Mat& mu, const Mat& sigma, Rng& rng) {
  Mat noise(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < noise.rows(); ++i)
    for (Eigen::Index j = 0; j < noise.cols(); ++j) noise(i, j) = rng.normal();
  return mu + sigma.cwiseProduct(noise);
}

Mat decode(const VaeModel& model, const Mat& states, const Mat& z) {
  return forward(model.decoder, concat_cols(states, z));
}

Mat sample_action(const VaeModel& model, const Mat& states, double latent_clip, Rng& rng) {
  Mat z(states.rows(), model.latent_dim);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      z(i, j) = std::clamp(rng.normal(), -latent_clip, latent_clip);
  return decode(model, states, z);
}

VaeLoss elbo_loss(const VaeModel& model, const Mat& states, const Mat& actions,
                  const Vec& advantages, const VaeConfig& config, const Mat& noise) {
  const Eigen::Index b = states.rows();
  const int latent = model.latent_dim;
  if (advantages.size() != b) throw std::invalid_argument("elbo_loss: advantage count mismatch");
  if (noise.rows() != b || noise.cols() != latent)
    throw std::invalid_argument("elbo_loss: noise shape mismatch");

  ActivationCache enc_cache;
  const Mat enc_out = forward(model.encoder, concat_cols(states, actions), &enc_cache);
  const Mat mu = enc_out.leftCols(latent);
  const Mat log_sigma_raw = enc_out.rightCols(latent);
  const Mat log_sigma = log_sigma_raw.array().min(kLogSigmaMax).max(kLogSigmaMin).matrix();
  const Mat sigma = log_sigma.array().exp().matrix();

  const Mat z = mu + sigma.cwiseProduct(noise);

  ActivationCache dec_cache;
  const Mat recon = forward(model.decoder, concat_cols(states, z), &dec_cache);

  // Per-sample gate: w1 when the advantage strictly exceeds the threshold.
  Vec gate(b);
  for (Eigen::Index i = 0; i < b; ++i)
    gate(i) = advantages(i) > config.epsilon_A ? config.w1 : 0.0;

  const Mat diff = recon - actions;
  const Vec recon_per_sample = diff.array().square().rowwise().sum();
  const Vec kl_per_sample =
      (0.5 * (sigma.array().square() + mu.array().square() - 1.0 - 2.0 * log_sigma.array()))
          .rowwise()
          .sum();

  VaeLoss result;
  const double inv_b = 1.0 / static_cast<double>(b);
  result.recon_term = gate.cwiseProduct(recon_per_sample).sum() * inv_b;
  result.kl_term = kl_per_sample.sum() * inv_b;
  result.loss = result.recon_term + config.kl_weight * result.kl_term;

  // Decoder: d loss / d recon = gate_i * 2 * diff / b.
  Mat d_recon = (2.0 * inv_b) * (diff.array().colwise() * gate.array()).matrix();
  Mat d_dec_input;
  result.decoder_grads = backward(model.decoder, dec_cache, d_recon, &d_dec_input);
  const Mat dz = d_dec_input.rightCols(latent);

  // Encoder head: z = mu + sigma (.) n and the KL term both reach mu and
  // log_sigma. d KL / d mu = mu; d KL / d log_sigma = sigma^2 - 1; the
  // log_sigma clamp passes gradient only inside its range.
  Mat d_mu = dz + config.kl_weight * inv_b * mu;
  Mat d_log_sigma =
      dz.cwiseProduct(noise).cwiseProduct(sigma) +
      config.kl_weight * inv_b * (sigma.array().square() - 1.0).matrix();
  const Mat clamp_pass = ((log_sigma_raw.array() >= kLogSigmaMin) &&
                          (log_sigma_raw.array() <= kLogSigmaMax))
                             .cast<double>()
                             .matrix();
  d_log_sigma = d_log_sigma.cwiseProduct(clamp_pass);

  Mat d_enc_out(b, 2 * latent);
  d_enc_out.leftCols(latent) = d_mu;
  d_enc_out.rightCols(latent) = d_log_sigma;
  result.encoder_grads = backward(model.encoder, enc_cache, d_enc_out);
  return result;
}

}  // namespace a2pr
