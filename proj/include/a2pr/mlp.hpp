#pragma once

#include <functional>
#include <string>
#include <vector>

#include "a2pr/matrix.hpp"
#include "a2pr/rng.hpp"

namespace a2pr {

enum class OutputActivation { kIdentity, kTanhScaled };

// Fixed feed-forward architecture: ReLU hidden layers, identity or
// bound-scaled tanh output.
struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int output_dim = 0;
  OutputActivation output_activation = OutputActivation::kIdentity;
  double output_bound = 1.0;

  int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }
  bool valid() const;
  bool operator==(const MlpSpec&) const = default;
};

struct MlpParams {
  MlpSpec spec;
  std::vector<Mat> weights;  // per layer, (out x in)
  std::vector<Vec> biases;   // per layer, (out)

  std::size_t param_count() const;
};

struct MlpGrads {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
};

// Everything backward() needs: the input fed to each layer and each layer's
// pre-activation.
struct ActivationCache {
  std::vector<Mat> layer_inputs;
  std::vector<Mat> pre_activations;
  Mat output;
};

// Weights uniform in +-sqrt(1/fan_in), biases zero.
MlpParams init_params(const MlpSpec& spec, Rng& rng);

MlpGrads zero_grads(const MlpParams& params);

// input is (batch x input_dim). Pass a cache to enable backward().
Mat forward(const MlpParams& params, const Mat& input, ActivationCache* cache = nullptr);

// output_grad is dLoss/dOutput, (batch x output_dim). ReLU subgradient at 0
// is 0. If input_grad is non-null it receives dLoss/dInput.
MlpGrads backward(const MlpParams& params, const ActivationCache& cache,
                  const Mat& output_grad, Mat* input_grad = nullptr);

// Accumulating variant for graphs where several loss terms hit one network.
void backward_accumulate(const MlpParams& params, const ActivationCache& cache,
                         const Mat& output_grad, MlpGrads& grads,
                         Mat* input_grad = nullptr);

struct AdamState {
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Mat> m_weights, v_weights;
  std::vector<Vec> m_biases, v_biases;
};

AdamState make_adam_state(const MlpParams& params);

// Bias-corrected Adam update in place.
void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr);

// Central-difference probe of an analytic gradient on probe_count randomly
// chosen coordinates. Returns the max relative error, with a small floor in
// the denominator so a zero-zero match reports zero.
double grad_check(const std::function<double(const MlpParams&)>& loss_fn,
                  const MlpParams& params, const MlpGrads& analytic,
                  int probe_count, double h, Rng& rng);

// Checkpoint format: u32 layer count, then u32 (rows, cols) per layer, then
// per layer the weight matrix row-major and the bias, all little-endian f64.
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path, const MlpSpec& expected);

// Reconstructs the spec from the checkpoint's shape header; the output
// activation is not stored in the file, so the caller supplies it.
MlpParams load_params_infer(const std::string& path,
                            OutputActivation output_activation = OutputActivation::kIdentity,
                            double output_bound = 1.0);

void save_adam_state(const std::string& path, const AdamState& state);
AdamState load_adam_state(const std::string& path, const MlpParams& params);

}  // namespace a2pr
