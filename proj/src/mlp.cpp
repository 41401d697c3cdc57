#include "a2pr/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace a2pr {

bool MlpSpec::valid() const {
  if (input_dim < 1 || output_dim < 1) return false;
  for (int h : hidden_dims)
    if (h < 1) return false;
  return true;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
  return n;
}

static std::vector<std::pair<int, int>> layer_shapes(const MlpSpec& spec) {
  std::vector<std::pair<int, int>> shapes;
  int in = spec.input_dim;
  for (int h : spec.hidden_dims) {
    shapes.emplace_back(h, in);
    in = h;
  }
  shapes.emplace_back(spec.output_dim, in);
  return shapes;
}

MlpParams init_params(const MlpSpec& spec, Rng& rng) {
  if (!spec.valid()) throw std::invalid_argument("init_params: invalid MlpSpec");
  MlpParams p;
  p.spec = spec;
  for (auto [out, in] : layer_shapes(spec)) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    Mat w(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) w(r, c) = rng.uniform(-bound, bound);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vec::Zero(out));
  }
  return p;
}

MlpGrads zero_grads(const MlpParams& params) {
  MlpGrads g;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    g.weights.push_back(Mat::Zero(params.weights[l].rows(), params.weights[l].cols()));
    g.biases.push_back(Vec::Zero(params.biases[l].size()));
  }
  return g;
}

Mat forward(const MlpParams& params, const Mat& input, ActivationCache* cache) {
  if (input.cols() != params.spec.input_dim)
    throw std::invalid_argument("forward: input has " + std::to_string(input.cols()) +
                                " cols, spec wants " + std::to_string(params.spec.input_dim));
  const int layers = params.spec.layer_count();
  if (cache) {
    cache->layer_inputs.assign(layers, Mat());
    cache->pre_activations.assign(layers, Mat());
  }
  Mat h = input;
  for (int l = 0; l < layers; ++l) {
    if (cache) cache->layer_inputs[l] = h;
    Mat z = h * params.weights[l].transpose();
    z.rowwise() += params.biases[l].transpose();
    if (cache) cache->pre_activations[l] = z;
    if (l + 1 < layers) {
      h = z.cwiseMax(0.0);
    } else {
      switch (params.spec.output_activation) {
        case OutputActivation::kIdentity:
          h = std::move(z);
          break;
        case OutputActivation::kTanhScaled:
          h = params.spec.output_bound * z.array().tanh().matrix();
          break;
      }
    }
  }
  if (cache) cache->output = h;
  return h;
}

void backward_accumulate(const MlpParams& params, const ActivationCache& cache,
                         const Mat& output_grad, MlpGrads& grads, Mat* input_grad) {
  const int layers = params.spec.layer_count();
  if (output_grad.rows() != cache.output.rows() || output_grad.cols() != cache.output.cols())
    throw std::invalid_argument("backward: output_grad shape mismatch");

  Mat dz;
  for (int l = layers - 1; l >= 0; --l) {
    if (l == layers - 1) {
      switch (params.spec.output_activation) {
        case OutputActivation::kIdentity:
          dz = output_grad;
          break;
        case OutputActivation::kTanhScaled: {
          // y = B tanh(z)  =>  dy/dz = B - y^2 / B
          const double b = params.spec.output_bound;
          dz = output_grad.cwiseProduct(
              (b - cache.output.array().square() / b).matrix());
          break;
        }
      }
    } else {
      dz = dz.cwiseProduct(
          (cache.pre_activations[l].array() > 0.0).cast<double>().matrix());
    }
    grads.weights[l].noalias() += dz.transpose() * cache.layer_inputs[l];
    grads.biases[l].noalias() += dz.colwise().sum().transpose();
    if (l > 0) {
      dz = dz * params.weights[l];
    } else if (input_grad) {
      *input_grad = dz * params.weights[0];
    }
  }
}

MlpGrads backward(const MlpParams& params, const ActivationCache& cache,
                  const Mat& output_grad, Mat* input_grad) {
  MlpGrads grads = zero_grads(params);
  backward_accumulate(params, cache, output_grad, grads, input_grad);
  return grads;
}

AdamState make_adam_state(const MlpParams& params) {
  AdamState s;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    s.m_weights.push_back(Mat::Zero(params.weights[l].rows(), params.weights[l].cols()));
    s.v_weights.push_back(Mat::Zero(params.weights[l].rows(), params.weights[l].cols()));
    s.m_biases.push_back(Vec::Zero(params.biases[l].size()));
    s.v_biases.push_back(Vec::Zero(params.biases[l].size()));
  }
  return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, double lr) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      m = state.beta1 * m + (1.0 - state.beta1) * g;
      v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.epsilon);
    };
    update(params.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l]);
    update(params.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l]);
  }
}

double grad_check(const std::function<double(const MlpParams&)>& loss_fn,
                  const MlpParams& params, const MlpGrads& analytic,
                  int probe_count, double h, Rng& rng) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
  // Flatten coordinates as (layer, is_bias, row, col).
  struct Coord {
    int layer;
    bool bias;
    int row, col;
  };
  std::vector<Coord> coords;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    for (int r = 0; r < params.weights[l].rows(); ++r)
      for (int c = 0; c < params.weights[l].cols(); ++c)
        coords.push_back({static_cast<int>(l), false, r, c});
    for (int r = 0; r < params.biases[l].size(); ++r)
      coords.push_back({static_cast<int>(l), true, r, 0});
  }
  double max_rel = 0.0;
  MlpParams probe = params;
  for (int i = 0; i < probe_count; ++i) {
    const Coord& k = coords[rng.below(coords.size())];
    double& slot = k.bias ? probe.biases[k.layer](k.row)
                          : probe.weights[k.layer](k.row, k.col);
    const double saved = slot;
    slot = saved + h;
    const double up = loss_fn(probe);
    slot = saved - h;
    const double down = loss_fn(probe);
    slot = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = k.bias ? analytic.biases[k.layer](k.row)
                             : analytic.weights[k.layer](k.row, k.col);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - an) / denom);
  }
  return max_rel;
}

namespace {

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in, const std::string& what) {
  uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("checkpoint: truncated reading " + what);
  return v;
}

void write_doubles(std::ofstream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* data, std::size_t n, const std::string& what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated reading " + what);
}

}  // namespace

void save_params(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  write_u32(out, static_cast<uint32_t>(params.weights.size()));
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    write_u32(out, static_cast<uint32_t>(params.weights[l].rows()));
    write_u32(out, static_cast<uint32_t>(params.weights[l].cols()));
  }
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    write_doubles(out, params.weights[l].data(), static_cast<std::size_t>(params.weights[l].size()));
    write_doubles(out, params.biases[l].data(), static_cast<std::size_t>(params.biases[l].size()));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

MlpParams load_params(const std::string& path, const MlpSpec& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  const uint32_t layers = read_u32(in, "layer count");
  const auto shapes = layer_shapes(expected);
  if (layers != shapes.size())
    throw std::runtime_error("checkpoint: " + path + " has " + std::to_string(layers) +
                             " layers, expected " + std::to_string(shapes.size()));
  for (uint32_t l = 0; l < layers; ++l) {
    const uint32_t rows = read_u32(in, "shape");
    const uint32_t cols = read_u32(in, "shape");
    if (rows != static_cast<uint32_t>(shapes[l].first) ||
        cols != static_cast<uint32_t>(shapes[l].second))
      throw std::runtime_error("checkpoint: layer shape mismatch in " + path);
  }
  MlpParams p;
  p.spec = expected;
  for (auto [out_dim, in_dim] : shapes) {
    Mat w(out_dim, in_dim);
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()), "weights");
    Vec b(out_dim);
    read_doubles(in, b.data(), static_cast<std::size_t>(b.size()), "biases");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

MlpParams load_params_infer(const std::string& path, OutputActivation output_activation,
                            double output_bound) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  const uint32_t layers = read_u32(in, "layer count");
  if (layers < 1 || layers > 64)
    throw std::runtime_error("checkpoint: implausible layer count in " + path);
  std::vector<std::pair<uint32_t, uint32_t>> shapes;
  for (uint32_t l = 0; l < layers; ++l) {
    const uint32_t rows = read_u32(in, "shape");
    const uint32_t cols = read_u32(in, "shape");
    shapes.emplace_back(rows, cols);
  }
  MlpSpec spec;
  spec.input_dim = static_cast<int>(shapes.front().second);
  for (uint32_t l = 0; l + 1 < layers; ++l)
    spec.hidden_dims.push_back(static_cast<int>(shapes[l].first));
  spec.output_dim = static_cast<int>(shapes.back().first);
  spec.output_activation = output_activation;
  spec.output_bound = output_bound;
  return load_params(path, spec);
}

void save_adam_state(const std::string& path, const AdamState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
  const uint64_t step = static_cast<uint64_t>(state.step);
  out.write(reinterpret_cast<const char*>(&step), sizeof(step));
  write_u32(out, static_cast<uint32_t>(state.m_weights.size()));
  for (std::size_t l = 0; l < state.m_weights.size(); ++l) {
    write_u32(out, static_cast<uint32_t>(state.m_weights[l].rows()));
    write_u32(out, static_cast<uint32_t>(state.m_weights[l].cols()));
  }
  for (std::size_t l = 0; l < state.m_weights.size(); ++l) {
    write_doubles(out, state.m_weights[l].data(), static_cast<std::size_t>(state.m_weights[l].size()));
    write_doubles(out, state.m_biases[l].data(), static_cast<std::size_t>(state.m_biases[l].size()));
    write_doubles(out, state.v_weights[l].data(), static_cast<std::size_t>(state.v_weights[l].size()));
    write_doubles(out, state.v_biases[l].data(), static_cast<std::size_t>(state.v_biases[l].size()));
  }
  if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

AdamState load_adam_state(const std::string& path, const MlpParams& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  uint64_t step = 0;
  in.read(reinterpret_cast<char*>(&step), sizeof(step));
  if (!in) throw std::runtime_error("checkpoint: truncated reading optimizer step");
  AdamState s = make_adam_state(params);
  s.step = static_cast<long>(step);
  const uint32_t layers = read_u32(in, "layer count");
  if (layers != s.m_weights.size())
    throw std::runtime_error("checkpoint: optimizer layer count mismatch in " + path);
  for (uint32_t l = 0; l < layers; ++l) {
    const uint32_t rows = read_u32(in, "shape");
    const uint32_t cols = read_u32(in, "shape");
    if (rows != static_cast<uint32_t>(s.m_weights[l].rows()) ||
        cols != static_cast<uint32_t>(s.m_weights[l].cols()))
      throw std::runtime_error("checkpoint: optimizer shape mismatch in " + path);
  }
  for (std::size_t l = 0; l < s.m_weights.size(); ++l) {
    read_doubles(in, s.m_weights[l].data(), static_cast<std::size_t>(s.m_weights[l].size()), "adam m");
    read_doubles(in, s.m_biases[l].data(), static_cast<std::size_t>(s.m_biases[l].size()), "adam m");
    read_doubles(in, s.v_weights[l].data(), static_cast<std::size_t>(s.v_weights[l].size()), "adam v");
    read_doubles(in, s.v_biases[l].data(), static_cast<std::size_t>(s.v_biases[l].size()), "adam v");
  }
  return s;
}

}  // namespace a2pr
