#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "a2pr/mlp.hpp"
#include "a2pr/rng.hpp"

using namespace a2pr;

namespace {

MlpSpec make_spec(int in, std::vector<int> hidden, int out,
                  OutputActivation act = OutputActivation::kIdentity, double bound = 1.0) {
  MlpSpec spec;
  spec.input_dim = in;
  spec.hidden_dims = std::move(hidden);
  spec.output_dim = out;
  spec.output_activation = act;
  spec.output_bound = bound;
  return spec;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("rng is deterministic and uniform draws stay in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(43);
  CHECK(Rng(42).uniform() != c.uniform());
}

TEST_CASE("rng normal consumes a fixed stream width") {
  Rng a(7), b(7);
  a.normal();
  b.uniform();
  b.uniform();
  CHECK(a.uniform() == b.uniform());
}

TEST_CASE("rng normal moments") {
  Rng rng(123);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.02);
  CHECK(std::abs(sq / n - 1.0) < 0.03);
}

TEST_CASE("rng derived streams are stable and distinct") {
  Rng a = Rng::derive(5, 1, 2, 3);
  Rng b = Rng::derive(5, 1, 2, 3);
  Rng c = Rng::derive(5, 1, 2, 4);
  CHECK(a.next_u64() == b.next_u64());
  CHECK(Rng::derive(5, 1, 2, 3).next_u64() != c.next_u64());
}

TEST_CASE("rng state round-trips") {
  Rng a(99);
  for (int i = 0; i < 17; ++i) a.uniform();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("init_params respects the fan-in bound") {
  Rng rng(0);
  const MlpParams p = init_params(make_spec(4, {8}, 2), rng);
  // fan_in = 4 for the first layer: every entry within +-0.5.
  for (int r = 0; r < p.weights[0].rows(); ++r)
    for (int c = 0; c < p.weights[0].cols(); ++c) {
      CHECK(p.weights[0](r, c) >= -0.5);
      CHECK(p.weights[0](r, c) <= 0.5);
    }
}

TEST_CASE("init_params is deterministic and zeroes biases") {
  Rng r1(11), r2(11);
  const MlpParams a = init_params(make_spec(3, {5, 4}, 2), r1);
  const MlpParams b = init_params(make_spec(3, {5, 4}, 2), r2);
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l].isZero(0.0));
  }
}

TEST_CASE("forward on zero weights gives zero output") {
  Rng rng(0);
  MlpParams p = init_params(make_spec(3, {4}, 2), rng);
  for (auto& w : p.weights) w.setZero();
  Mat x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  CHECK(forward(p, x).isZero(0.0));
}

TEST_CASE("forward single affine layer") {
  MlpParams p;
  p.spec = make_spec(1, {}, 1);
  p.weights = {Mat::Constant(1, 1, 2.0)};
  p.biases = {Vec::Constant(1, 1.0)};
  Mat x(1, 1);
  x << 3.0;
  CHECK(forward(p, x)(0, 0) == 7.0);
}

TEST_CASE("tanh_scaled output saturates to the bound for huge input") {
  Rng rng(3);
  const MlpParams p = init_params(make_spec(2, {6}, 2, OutputActivation::kTanhScaled, 1.0), rng);
  Mat x(1, 2);
  x << 1000.0, -1000.0;
  const Mat y = forward(p, x);
  for (int j = 0; j < 2; ++j) {
    CHECK(y(0, j) >= -1.0);  // tanh rounds to exactly -1/1 this far out
    CHECK(y(0, j) <= 1.0);
    CHECK(std::abs(y(0, j)) > 0.99);
  }
}

TEST_CASE("tanh_scaled bound B is respected") {
  Rng rng(4);
  const MlpParams p = init_params(make_spec(3, {8}, 2, OutputActivation::kTanhScaled, 2.5), rng);
  Rng xr(5);
  for (int trial = 0; trial < 50; ++trial) {
    Mat x(1, 3);
    for (int j = 0; j < 3; ++j) x(0, j) = xr.uniform(-100.0, 100.0);
    const Mat y = forward(p, x);
    for (int j = 0; j < 2; ++j) {
      CHECK(y(0, j) >= -2.5);
      CHECK(y(0, j) <= 2.5);
    }
  }
}

TEST_CASE("forward rejects a shape mismatch") {
  Rng rng(0);
  const MlpParams p = init_params(make_spec(3, {4}, 2), rng);
  Mat x(1, 2);
  x << 1, 2;
  CHECK_THROWS_AS(forward(p, x), std::invalid_argument);
}

TEST_CASE("backward chain rule on a scalar linear map") {
  MlpParams p;
  p.spec = make_spec(1, {}, 1);
  p.weights = {Mat::Constant(1, 1, 2.0)};
  p.biases = {Vec::Zero(1)};
  Mat x(1, 1);
  x << 3.0;
  ActivationCache cache;
  forward(p, x, &cache);
  Mat dy = Mat::Constant(1, 1, 1.0);
  Mat dx;
  const MlpGrads g = backward(p, cache, dy, &dx);
  CHECK(g.weights[0](0, 0) == 3.0);
  CHECK(g.biases[0](0) == 1.0);
  CHECK(dx(0, 0) == 2.0);
}

TEST_CASE("ReLU subgradient at exactly zero is zero") {
  // Zero weights and biases put every hidden pre-activation at exactly 0.
  MlpParams p;
  p.spec = make_spec(1, {1}, 1);
  p.weights = {Mat::Zero(1, 1), Mat::Constant(1, 1, 5.0)};
  p.biases = {Vec::Zero(1), Vec::Zero(1)};
  Mat x(1, 1);
  x << 2.0;
  ActivationCache cache;
  forward(p, x, &cache);
  const MlpGrads g = backward(p, cache, Mat::Constant(1, 1, 1.0));
  CHECK(g.weights[0](0, 0) == 0.0);
  CHECK(g.biases[0](0) == 0.0);
}

TEST_CASE("backward matches finite differences on a random 2-layer net") {
  Rng rng(2024);
  const MlpSpec spec = make_spec(4, {8}, 3);
  MlpParams p = init_params(spec, rng);
  Mat x(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = rng.uniform(-1.0, 1.0);

  // Scalar loss: sum of squared outputs.
  auto loss_fn = [&x](const MlpParams& params) {
    return forward(params, x).array().square().sum();
  };
  ActivationCache cache;
  const Mat y = forward(p, x, &cache);
  const MlpGrads analytic = backward(p, cache, 2.0 * y);

  Rng probe_rng(7);
  const double err = grad_check(loss_fn, p, analytic, 120, 1e-5, probe_rng);
  CHECK(err < 1e-6);
}

TEST_CASE("backward matches finite differences through tanh_scaled output") {
  Rng rng(77);
  const MlpSpec spec = make_spec(3, {6, 6}, 2, OutputActivation::kTanhScaled, 1.0);
  MlpParams p = init_params(spec, rng);
  Mat x(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.uniform(-2.0, 2.0);
  auto loss_fn = [&x](const MlpParams& params) {
    return forward(params, x).array().square().sum();
  };
  ActivationCache cache;
  const Mat y = forward(p, x, &cache);
  const MlpGrads analytic = backward(p, cache, 2.0 * y);
  Rng probe_rng(8);
  CHECK(grad_check(loss_fn, p, analytic, 120, 1e-5, probe_rng) < 1e-6);
}

TEST_CASE("adam first step moves by -lr * sign(g)") {
  MlpParams p;
  p.spec = make_spec(1, {}, 1);
  p.weights = {Mat::Constant(1, 1, 1.0)};
  p.biases = {Vec::Zero(1)};
  MlpGrads g = zero_grads(p);
  g.weights[0](0, 0) = 2.0;
  AdamState state = make_adam_state(p);
  adam_step(p, g, state, 0.1);
  const double delta = p.weights[0](0, 0) - 1.0;
  CHECK(std::abs(delta + 0.1) < 1e-7);
  CHECK(p.biases[0](0) == 0.0);  // zero gradient leaves the bias in place
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Rng rng(5);
  MlpParams p = init_params(make_spec(2, {3}, 1), rng);
  const MlpParams before = p;
  AdamState state = make_adam_state(p);
  adam_step(p, zero_grads(p), state, 0.1);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    CHECK(p.weights[l] == before.weights[l]);
    CHECK(p.biases[l] == before.biases[l]);
  }
}

TEST_CASE("adam trajectories are deterministic") {
  auto run = [] {
    Rng rng(31);
    MlpParams p = init_params(make_spec(2, {4}, 1), rng);
    AdamState state = make_adam_state(p);
    Mat x(2, 2);
    x << 0.5, -0.25, 1.0, 2.0;
    for (int i = 0; i < 25; ++i) {
      ActivationCache cache;
      const Mat y = forward(p, x, &cache);
      const MlpGrads g = backward(p, cache, 2.0 * y);
      adam_step(p, g, state, 3e-4);
    }
    return p;
  };
  const MlpParams a = run();
  const MlpParams b = run();
  for (std::size_t l = 0; l < a.weights.size(); ++l) CHECK(a.weights[l] == b.weights[l]);
}

TEST_CASE("grad_check is near-exact for a quadratic") {
  MlpParams p;
  p.spec = make_spec(1, {}, 1);
  p.weights = {Mat::Constant(1, 1, 3.0)};
  p.biases = {Vec::Zero(1)};
  auto loss_fn = [](const MlpParams& params) {
    const double w = params.weights[0](0, 0);
    return 0.5 * w * w;
  };
  MlpGrads analytic = zero_grads(p);
  analytic.weights[0](0, 0) = 3.0;
  // Probing may also land on the bias; its gradient is 0 on both sides.
  Rng rng(1);
  CHECK(grad_check(loss_fn, p, analytic, 20, 1e-5, rng) < 1e-8);
}

TEST_CASE("params survive a checkpoint round trip bitwise") {
  Rng rng(17);
  const MlpSpec spec = make_spec(5, {7, 3}, 2, OutputActivation::kTanhScaled, 1.0);
  const MlpParams p = init_params(spec, rng);
  const std::string path = temp_path("a2pr_params_roundtrip.bin");
  save_params(path, p);
  const MlpParams q = load_params(path, spec);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    CHECK(p.weights[l] == q.weights[l]);
    CHECK(p.biases[l] == q.biases[l]);
  }
  const MlpParams r = load_params_infer(path, OutputActivation::kTanhScaled, 1.0);
  CHECK(r.spec == spec);
  std::filesystem::remove(path);
}

TEST_CASE("loading into a mismatched architecture fails") {
  Rng rng(18);
  const MlpParams p = init_params(make_spec(4, {6}, 2), rng);
  const std::string path = temp_path("a2pr_params_mismatch.bin");
  save_params(path, p);
  CHECK_THROWS_AS(load_params(path, make_spec(4, {7}, 2)), std::runtime_error);
  CHECK_THROWS_AS(load_params(path, make_spec(4, {6, 6}, 2)), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("adam state survives a checkpoint round trip bitwise") {
  Rng rng(19);
  MlpParams p = init_params(make_spec(3, {4}, 2), rng);
  AdamState state = make_adam_state(p);
  Mat x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  for (int i = 0; i < 5; ++i) {
    ActivationCache cache;
    const Mat y = forward(p, x, &cache);
    adam_step(p, backward(p, cache, 2.0 * y), state, 1e-3);
  }
  const std::string path = temp_path("a2pr_adam_roundtrip.bin");
  save_adam_state(path, state);
  const AdamState loaded = load_adam_state(path, p);
  CHECK(loaded.step == state.step);
  for (std::size_t l = 0; l < state.m_weights.size(); ++l) {
    CHECK(loaded.m_weights[l] == state.m_weights[l]);
    CHECK(loaded.v_weights[l] == state.v_weights[l]);
    CHECK(loaded.m_biases[l] == state.m_biases[l]);
    CHECK(loaded.v_biases[l] == state.v_biases[l]);
  }
  std::filesystem::remove(path);
}
