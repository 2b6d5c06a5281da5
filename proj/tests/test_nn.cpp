#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mia/error.hpp"
#include "mia/nn.hpp"

using namespace mia;
using namespace mia::nn;

namespace {

Mlp identity_layer(std::size_t n, Activation a) {
  Mlp m;
  m.layers.emplace_back(n, n, a);
  for (std::size_t i = 0; i < n; ++i) m.layers[0].w(i, i) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("forward examples") {
  const std::vector<double> x{-1.0, 2.0};
  CHECK(forward(identity_layer(2, Activation::linear), x).y == x);
  CHECK(forward(identity_layer(2, Activation::relu), x).y == std::vector<double>{0.0, 2.0});

  Mlp sig;
  sig.layers.emplace_back(3, 2, Activation::sigmoid);
  const auto y = forward(sig, std::vector<double>{0, 0, 0}).y;
  CHECK(y == std::vector<double>{0.5, 0.5});

  CHECK_THROWS_AS(forward(sig, std::vector<double>{0, 0}), ConfigError);
}

TEST_CASE("predict agrees with forward") {
  Rng rng(1);
  Mlp m = make_mlp({5, 7, 3}, Activation::tanh, Activation::sigmoid);
  glorot_init(m, rng);
  const std::vector<double> x{0.1, -0.3, 0.7, 1.0, -2.0};
  CHECK(predict(m, x) == forward(m, x).y);
}

TEST_CASE("backward on the identity layer") {
  const auto m = identity_layer(3, Activation::linear);
  const std::vector<double> x{0.5, -1.0, 2.0};
  const auto f = forward(m, x);
  const auto b = backward(m, f.cache, std::vector<double>{1.0, 0.0, 0.0});
  CHECK(b.dx == std::vector<double>{1.0, 0.0, 0.0});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(b.grads.layers[0].weights[r * 3 + c] == (r == 0 ? x[c] : 0.0));
  CHECK(b.grads.layers[0].bias == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  Rng rng(2);
  Mlp m = make_mlp({4, 6, 2}, Activation::relu, Activation::linear);
  glorot_init(m, rng);
  const auto f = forward(m, std::vector<double>{1, 2, 3, 4});
  const auto b = backward(m, f.cache, std::vector<double>{0, 0});
  for (const auto& l : b.grads.layers) {
    for (double g : l.weights) CHECK(g == 0.0);
    for (double g : l.bias) CHECK(g == 0.0);
  }
  for (double d : b.dx) CHECK(d == 0.0);
}

TEST_CASE("mismatched cache is rejected") {
  Rng rng(3);
  Mlp a = make_mlp({4, 6, 2}, Activation::relu, Activation::linear);
  Mlp b = make_mlp({4, 5, 2}, Activation::relu, Activation::linear);
  glorot_init(a, rng);
  glorot_init(b, rng);
  const auto f = forward(a, std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(backward(b, f.cache, std::vector<double>{1, 1}), ConfigError);
  CHECK_THROWS_AS(backward(a, f.cache, std::vector<double>{1}), ConfigError);
}

TEST_CASE("backward_input matches the full backward pass") {
  Rng rng(4);
  Mlp m = make_mlp({6, 8, 8, 3}, Activation::tanh, Activation::linear);
  glorot_init(m, rng);
  const auto f = forward(m, std::vector<double>{0.2, -0.1, 0.3, 0.9, -0.7, 0.05});
  const std::vector<double> dy{0.3, -1.0, 0.25};
  const auto full = backward(m, f.cache, dy);
  const auto in_only = backward_input(m, f.cache, dy);
  REQUIRE(in_only.size() == full.dx.size());
  for (std::size_t i = 0; i < in_only.size(); ++i) CHECK(in_only[i] == doctest::Approx(full.dx[i]).epsilon(1e-12));
}

TEST_CASE("finite-difference gradient check on random nets") {
  Rng rng(20240601);
  for (int net = 0; net < 10; ++net) {
    const auto r = testing::random_gradcheck(rng);
    INFO("net " << net << " params " << r.parameters);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("bce on logits") {
  auto a = bce_logits_loss(0.0, 1);
  CHECK(a.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(a.dlogit == doctest::Approx(-0.5));
  auto b = bce_logits_loss(0.0, 0);
  CHECK(b.loss == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(b.dlogit == doctest::Approx(0.5));
  auto c = bce_logits_loss(50.0, 1);
  CHECK(std::isfinite(c.loss));
  CHECK(c.loss >= 0.0);
  CHECK(c.loss < 1e-20);
  auto d = bce_logits_loss(-800.0, 1);
  CHECK(std::isfinite(d.loss));
  CHECK(d.loss == doctest::Approx(800.0));
  for (double l : {-30.0, -2.0, -0.1, 0.0, 0.4, 3.0, 40.0})
    for (int t : {0, 1}) CHECK(bce_logits_loss(l, t).loss >= 0.0);
}

TEST_CASE("bce gradient matches finite differences") {
  for (double l : {-3.0, -0.5, 0.0, 0.7, 4.0})
    for (int t : {0, 1}) {
      const double h = 1e-6;
      const double num = (bce_logits_loss(l + h, t).loss - bce_logits_loss(l - h, t).loss) / (2 * h);
      CHECK(bce_logits_loss(l, t).dlogit == doctest::Approx(num).epsilon(1e-6));
    }
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  Rng rng(5);
  Mlp m = make_mlp({3, 4, 1}, Activation::relu, Activation::linear);
  glorot_init(m, rng);
  const Mlp before = m;
  auto state = AdamState::for_model(m, 0.01);
  adam_step(m, MlpGrads::zeros_like(m), state);
  CHECK(state.step == 1);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    CHECK(m.layers[i].weights == before.layers[i].weights);
    CHECK(m.layers[i].bias == before.layers[i].bias);
  }
}

TEST_CASE("first adam step moves by about lr") {
  Mlp m;
  m.layers.emplace_back(1, 1, Activation::linear);
  m.layers[0].w(0, 0) = 0.0;
  auto state = AdamState::for_model(m, 0.1);
  auto g = MlpGrads::zeros_like(m);
  g.layers[0].weights[0] = 1.0;
  adam_step(m, g, state);
  // m_hat = 1, v_hat = 1, so the update is lr / (1 + eps).
  CHECK(m.layers[0].w(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("constant gradient moves the parameter monotonically") {
  Mlp m;
  m.layers.emplace_back(1, 1, Activation::linear);
  auto state = AdamState::for_model(m, 0.05);
  auto g = MlpGrads::zeros_like(m);
  g.layers[0].weights[0] = -2.0;
  double prev = m.layers[0].w(0, 0);
  for (int i = 0; i < 50; ++i) {
    adam_step(m, g, state);
    CHECK(m.layers[0].w(0, 0) > prev);
    prev = m.layers[0].w(0, 0);
  }
}

TEST_CASE("adam rejects non-finite gradients without modifying parameters") {
  Mlp m;
  m.layers.emplace_back(2, 1, Activation::linear);
  m.layers[0].w(0, 0) = 0.3;
  auto state = AdamState::for_model(m, 0.1);
  auto g = MlpGrads::zeros_like(m);
  g.layers[0].weights[1] = std::nan("");
  CHECK_THROWS_WITH_AS(adam_step(m, g, state), "divergence", DivergenceError);
  CHECK(m.layers[0].w(0, 0) == 0.3);
  CHECK(state.step == 0);
}
