#include "mia/nn.hpp"

#include <algorithm>
#include <cmath>

#include "mia/error.hpp"

namespace mia::nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "linear";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw FormatError("unknown activation: " + name);
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation act)
    : in(in_dim), out(out_dim), weights(in_dim * out_dim, 0.0), bias(out_dim, 0.0),
      activation(act) {}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

void Mlp::validate() const {
  if (layers.empty()) throw ConfigError("mlp has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.in == 0 || l.out == 0 || l.weights.size() != l.in * l.out || l.bias.size() != l.out)
      throw ConfigError("dense layer dimensions are inconsistent");
    if (i > 0 && layers[i - 1].out != l.in) throw ConfigError("mlp layer dimensions do not chain");
    for (double w : l.weights)
      if (!std::isfinite(w)) throw ConfigError("non-finite weight");
    for (double b : l.bias)
      if (!std::isfinite(b)) throw ConfigError("non-finite bias");
  }
}

Mlp make_mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation output) {
  if (dims.size() < 2) throw ConfigError("mlp needs at least two dimensions");
  Mlp mlp;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    mlp.layers.emplace_back(dims[i], dims[i + 1], i + 2 == dims.size() ? output : hidden);
  return mlp;
}

void glorot_init(Mlp& mlp, Rng& rng) {
  for (auto& l : mlp.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& w : l.weights) w = dist(rng);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

MlpGrads MlpGrads::zeros_like(const Mlp& mlp) {
  MlpGrads g;
  g.layers.reserve(mlp.layers.size());
  for (const auto& l : mlp.layers)
    g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.out, 0.0)});
  return g;
}

void MlpGrads::scale(double factor) {
  for (auto& l : layers) {
    for (auto& w : l.weights) w *= factor;
    for (auto& b : l.bias) b *= factor;
  }
}

bool MlpGrads::all_finite() const {
  for (const auto& l : layers) {
    for (double w : l.weights)
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation a, double pre) {
  switch (a) {
    case Activation::linear: return pre;
    case Activation::relu: return pre > 0.0 ? pre : 0.0;
    case Activation::tanh: return std::tanh(pre);
    case Activation::sigmoid: return sigmoid(pre);
  }
  return pre;
}

double activate_grad(Activation a, double pre) {
  switch (a) {
    case Activation::linear: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::sigmoid: {
      const double s = sigmoid(pre);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

namespace {

void affine(const DenseLayer& l, std::span<const double> x, std::vector<double>& pre) {
  pre.assign(l.bias.begin(), l.bias.end());
  for (std::size_t r = 0; r < l.out; ++r) {
    const double* row = &l.weights[r * l.in];
    double acc = 0.0;
    for (std::size_t c = 0; c < l.in; ++c) acc += row[c] * x[c];
    pre[r] += acc;
  }
}

void check_input(const Mlp& mlp, std::span<const double> x) {
  if (mlp.layers.empty()) throw ConfigError("mlp has no layers");
  if (x.size() != mlp.in_dim()) throw ConfigError("input dimension mismatch");
}

}  // namespace

ForwardResult forward(const Mlp& mlp, std::span<const double> x) {
  check_input(mlp, x);
  ForwardResult res;
  res.cache.inputs.reserve(mlp.layers.size());
  res.cache.pre.reserve(mlp.layers.size());
  std::vector<double> cur(x.begin(), x.end());
  for (const auto& l : mlp.layers) {
    std::vector<double> pre;
    affine(l, cur, pre);
    res.cache.inputs.push_back(std::move(cur));
    cur.resize(l.out);
    for (std::size_t i = 0; i < l.out; ++i) cur[i] = activate(l.activation, pre[i]);
    res.cache.pre.push_back(std::move(pre));
  }
  res.y = std::move(cur);
  return res;
}

std::vector<double> predict(const Mlp& mlp, std::span<const double> x) {
  check_input(mlp, x);
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> pre;
  for (const auto& l : mlp.layers) {
    affine(l, cur, pre);
    cur.resize(l.out);
    for (std::size_t i = 0; i < l.out; ++i) cur[i] = activate(l.activation, pre[i]);
  }
  return cur;
}

std::vector<double> backward_accumulate(const Mlp& mlp, const ForwardCache& cache,
                                        std::span<const double> dy, MlpGrads& grads) {
  const std::size_t n = mlp.layers.size();
  if (cache.inputs.size() != n || cache.pre.size() != n)
    throw ConfigError("forward cache does not match model");
  for (std::size_t i = 0; i < n; ++i)
    if (cache.inputs[i].size() != mlp.layers[i].in || cache.pre[i].size() != mlp.layers[i].out)
      throw ConfigError("forward cache does not match model");
  if (grads.layers.size() != n) throw ConfigError("gradient buffer does not match model");
  if (dy.size() != mlp.out_dim()) throw ConfigError("output gradient dimension mismatch");

  std::vector<double> upstream(dy.begin(), dy.end());
  for (std::size_t li = n; li-- > 0;) {
    const auto& l = mlp.layers[li];
    const auto& x = cache.inputs[li];
    const auto& pre = cache.pre[li];
    auto& g = grads.layers[li];

    std::vector<double> dpre(l.out);
    for (std::size_t r = 0; r < l.out; ++r) dpre[r] = upstream[r] * activate_grad(l.activation, pre[r]);

    std::vector<double> dx(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = dpre[r];
      g.bias[r] += d;
      if (d == 0.0) continue;
      double* grow = &g.weights[r * l.in];
      const double* wrow = &l.weights[r * l.in];
      for (std::size_t c = 0; c < l.in; ++c) {
        grow[c] += d * x[c];
        dx[c] += wrow[c] * d;
      }
    }
    upstream = std::move(dx);
  }
  return upstream;
}

std::vector<double> backward_input(const Mlp& mlp, const ForwardCache& cache,
                                   std::span<const double> dy) {
  const std::size_t n = mlp.layers.size();
  if (cache.inputs.size() != n || cache.pre.size() != n)
    throw ConfigError("forward cache does not match model");
  if (dy.size() != mlp.out_dim()) throw ConfigError("output gradient dimension mismatch");
  std::vector<double> upstream(dy.begin(), dy.end());
  for (std::size_t li = n; li-- > 0;) {
    const auto& l = mlp.layers[li];
    if (cache.pre[li].size() != l.out) throw ConfigError("forward cache does not match model");
    std::vector<double> dx(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = upstream[r] * activate_grad(l.activation, cache.pre[li][r]);
      if (d == 0.0) continue;
      const double* wrow = &l.weights[r * l.in];
      for (std::size_t c = 0; c < l.in; ++c) dx[c] += wrow[c] * d;
    }
    upstream = std::move(dx);
  }
  return upstream;
}

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, std::span<const double> dy) {
  BackwardResult res;
  res.grads = MlpGrads::zeros_like(mlp);
  res.dx = backward_accumulate(mlp, cache, dy, res.grads);
  return res;
}

BceResult bce_logits_loss(double logit, int target) {
  const double t = target ? 1.0 : 0.0;
  const double loss = std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)));
  return {loss, sigmoid(logit) - t};
}

AdamState AdamState::for_model(const Mlp& mlp, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = MlpGrads::zeros_like(mlp);
  s.v = MlpGrads::zeros_like(mlp);
  return s;
}

void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state) {
  if (grads.layers.size() != mlp.layers.size() || state.m.layers.size() != mlp.layers.size() ||
      state.v.layers.size() != mlp.layers.size())
    throw ConfigError("adam state does not match model");
  if (!grads.all_finite()) throw DivergenceError("divergence");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    if (p.size() != g.size() || m.size() != p.size() || v.size() != p.size())
      throw ConfigError("adam state does not match model");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  };

  for (std::size_t li = 0; li < mlp.layers.size(); ++li) {
    auto& l = mlp.layers[li];
    update(l.weights, grads.layers[li].weights, state.m.layers[li].weights, state.v.layers[li].weights);
    update(l.bias, grads.layers[li].bias, state.m.layers[li].bias, state.v.layers[li].bias);
  }
}

}  // namespace mia::nn
