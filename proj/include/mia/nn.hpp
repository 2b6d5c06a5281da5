#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mia/rng.hpp"

namespace mia::nn {

enum class Activation { linear, relu, tanh, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Affine map followed by an elementwise activation. `weights` is out x in, row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::linear;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation activation);

  double& w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }
  std::size_t parameter_count() const;
  /// Throws ConfigError unless layers are non-empty, chain and carry finite values.
  void validate() const;
};

/// Builds an MLP from a dimension list {d0, d1, ..., dk}; `hidden` applies to all
/// layers but the last, which uses `output`.
Mlp make_mlp(const std::vector<std::size_t>& dims, Activation hidden, Activation output);

/// Uniform Glorot initialisation: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)), bias 0.
void glorot_init(Mlp& mlp, Rng& rng);

/// Per-layer inputs and pre-activations from one forward pass.
struct ForwardCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

struct ForwardResult {
  std::vector<double> y;
  ForwardCache cache;
};

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;
};

struct MlpGrads {
  std::vector<LayerGrads> layers;

  static MlpGrads zeros_like(const Mlp& mlp);
  void scale(double factor);
  bool all_finite() const;
};

struct BackwardResult {
  MlpGrads grads;
  std::vector<double> dx;
};

double activate(Activation a, double pre);
/// Derivative of the activation with respect to its pre-activation input.
double activate_grad(Activation a, double pre);

ForwardResult forward(const Mlp& mlp, std::span<const double> x);
/// Forward pass without a cache, for inference.
std::vector<double> predict(const Mlp& mlp, std::span<const double> x);

BackwardResult backward(const Mlp& mlp, const ForwardCache& cache, std::span<const double> dy);
/// Gradient with respect to the input only; parameter gradients are not formed.
std::vector<double> backward_input(const Mlp& mlp, const ForwardCache& cache,
                                   std::span<const double> dy);
/// Adds this sample's parameter gradients into `grads` and returns dL/dx.
std::vector<double> backward_accumulate(const Mlp& mlp, const ForwardCache& cache,
                                        std::span<const double> dy, MlpGrads& grads);

struct BceResult {
  double loss;
  double dlogit;
};

double sigmoid(double x);
/// Binary cross-entropy on a logit, log(1 + exp(-|l|)) form.
BceResult bce_logits_loss(double logit, int target);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  MlpGrads m;
  MlpGrads v;

  static AdamState for_model(const Mlp& mlp, double lr);
};

/// One bias-corrected Adam update. Throws DivergenceError("divergence") on a
/// non-finite gradient before touching any parameter.
void adam_step(Mlp& mlp, const MlpGrads& grads, AdamState& state);

}  // namespace mia::nn
