#pragma once

// Fixed-architecture 1D CNN: a stack of same-padded convolutions with ReLU,
// global average pooling and a dense softmax classifier. All arithmetic is
// carried out in double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace camscope::nn {

struct ModelConfig {
  std::size_t input_length = 1500;
  std::vector<std::size_t> conv_channels{16, 32, 64, 128, 128, 128};
  std::size_t kernel_size = 5;
  std::size_t stride = 1;
  std::size_t num_classes = 2;

  /// Throws Error(contract_violation) when any invariant is broken.
  void validate() const;
  std::size_t last_channels() const { return conv_channels.back(); }

  bool operator==(const ModelConfig&) const = default;
};

/// Row-major block of `channels` signals, each `length` samples long.
class FeatureMaps {
 public:
  FeatureMaps() = default;
  FeatureMaps(std::size_t channels, std::size_t length, double fill = 0.0)
      : channels_(channels), length_(length), data_(channels * length, fill) {}

  /// Single-channel view over an input vector.
  static FeatureMaps from_signal(std::span<const double> signal);

  std::size_t channels() const { return channels_; }
  std::size_t length() const { return length_; }

  std::span<double> channel(std::size_t c) { return {data_.data() + c * length_, length_}; }
  std::span<const double> channel(std::size_t c) const {
    return {data_.data() + c * length_, length_};
  }
  double& at(std::size_t c, std::size_t t) { return data_[c * length_ + t]; }
  double at(std::size_t c, std::size_t t) const { return data_[c * length_ + t]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const FeatureMaps&) const = default;

 private:
  std::size_t channels_ = 0;
  std::size_t length_ = 0;
  std::vector<double> data_;
};

struct ConvLayer {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;
  std::vector<double> kernel;  // out × in × kernel_size
  std::vector<double> bias;    // out

  ConvLayer() = default;
  ConvLayer(std::size_t in, std::size_t out, std::size_t k)
      : in_channels(in), out_channels(out), kernel_size(k), kernel(out * in * k, 0.0), bias(out, 0.0) {}

  double& tap(std::size_t o, std::size_t i, std::size_t j) {
    return kernel[(o * in_channels + i) * kernel_size + j];
  }
  double tap(std::size_t o, std::size_t i, std::size_t j) const {
    return kernel[(o * in_channels + i) * kernel_size + j];
  }

  bool operator==(const ConvLayer&) const = default;
};

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t classes = 0;
  std::vector<double> weight;  // classes × inputs; weight(c, k) is the CAM weight of map k for class c
  std::vector<double> bias;    // classes

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t c) : inputs(in), classes(c), weight(in * c, 0.0), bias(c, 0.0) {}

  double& w(std::size_t c, std::size_t k) { return weight[c * inputs + k]; }
  double w(std::size_t c, std::size_t k) const { return weight[c * inputs + k]; }
  std::span<const double> row(std::size_t c) const { return {weight.data() + c * inputs, inputs}; }

  bool operator==(const DenseLayer&) const = default;
};

struct TensorShape {
  std::vector<std::size_t> dims;
};

struct ModelWeights {
  std::vector<ConvLayer> conv;
  DenseLayer dense;

  /// All-zero parameters shaped for `config`.
  static ModelWeights zeros(const ModelConfig& config);

  /// Visits each parameter tensor in a fixed order with a stable name
  /// ("conv0.kernel", "conv0.bias", ..., "dense.weight", "dense.bias").
  void for_each_tensor(const std::function<void(const std::string&, const TensorShape&, std::span<double>)>& fn);
  void for_each_tensor(
      const std::function<void(const std::string&, const TensorShape&, std::span<const double>)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Shape congruence with `config` (throws contract_violation).
  void check_shapes(const ModelConfig& config) const;

  bool operator==(const ModelWeights&) const = default;
};

using Gradients = ModelWeights;

struct Model {
  ModelConfig config;
  ModelWeights weights;

  /// Glorot-uniform kernels and dense weights, zero biases, seeded.
  static Model initialize(const ModelConfig& config, std::uint64_t seed);
  static Model zeros(const ModelConfig& config);

  bool operator==(const Model&) const = default;
};

// ---------------------------------------------------------------------------
// Layer primitives

/// Zero same-padding of kernel_size/2 on each side; output length equals input length.
FeatureMaps conv1d_forward(const FeatureMaps& input, const ConvLayer& layer);

std::vector<double> relu(std::span<const double> x);
void relu_inplace(std::span<double> x);

/// Mean of every channel. Throws empty_input when the maps have zero length.
std::vector<double> gap(const FeatureMaps& maps);

std::vector<double> softmax(std::span<const double> logits);

struct DenseOutput {
  std::vector<double> logits;
  std::vector<double> probabilities;
};

DenseOutput dense_softmax(std::span<const double> pooled, const DenseLayer& dense);

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

// ---------------------------------------------------------------------------
// Whole-model passes

struct ForwardResult {
  std::vector<FeatureMaps> activations;  // post-ReLU output of every conv layer
  std::vector<double> pooled;
  std::vector<double> logits;
  std::vector<double> probabilities;

  const FeatureMaps& last_feature_maps() const { return activations.back(); }
};

ForwardResult forward(const Model& model, std::span<const double> sample);

inline constexpr double kProbabilityFloor = 1e-12;

double cross_entropy(std::span<const double> probabilities, std::size_t label);

/// Exact gradient of cross_entropy(forward(sample), label) w.r.t. every parameter.
Gradients backward(const Model& model, std::span<const double> sample, std::size_t label);

/// Accumulates the gradient into `grads` (which must be shaped like the
/// model) and returns the sample loss together with the forward pass.
double accumulate_gradient(const Model& model, std::span<const double> sample, std::size_t label,
                           Gradients& grads, ForwardResult* forward_out = nullptr);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

Prediction predict(const Model& model, std::span<const double> sample);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  ModelWeights first_moment;
  ModelWeights second_moment;
  std::uint64_t step = 0;

  static AdamState for_model(const ModelConfig& config);
};

/// One bias-corrected Adam update of `weights` in place.
void adam_step(ModelWeights& weights, const Gradients& gradients, AdamState& state,
               const AdamOptions& options);

}  // namespace camscope::nn
