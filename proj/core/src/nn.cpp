#include "camscope/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "camscope/error.hpp"

namespace camscope::nn {

namespace {

std::string shape_message(const char* what, std::size_t expected, std::size_t actual) {
  return std::string(what) + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual);
}

void fill_uniform(std::span<double> values, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : values) v = dist(rng);
}

}  // namespace

void ModelConfig::validate() const {
  require(kernel_size >= 1 && kernel_size % 2 == 1, ErrorCode::contract_violation,
          "kernel_size must be odd and >= 1");
  require(stride == 1, ErrorCode::contract_violation, "stride must be 1");
  require(!conv_channels.empty(), ErrorCode::contract_violation, "conv_channels must not be empty");
  require(std::ranges::all_of(conv_channels, [](std::size_t c) { return c >= 1; }),
          ErrorCode::contract_violation, "every conv layer needs at least one channel");
  require(input_length >= kernel_size, ErrorCode::contract_violation, "input_length must be >= kernel_size");
  require(num_classes >= 2, ErrorCode::contract_violation, "num_classes must be >= 2");
}

FeatureMaps FeatureMaps::from_signal(std::span<const double> signal) {
  FeatureMaps maps(1, signal.size());
  std::ranges::copy(signal, maps.data_.begin());
  return maps;
}

// ---------------------------------------------------------------------------

ModelWeights ModelWeights::zeros(const ModelConfig& config) {
  config.validate();
  ModelWeights w;
  std::size_t in = 1;
  for (std::size_t out : config.conv_channels) {
    w.conv.emplace_back(in, out, config.kernel_size);
    in = out;
  }
  w.dense = DenseLayer(in, config.num_classes);
  return w;
}

void ModelWeights::for_each_tensor(
    const std::function<void(const std::string&, const TensorShape&, std::span<double>)>& fn) {
  for (std::size_t l = 0; l < conv.size(); ++l) {
    auto& layer = conv[l];
    const std::string prefix = "conv" + std::to_string(l);
    fn(prefix + ".kernel", {{layer.out_channels, layer.in_channels, layer.kernel_size}}, layer.kernel);
    fn(prefix + ".bias", {{layer.out_channels}}, layer.bias);
  }
  fn("dense.weight", {{dense.classes, dense.inputs}}, dense.weight);
  fn("dense.bias", {{dense.classes}}, dense.bias);
}

void ModelWeights::for_each_tensor(
    const std::function<void(const std::string&, const TensorShape&, std::span<const double>)>& fn) const {
  const_cast<ModelWeights*>(this)->for_each_tensor(
      [&](const std::string& name, const TensorShape& shape, std::span<double> data) {
        fn(name, shape, std::span<const double>(data));
      });
}

std::size_t ModelWeights::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const TensorShape&, std::span<const double> d) { n += d.size(); });
  return n;
}

bool ModelWeights::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, const TensorShape&, std::span<const double> d) {
    ok = ok && std::ranges::all_of(d, [](double v) { return std::isfinite(v); });
  });
  return ok;
}

void ModelWeights::check_shapes(const ModelConfig& config) const {
  require(conv.size() == config.conv_channels.size(), ErrorCode::contract_violation,
          shape_message("conv layer count", config.conv_channels.size(), conv.size()));
  std::size_t in = 1;
  for (std::size_t l = 0; l < conv.size(); ++l) {
    const auto& layer = conv[l];
    const std::size_t out = config.conv_channels[l];
    const bool ok = layer.in_channels == in && layer.out_channels == out &&
                    layer.kernel_size == config.kernel_size &&
                    layer.kernel.size() == out * in * config.kernel_size && layer.bias.size() == out;
    require(ok, ErrorCode::contract_violation, "conv" + std::to_string(l) + " shape does not match config");
    in = out;
  }
  require(dense.inputs == in && dense.classes == config.num_classes &&
              dense.weight.size() == in * config.num_classes && dense.bias.size() == config.num_classes,
          ErrorCode::contract_violation, "dense layer shape does not match config");
}

Model Model::zeros(const ModelConfig& config) { return Model{config, ModelWeights::zeros(config)}; }

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  Model model = zeros(config);
  std::mt19937_64 rng(seed);
  for (auto& layer : model.weights.conv) {
    const double fan_in = static_cast<double>(layer.in_channels * layer.kernel_size);
    const double fan_out = static_cast<double>(layer.out_channels * layer.kernel_size);
    fill_uniform(layer.kernel, std::sqrt(6.0 / (fan_in + fan_out)), rng);
  }
  auto& dense = model.weights.dense;
  fill_uniform(dense.weight, std::sqrt(6.0 / static_cast<double>(dense.inputs + dense.classes)), rng);
  return model;
}

// ---------------------------------------------------------------------------

FeatureMaps conv1d_forward(const FeatureMaps& input, const ConvLayer& layer) {
  require(input.channels() == layer.in_channels, ErrorCode::contract_violation,
          shape_message("conv1d input channels", layer.in_channels, input.channels()));
  require(layer.kernel_size % 2 == 1, ErrorCode::contract_violation, "conv1d kernel size must be odd");
  require(layer.kernel.size() == layer.out_channels * layer.in_channels * layer.kernel_size &&
              layer.bias.size() == layer.out_channels,
          ErrorCode::contract_violation, "conv1d parameter shape mismatch");
  const std::size_t length = input.length();
  require(length >= 1, ErrorCode::contract_violation, "conv1d input is empty");

  const auto pad = static_cast<std::ptrdiff_t>(layer.kernel_size / 2);
  const auto len = static_cast<std::ptrdiff_t>(length);
  FeatureMaps out(layer.out_channels, length);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    auto dst = out.channel(o);
    std::ranges::fill(dst, layer.bias[o]);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const auto src = input.channel(i);
      for (std::size_t j = 0; j < layer.kernel_size; ++j) {
        const double w = layer.tap(o, i, j);
        if (w == 0.0) continue;
        // dst[t] += w * src[t + j - pad] over the valid range of t
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
        for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t] += w * src[t + shift];
      }
    }
  }
  return out;
}

std::vector<double> relu(std::span<const double> x) {
  std::vector<double> out(x.begin(), x.end());
  relu_inplace(out);
  return out;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

std::vector<double> gap(const FeatureMaps& maps) {
  require(maps.length() >= 1, ErrorCode::empty_input, "global average pooling over zero-length maps");
  std::vector<double> out(maps.channels());
  const double inv = 1.0 / static_cast<double>(maps.length());
  for (std::size_t k = 0; k < maps.channels(); ++k) {
    const auto ch = maps.channel(k);
    out[k] = std::accumulate(ch.begin(), ch.end(), 0.0) * inv;
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorCode::empty_input, "softmax of an empty vector");
  require(std::ranges::all_of(logits, [](double v) { return std::isfinite(v); }), ErrorCode::numeric_error,
          "non-finite logits");
  const double top = *std::ranges::max_element(logits);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    p[c] = std::exp(logits[c] - top);
    total += p[c];
  }
  for (double& v : p) v /= total;
  return p;
}

DenseOutput dense_softmax(std::span<const double> pooled, const DenseLayer& dense) {
  require(pooled.size() == dense.inputs, ErrorCode::contract_violation,
          shape_message("dense input size", dense.inputs, pooled.size()));
  DenseOutput out;
  out.logits.resize(dense.classes);
  for (std::size_t c = 0; c < dense.classes; ++c) {
    const auto row = dense.row(c);
    out.logits[c] = std::inner_product(row.begin(), row.end(), pooled.begin(), 0.0) + dense.bias[c];
  }
  out.probabilities = softmax(out.logits);
  return out;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), ErrorCode::empty_input, "argmax of an empty vector");
  return static_cast<std::size_t>(std::ranges::max_element(values) - values.begin());
}

// ---------------------------------------------------------------------------

ForwardResult forward(const Model& model, std::span<const double> sample) {
  require(sample.size() == model.config.input_length, ErrorCode::contract_violation,
          shape_message("sample length", model.config.input_length, sample.size()));
  ForwardResult result;
  result.activations.reserve(model.weights.conv.size());
  const FeatureMaps input = FeatureMaps::from_signal(sample);
  const FeatureMaps* current = &input;
  for (const auto& layer : model.weights.conv) {
    FeatureMaps next = conv1d_forward(*current, layer);
    relu_inplace(next.values());
    result.activations.push_back(std::move(next));
    current = &result.activations.back();
  }
  result.pooled = gap(result.activations.back());
  auto dense = dense_softmax(result.pooled, model.weights.dense);
  result.logits = std::move(dense.logits);
  result.probabilities = std::move(dense.probabilities);
  return result;
}

double cross_entropy(std::span<const double> probabilities, std::size_t label) {
  require(label < probabilities.size(), ErrorCode::index_out_of_range,
          "label " + std::to_string(label) + " out of range for " + std::to_string(probabilities.size()) +
              " classes");
  return -std::log(std::max(probabilities[label], kProbabilityFloor));
}

namespace {

// Adds the kernel/bias gradient of `layer` given the upstream gradient
// `grad_out` (already gated) and returns the gradient w.r.t. the layer input.
FeatureMaps conv1d_backward(const FeatureMaps& input, const ConvLayer& layer, const FeatureMaps& grad_out,
                            ConvLayer& grad_layer, bool need_input_grad) {
  const auto pad = static_cast<std::ptrdiff_t>(layer.kernel_size / 2);
  const auto len = static_cast<std::ptrdiff_t>(input.length());
  FeatureMaps grad_in;
  if (need_input_grad) grad_in = FeatureMaps(layer.in_channels, input.length());

  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const auto g = grad_out.channel(o);
    grad_layer.bias[o] += std::accumulate(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < layer.in_channels; ++i) {
      const auto src = input.channel(i);
      for (std::size_t j = 0; j < layer.kernel_size; ++j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
        double acc = 0.0;
        for (std::ptrdiff_t t = t0; t < t1; ++t) acc += g[t] * src[t + shift];
        grad_layer.tap(o, i, j) += acc;
        if (need_input_grad) {
          const double w = layer.tap(o, i, j);
          if (w == 0.0) continue;
          auto dst = grad_in.channel(i);
          for (std::ptrdiff_t t = t0; t < t1; ++t) dst[t + shift] += w * g[t];
        }
      }
    }
  }
  return grad_in;
}

void gate_by_activation(FeatureMaps& grad, const FeatureMaps& activation) {
  auto g = grad.values();
  const auto a = activation.values();
  for (std::size_t n = 0; n < g.size(); ++n)
    if (!(a[n] > 0.0)) g[n] = 0.0;
}

}  // namespace

double accumulate_gradient(const Model& model, std::span<const double> sample, std::size_t label,
                           Gradients& grads, ForwardResult* forward_out) {
  const auto& config = model.config;
  require(label < config.num_classes, ErrorCode::index_out_of_range,
          "label " + std::to_string(label) + " out of range");
  ForwardResult fwd = forward(model, sample);
  const double loss = cross_entropy(fwd.probabilities, label);

  const auto& dense = model.weights.dense;
  std::vector<double> grad_logits = fwd.probabilities;
  grad_logits[label] -= 1.0;

  std::vector<double> grad_pooled(dense.inputs, 0.0);
  for (std::size_t c = 0; c < dense.classes; ++c) {
    grads.dense.bias[c] += grad_logits[c];
    for (std::size_t k = 0; k < dense.inputs; ++k) {
      grads.dense.w(c, k) += grad_logits[c] * fwd.pooled[k];
      grad_pooled[k] += dense.w(c, k) * grad_logits[c];
    }
  }

  const std::size_t layers = model.weights.conv.size();
  const double inv_len = 1.0 / static_cast<double>(config.input_length);
  FeatureMaps grad(dense.inputs, config.input_length);
  for (std::size_t k = 0; k < dense.inputs; ++k) std::ranges::fill(grad.channel(k), grad_pooled[k] * inv_len);

  const FeatureMaps input = FeatureMaps::from_signal(sample);
  for (std::size_t l = layers; l-- > 0;) {
    gate_by_activation(grad, fwd.activations[l]);
    const FeatureMaps& layer_input = l == 0 ? input : fwd.activations[l - 1];
    grad = conv1d_backward(layer_input, model.weights.conv[l], grad, grads.conv[l], l > 0);
  }

  require(std::isfinite(loss), ErrorCode::numeric_error, "non-finite loss");
  if (forward_out != nullptr) *forward_out = std::move(fwd);
  return loss;
}

Gradients backward(const Model& model, std::span<const double> sample, std::size_t label) {
  Gradients grads = ModelWeights::zeros(model.config);
  accumulate_gradient(model, sample, label, grads);
  require(grads.all_finite(), ErrorCode::numeric_error, "non-finite gradient");
  return grads;
}

Prediction predict(const Model& model, std::span<const double> sample) {
  auto fwd = forward(model, sample);
  return Prediction{argmax(fwd.probabilities), std::move(fwd.probabilities)};
}

// ---------------------------------------------------------------------------

AdamState AdamState::for_model(const ModelConfig& config) {
  return AdamState{ModelWeights::zeros(config), ModelWeights::zeros(config), 0};
}

void adam_step(ModelWeights& weights, const Gradients& gradients, AdamState& state, const AdamOptions& options) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);

  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
  std::vector<std::span<double>> m;
  std::vector<std::span<double>> v;
  weights.for_each_tensor([&](const std::string&, const TensorShape&, std::span<double> d) { params.push_back(d); });
  gradients.for_each_tensor(
      [&](const std::string&, const TensorShape&, std::span<const double> d) { grads.push_back(d); });
  state.first_moment.for_each_tensor([&](const std::string&, const TensorShape&, std::span<double> d) { m.push_back(d); });
  state.second_moment.for_each_tensor([&](const std::string&, const TensorShape&, std::span<double> d) { v.push_back(d); });

  require(params.size() == grads.size() && params.size() == m.size() && params.size() == v.size(),
          ErrorCode::contract_violation, "adam: tensor count mismatch");
  for (std::size_t n = 0; n < params.size(); ++n) {
    require(params[n].size() == grads[n].size() && params[n].size() == m[n].size() &&
                params[n].size() == v[n].size(),
            ErrorCode::contract_violation, "adam: tensor shape mismatch");
    for (std::size_t i = 0; i < params[n].size(); ++i) {
      const double g = grads[n][i];
      m[n][i] = options.beta1 * m[n][i] + (1.0 - options.beta1) * g;
      v[n][i] = options.beta2 * v[n][i] + (1.0 - options.beta2) * g * g;
      const double m_hat = m[n][i] / correction1;
      const double v_hat = v[n][i] / correction2;
      params[n][i] -= options.lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
  }
}

}  // namespace camscope::nn
