#include "camscope/train.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>
#include <random>
#include <thread>

#include "camscope/error.hpp"

namespace camscope::nn {

namespace {

// The partition of a batch into chunks is fixed, and chunk results are
// reduced in chunk order, so the thread count never changes the sums.
constexpr std::size_t kChunks = 8;

std::size_t resolve_threads(std::size_t requested) {
  if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
  return std::min(requested, kChunks);
}

template <typename Fn>
void run_chunks(std::size_t chunks, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  const std::size_t count = std::min(threads, chunks);
  workers.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) fn(c);
    });
  }
}

void zero(ModelWeights& w) {
  w.for_each_tensor([](const std::string&, const TensorShape&, std::span<double> d) { std::ranges::fill(d, 0.0); });
}

void add_scaled(ModelWeights& dst, const ModelWeights& src, double scale) {
  std::vector<std::span<const double>> parts;
  src.for_each_tensor([&](const std::string&, const TensorShape&, std::span<const double> d) { parts.push_back(d); });
  std::size_t n = 0;
  dst.for_each_tensor([&](const std::string&, const TensorShape&, std::span<double> d) {
    const auto s = parts[n++];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
  });
}

void check_examples(const ModelConfig& config, std::span<const Example> data) {
  require(!data.empty(), ErrorCode::empty_input, "training dataset is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data[i].input.size() == config.input_length, ErrorCode::contract_violation,
            "sample " + std::to_string(i) + " has length " + std::to_string(data[i].input.size()) +
                ", expected " + std::to_string(config.input_length));
    require(data[i].label < config.num_classes, ErrorCode::index_out_of_range,
            "sample " + std::to_string(i) + " has label " + std::to_string(data[i].label) + " >= " +
                std::to_string(config.num_classes));
  }
}

}  // namespace

std::vector<ClassMetrics> classification_report(std::span<const std::size_t> predicted,
                                                std::span<const std::size_t> truth, std::size_t num_classes) {
  require(predicted.size() == truth.size(), ErrorCode::contract_violation, "prediction/label count mismatch");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::vector<ClassMetrics> out(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::size_t p = predicted[i];
    const std::size_t t = truth[i];
    require(p < num_classes && t < num_classes, ErrorCode::index_out_of_range, "class index out of range");
    out[t].support += 1;
    if (p == t) {
      tp[t] += 1;
    } else {
      fp[p] += 1;
      fn[t] += 1;
    }
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& m = out[c];
    const double tpc = static_cast<double>(tp[c]);
    m.precision = tp[c] + fp[c] == 0 ? 0.0 : tpc / static_cast<double>(tp[c] + fp[c]);
    m.recall = tp[c] + fn[c] == 0 ? 0.0 : tpc / static_cast<double>(tp[c] + fn[c]);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  return out;
}

namespace {

EpochMetrics evaluate_with(const Model& model, std::span<const Example> data, std::size_t threads) {
  check_examples(model.config, data);
  std::vector<std::size_t> predicted(data.size());
  std::vector<double> losses(data.size());
  const std::size_t chunks = std::min(kChunks, data.size());
  run_chunks(chunks, threads, [&](std::size_t c) {
    const std::size_t begin = c * data.size() / chunks;
    const std::size_t end = (c + 1) * data.size() / chunks;
    for (std::size_t i = begin; i < end; ++i) {
      const auto fwd = forward(model, data[i].input);
      predicted[i] = argmax(fwd.probabilities);
      losses[i] = cross_entropy(fwd.probabilities, data[i].label);
    }
  });

  std::vector<std::size_t> truth(data.size());
  std::ranges::transform(data, truth.begin(), [](const Example& e) { return e.label; });

  EpochMetrics m;
  m.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(data.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += predicted[i] == truth[i] ? 1 : 0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  m.per_class = classification_report(predicted, truth, model.config.num_classes);
  double f1 = 0.0;
  for (const auto& c : m.per_class) f1 += c.f1;
  m.macro_f1 = f1 / static_cast<double>(m.per_class.size());
  return m;
}

}  // namespace

EpochMetrics evaluate(const Model& model, std::span<const Example> data) { return evaluate_with(model, data, 1); }

TrainResult train(Model initial, std::span<const Example> data, const TrainOptions& options) {
  initial.config.validate();
  initial.weights.check_shapes(initial.config);
  check_examples(initial.config, data);
  require(options.batch_size >= 1, ErrorCode::invalid_argument, "batch_size must be >= 1");

  TrainResult result{std::move(initial), {}};
  Model& model = result.model;
  const std::size_t threads = resolve_threads(options.threads);

  AdamState state = AdamState::for_model(model.config);
  std::vector<ModelWeights> partial(kChunks, ModelWeights::zeros(model.config));
  ModelWeights batch_grad = ModelWeights::zeros(model.config);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Separate stream from the one used for initialization.
  std::mt19937_64 shuffle_rng(options.seed ^ 0x9e3779b97f4a7c15ULL);

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const std::size_t batch = stop - start;
      const std::size_t chunks = std::min(kChunks, batch);
      run_chunks(chunks, threads, [&](std::size_t c) {
        zero(partial[c]);
        const std::size_t begin = start + c * batch / chunks;
        const std::size_t end = start + (c + 1) * batch / chunks;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& ex = data[order[i]];
          accumulate_gradient(model, ex.input, ex.label, partial[c]);
        }
      });
      zero(batch_grad);
      const double scale = 1.0 / static_cast<double>(batch);
      for (std::size_t c = 0; c < chunks; ++c) add_scaled(batch_grad, partial[c], scale);
      require(batch_grad.all_finite(), ErrorCode::numeric_error,
              "non-finite gradient in epoch " + std::to_string(epoch));
      adam_step(model.weights, batch_grad, state, options.adam);
    }
    EpochMetrics m = evaluate_with(model, data, threads);
    m.epoch = epoch;
    if (options.on_epoch) options.on_epoch(m);
    result.log.push_back(std::move(m));
  }
  return result;
}

TrainResult train(const ModelConfig& config, std::span<const Example> data, const TrainOptions& options) {
  return train(Model::initialize(config, options.seed), data, options);
}

}  // namespace camscope::nn
