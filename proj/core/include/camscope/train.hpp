#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "camscope/nn.hpp"

namespace camscope::nn {

/// A labeled model input. The span must outlive the training call.
struct Example {
  std::span<const double> input;
  std::size_t label = 0;
};

struct ClassMetrics {
  std::size_t support = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean cross-entropy over the dataset after the epoch
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  AdamOptions adam;
  std::uint64_t seed = 0;
  /// Worker threads for per-batch gradient evaluation. Results do not depend
  /// on this value; 0 selects the hardware concurrency.
  std::size_t threads = 1;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochMetrics> log;
};

/// Mini-batch Adam on the mean batch cross-entropy. Batches are drawn from a
/// seeded shuffle each epoch; the run is bit-reproducible for a fixed seed.
TrainResult train(Model initial, std::span<const Example> data, const TrainOptions& options);

/// Convenience: seeded initialization followed by train().
TrainResult train(const ModelConfig& config, std::span<const Example> data, const TrainOptions& options);

/// Confusion-derived metrics for predicted vs. true labels.
EpochMetrics evaluate(const Model& model, std::span<const Example> data);

std::vector<ClassMetrics> classification_report(std::span<const std::size_t> predicted,
                                                std::span<const std::size_t> truth, std::size_t num_classes);

}  // namespace camscope::nn
