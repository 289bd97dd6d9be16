#include <random>

#include <benchmark/benchmark.h>

#include "camscope/aggregate.hpp"
#include "camscope/cam.hpp"
#include "camscope/nn.hpp"
#include "camscope/session.hpp"

using namespace camscope;

namespace {

nn::ModelConfig packet_config(std::size_t length) {
  nn::ModelConfig cfg;
  cfg.input_length = length;
  cfg.conv_channels = {16, 32};
  cfg.kernel_size = 5;
  cfg.num_classes = 4;
  return cfg;
}

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

agg::CamMatrix random_matrix(std::size_t rows, std::size_t cols) {
  agg::CamMatrix m(0, cols);
  for (std::size_t i = 0; i < rows; ++i) m.append("r" + std::to_string(i), uniform(cols, i, -1.0, 1.0));
  return m;
}

void BM_Forward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto model = nn::Model::initialize(packet_config(len), 1);
  const auto x = uniform(len, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(model, x));
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(1500);

void BM_ComputeCam(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto model = nn::Model::initialize(packet_config(len), 1);
  const auto x = uniform(len, 3);
  for (auto _ : state) benchmark::DoNotOptimize(cam::cam_for_prediction(model, x));
}
BENCHMARK(BM_ComputeCam)->Arg(128)->Arg(1500);

void BM_Aggregate(benchmark::State& state) {
  const auto m = random_matrix(static_cast<std::size_t>(state.range(0)), 1500);
  const auto method = static_cast<agg::AggregationMethod>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(agg::build_aggregated_cam(m, method, agg::VariabilityMethod::entropy));
}
BENCHMARK(BM_Aggregate)
    ->ArgsProduct({{100, 1000}, {static_cast<int>(agg::AggregationMethod::mean),
                                 static_cast<int>(agg::AggregationMethod::median),
                                 static_cast<int>(agg::AggregationMethod::kde_mode)}})
    ->Unit(benchmark::kMillisecond);

void BM_KdeMode(benchmark::State& state) {
  const auto v = uniform(static_cast<std::size_t>(state.range(0)), 4, -1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(agg::kde_mode(v));
}
BENCHMARK(BM_KdeMode)->Arg(100)->Arg(1000)->Arg(10000);

void BM_FilterAndReaggregate(benchmark::State& state) {
  const auto m = std::make_shared<const agg::CamMatrix>(random_matrix(1000, 1500));
  for (auto _ : state) {
    session::Session s(m);
    s.apply_filter(10, -0.5, 0.5);
    benchmark::DoNotOptimize(s.subglobal_cam(agg::AggregationMethod::mean, agg::VariabilityMethod::entropy));
  }
}
BENCHMARK(BM_FilterAndReaggregate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
