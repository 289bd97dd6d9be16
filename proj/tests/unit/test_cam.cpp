#include <cmath>
#include <random>

#include <doctest.h>

#include "camscope/cam.hpp"
#include "camscope/error.hpp"
#include "test_support.hpp"

using namespace camscope;
using doctest::Approx;

namespace {

double max_abs(std::span<const double> v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("zero class weights give a zero map") {
  auto model = testing::random_model(testing::small_config(), 1);
  for (std::size_t k = 0; k < 8; ++k) model.weights.dense.w(1, k) = 0.0;
  std::mt19937_64 rng(1);
  const auto cam = cam::compute_cam(model, testing::random_signal(32, rng), 1, "x");
  CHECK(cam.all_zero);
  for (double v : cam.raw) CHECK(v == 0.0);
  for (double v : cam.normalized) CHECK(v == 0.0);
}

TEST_CASE("single map with unit weight is the map itself") {
  auto cfg = testing::small_config(32, {3, 1}, 2);
  auto model = testing::random_model(cfg, 2);
  model.weights.dense.w(0, 0) = 1.0;
  std::mt19937_64 rng(2);
  const auto x = testing::random_signal(32, rng);
  const auto fwd = nn::forward(model, x);
  const auto cam = cam::compute_cam(model, x, 0);
  const auto map = fwd.last_feature_maps().channel(0);
  CHECK(cam.raw == std::vector<double>(map.begin(), map.end()));
}

TEST_CASE("mean of the raw map plus bias is the logit") {
  std::mt19937_64 rng(3);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto model = testing::random_model(testing::small_config(), seed, 0.5);
    const auto x = testing::random_signal(32, rng);
    const auto fwd = nn::forward(model, x);
    for (std::size_t c = 0; c < 3; ++c) {
      const auto cam = cam::compute_cam(model, x, c);
      double sum = 0;
      for (double v : cam.raw) sum += v;
      CHECK(std::abs(sum / 32.0 + model.weights.dense.bias[c] - fwd.logits[c]) <= 1e-5);
    }
  }
}

TEST_CASE("normalization") {
  const auto n = cam::normalize(std::vector<double>{2, -4, 1});
  CHECK(n == std::vector<double>{0.5, -1, 0.25});
  CHECK(cam::normalize(n) == n);
  CHECK(cam::normalize(std::vector<double>{0, 0}) == std::vector<double>{0, 0});

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto raw = testing::random_signal(40, rng, -3, 3);
    const auto once = cam::normalize(raw);
    CHECK(max_abs(once) == 1.0);
    CHECK(cam::normalize(once) == once);
  }
}

TEST_CASE("scaling class weights scales raw and keeps normalized") {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto model = testing::random_model(testing::small_config(), seed);
    const auto x = testing::random_signal(32, rng);
    const auto base = cam::compute_cam(model, x, 2);
    REQUIRE_FALSE(base.all_zero);
    for (double alpha : {2.0, 0.25, -8.0}) {
      auto scaled = model;
      for (std::size_t k = 0; k < 8; ++k) scaled.weights.dense.w(2, k) *= alpha;
      const auto cam = cam::compute_cam(scaled, x, 2);
      for (std::size_t t = 0; t < 32; ++t) CHECK(cam.raw[t] == alpha * base.raw[t]);
      if (alpha > 0) {
        CHECK(cam.normalized == base.normalized);
      } else {
        for (std::size_t t = 0; t < 32; ++t) CHECK(cam.normalized[t] == -base.normalized[t]);
      }
    }
  }
}

TEST_CASE("cam for the predicted class") {
  const auto zero = nn::Model::zeros(testing::small_config(16, {2}, 2));
  const auto z = cam::cam_for_prediction(zero, std::vector<double>(16, 0.3), "z");
  CHECK(z.class_index == 0);
  CHECK(z.all_zero);
  CHECK(z.sample_id == "z");

  std::mt19937_64 rng(6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto model = testing::random_model(testing::small_config(), seed);
    const auto x = testing::random_signal(32, rng);
    const auto direct = cam::compute_cam(model, x, nn::predict(model, x).label, "s");
    CHECK(cam::cam_for_prediction(model, x, "s") == direct);
    CHECK(cam::cam_for_prediction(model, x, "s") == cam::cam_for_prediction(model, x, "s"));
  }
}

TEST_CASE("argument errors") {
  const auto model = testing::random_model(testing::small_config(), 1);
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  CHECK(code([&] { cam::compute_cam(model, std::vector<double>(32), 3); }) == ErrorCode::index_out_of_range);
  CHECK(code([&] { cam::compute_cam(model, std::vector<double>(31), 0); }) == ErrorCode::contract_violation);
}

TEST_CASE("json record") {
  const auto model = testing::random_model(testing::small_config(), 7);
  const auto j = cam::to_json(cam::compute_cam(model, std::vector<double>(32, 0.5), 1, "abc"));
  CHECK(j["sample_id"] == "abc");
  CHECK(j["class_index"] == 1);
  CHECK(j["raw"].size() == 32);
  CHECK(j["normalized"].size() == 32);
  CHECK(j["all_zero"].is_boolean());
}
