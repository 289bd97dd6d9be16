#include "camscope/cam.hpp"

#include <algorithm>
#include <cmath>

#include "camscope/error.hpp"

namespace camscope::cam {

std::vector<double> normalize(std::span<const double> raw) {
  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, std::abs(v));
  std::vector<double> out(raw.size(), 0.0);
  if (peak > 0.0) {
    for (std::size_t t = 0; t < raw.size(); ++t) out[t] = std::clamp(raw[t] / peak, -1.0, 1.0);
  }
  return out;
}

std::vector<double> class_activation(const nn::DenseLayer& dense, const nn::FeatureMaps& last_maps,
                                     std::size_t class_index) {
  require(class_index < dense.classes, ErrorCode::index_out_of_range,
          "class " + std::to_string(class_index) + " out of range for " + std::to_string(dense.classes) +
              " classes");
  require(last_maps.channels() == dense.inputs, ErrorCode::contract_violation,
          "feature map count does not match the dense layer");
  std::vector<double> raw(last_maps.length(), 0.0);
  for (std::size_t k = 0; k < dense.inputs; ++k) {
    const double w = dense.w(class_index, k);
    if (w == 0.0) continue;
    const auto map = last_maps.channel(k);
    for (std::size_t t = 0; t < raw.size(); ++t) raw[t] += w * map[t];
  }
  return raw;
}

LocalCam compute_cam(const nn::Model& model, std::span<const double> sample, std::size_t class_index,
                     std::string sample_id) {
  require(class_index < model.config.num_classes, ErrorCode::index_out_of_range,
          "class " + std::to_string(class_index) + " out of range");
  const auto fwd = nn::forward(model, sample);
  LocalCam cam;
  cam.sample_id = std::move(sample_id);
  cam.class_index = class_index;
  cam.raw = class_activation(model.weights.dense, fwd.last_feature_maps(), class_index);
  cam.normalized = normalize(cam.raw);
  cam.all_zero = std::ranges::all_of(cam.raw, [](double v) { return v == 0.0; });
  return cam;
}

LocalCam cam_for_prediction(const nn::Model& model, std::span<const double> sample, std::string sample_id) {
  const auto fwd = nn::forward(model, sample);
  const std::size_t predicted = nn::argmax(fwd.probabilities);
  LocalCam cam;
  cam.sample_id = std::move(sample_id);
  cam.class_index = predicted;
  cam.raw = class_activation(model.weights.dense, fwd.last_feature_maps(), predicted);
  cam.normalized = normalize(cam.raw);
  cam.all_zero = std::ranges::all_of(cam.raw, [](double v) { return v == 0.0; });
  return cam;
}

nlohmann::json to_json(const LocalCam& cam) {
  return nlohmann::json{{"sample_id", cam.sample_id},
                        {"class_index", cam.class_index},
                        {"raw", cam.raw},
                        {"normalized", cam.normalized},
                        {"all_zero", cam.all_zero}};
}

}  // namespace camscope::cam
