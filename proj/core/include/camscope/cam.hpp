#pragma once

// Local class activation maps: the last conv layer's feature maps weighted by
// one class's dense weights, one value per input position.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "camscope/nn.hpp"

namespace camscope::cam {

struct LocalCam {
  std::string sample_id;
  std::size_t class_index = 0;
  std::vector<double> raw;
  std::vector<double> normalized;  // raw / max|raw|, or zeros when raw is all zero
  bool all_zero = false;

  bool operator==(const LocalCam&) const = default;
};

/// Symmetric max-abs scaling into [-1, 1]. An all-zero input stays all zero.
std::vector<double> normalize(std::span<const double> raw);

/// raw[t] = sum_k W[class][k] * A_k(t). The dense bias is not part of the map.
std::vector<double> class_activation(const nn::DenseLayer& dense, const nn::FeatureMaps& last_maps,
                                     std::size_t class_index);

LocalCam compute_cam(const nn::Model& model, std::span<const double> sample, std::size_t class_index,
                     std::string sample_id = {});

/// compute_cam for the model's own prediction.
LocalCam cam_for_prediction(const nn::Model& model, std::span<const double> sample, std::string sample_id = {});

/// `{ "sample_id", "class_index", "raw", "normalized", "all_zero" }`
nlohmann::json to_json(const LocalCam& cam);

}  // namespace camscope::cam
