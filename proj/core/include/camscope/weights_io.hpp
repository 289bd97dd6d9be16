#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "camscope/nn.hpp"

namespace camscope::nn {

inline constexpr const char* kWeightsFormat = "camscope-weights-v1";

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

/// `{ "format": "camscope-weights-v1", "config": {...}, "tensors": { name: { "shape", "data" } } }`
nlohmann::json model_to_json(const Model& model);

/// Validates the format tag, tensor shapes against the config and rejects
/// non-finite values (parse_error / contract_violation / numeric_error).
Model model_from_json(const nlohmann::json& j);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace camscope::nn
