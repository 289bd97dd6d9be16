#include "camscope/weights_io.hpp"

#include <cmath>
#include <fstream>

#include "camscope/error.hpp"

namespace camscope::nn {

using nlohmann::json;

json config_to_json(const ModelConfig& config) {
  return json{{"input_length", config.input_length},
              {"conv_channels", config.conv_channels},
              {"kernel_size", config.kernel_size},
              {"stride", config.stride},
              {"num_classes", config.num_classes}};
}

ModelConfig config_from_json(const json& j) {
  try {
    ModelConfig config;
    config.input_length = j.at("input_length").get<std::size_t>();
    config.conv_channels = j.at("conv_channels").get<std::vector<std::size_t>>();
    config.kernel_size = j.at("kernel_size").get<std::size_t>();
    config.stride = j.value("stride", std::size_t{1});
    config.num_classes = j.at("num_classes").get<std::size_t>();
    config.validate();
    return config;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, std::string("invalid model config: ") + e.what());
  }
}

json model_to_json(const Model& model) {
  json tensors = json::object();
  model.weights.for_each_tensor([&](const std::string& name, const TensorShape& shape, std::span<const double> data) {
    tensors[name] = json{{"shape", shape.dims}, {"data", std::vector<double>(data.begin(), data.end())}};
  });
  return json{{"format", kWeightsFormat}, {"config", config_to_json(model.config)}, {"tensors", std::move(tensors)}};
}

Model model_from_json(const json& j) {
  require(j.is_object() && j.value("format", std::string{}) == kWeightsFormat, ErrorCode::parse_error,
          std::string("weight file is not in format ") + kWeightsFormat);
  require(j.contains("config") && j.contains("tensors") && j["tensors"].is_object(), ErrorCode::parse_error,
          "weight file needs 'config' and 'tensors'");
  Model model = Model::zeros(config_from_json(j["config"]));
  const json& tensors = j["tensors"];
  std::size_t seen = 0;
  model.weights.for_each_tensor([&](const std::string& name, const TensorShape& shape, std::span<double> dst) {
    require(tensors.contains(name), ErrorCode::contract_violation, "missing tensor '" + name + "'");
    const json& t = tensors[name];
    std::vector<std::size_t> dims;
    std::vector<double> data;
    try {
      dims = t.at("shape").get<std::vector<std::size_t>>();
      for (const auto& v : t.at("data")) {
        // NaN/Inf have no JSON literal; nlohmann writes them as null.
        require(v.is_number(), ErrorCode::numeric_error, "tensor '" + name + "' holds a non-finite value");
        data.push_back(v.get<double>());
      }
    } catch (const json::exception& e) {
      fail(ErrorCode::parse_error, "tensor '" + name + "': " + e.what());
    }
    require(dims == shape.dims, ErrorCode::contract_violation, "tensor '" + name + "' has the wrong shape");
    require(data.size() == dst.size(), ErrorCode::contract_violation,
            "tensor '" + name + "' has " + std::to_string(data.size()) + " values, expected " +
                std::to_string(dst.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
      require(std::isfinite(data[i]), ErrorCode::numeric_error, "tensor '" + name + "' holds a non-finite value");
      dst[i] = data[i];
    }
    ++seen;
  });
  require(seen == tensors.size(), ErrorCode::contract_violation, "weight file has unexpected extra tensors");
  return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  out << model_to_json(model).dump() << '\n';
  require(static_cast<bool>(out), ErrorCode::io_error, "failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open weight file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace camscope::nn
