#pragma once

// JSON API over a loaded model and dataset. Routing is transport-independent
// (Service::handle); http_server.hpp binds it to an HTTP listener.

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <tuple>

#include <nlohmann/json.hpp>

#include "camscope/aggregate.hpp"
#include "camscope/dataset.hpp"
#include "camscope/error.hpp"
#include "camscope/nn.hpp"
#include "camscope/session.hpp"

namespace camscope::service {

struct ApiError {
  std::string code;
  std::string message;
  int http_status = 500;

  nlohmann::json to_json() const;
};

int http_status(ErrorCode code) noexcept;
ApiError to_api_error(const Error& e);

struct Response {
  int status = 200;
  std::string body;  // JSON document
};

using Query = std::map<std::string, std::string>;

class Service {
 public:
  /// No model loaded: every data endpoint answers 409.
  Service() = default;
  /// Computes and caches the CAM matrix of every predicted class.
  Service(nn::Model model, data::Dataset dataset);

  bool loaded() const { return state_ != nullptr; }

  nlohmann::json classes() const;
  nlohmann::json class_cam(std::size_t class_index, std::string_view agg, std::string_view var) const;
  nlohmann::json histogram(std::size_t class_index, std::size_t feature, const std::optional<std::string>& session_id,
                           std::size_t bins) const;
  nlohmann::json sample_cam(std::string_view sample_id) const;

  std::string create_session(std::size_t class_index);
  /// Filter mutations answer with the session export plus its sub-global
  /// CAM under "cam", so a client can re-render from a single request.
  nlohmann::json add_filter(const std::string& session_id, std::size_t feature, double lo, double hi,
                            std::string_view agg = "mean", std::string_view var = "entropy");
  nlohmann::json pop_filter(const std::string& session_id, std::string_view agg = "mean",
                            std::string_view var = "entropy");
  nlohmann::json session_cam(const std::string& session_id, std::string_view agg, std::string_view var) const;
  nlohmann::json annotate(const std::string& session_id, std::size_t feature, std::string_view status);
  nlohmann::json session_export(const std::string& session_id) const;

  /// Routes one request; never throws. Errors come back as ApiError bodies.
  Response handle(std::string_view method, std::string_view path, const Query& query, std::string_view body);

 private:
  struct ClassEntry {
    std::string name;
    std::shared_ptr<const agg::CamMatrix> matrix;
  };
  struct State {
    nn::Model model;
    data::Dataset dataset;
    std::map<std::size_t, ClassEntry> classes;
    std::map<std::string, std::size_t, std::less<>> sample_index;
  };
  struct SessionSlot {
    mutable std::mutex mutex;
    session::Session session;
    explicit SessionSlot(session::Session s) : session(std::move(s)) {}
  };

  const State& state() const;
  const ClassEntry& class_entry(std::size_t class_index) const;
  SessionSlot& slot(const std::string& session_id) const;
  Response route(std::string_view method, std::string_view path, const Query& query, std::string_view body);

  std::shared_ptr<const State> state_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<SessionSlot>> sessions_;
  std::size_t next_session_ = 1;
  // Global class CAMs never change once loaded; kde_mode is slow enough to keep them.
  mutable std::mutex cam_cache_mutex_;
  mutable std::map<std::tuple<std::size_t, agg::AggregationMethod, agg::VariabilityMethod>, nlohmann::json>
      cam_cache_;
};

}  // namespace camscope::service
