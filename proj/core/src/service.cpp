#include "camscope/service.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include "camscope/cam.hpp"

namespace camscope::service {

using nlohmann::json;

namespace {

constexpr std::string_view kDefaultAgg = "mean";
constexpr std::string_view kDefaultVar = "entropy";

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto end = slash == std::string_view::npos ? path.size() : slash;
    if (end > start) parts.push_back(path.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

std::size_t parse_index(std::string_view text, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  require(ec == std::errc{} && ptr == text.data() + text.size() && !text.empty(), ErrorCode::invalid_argument,
          std::string(what) + " '" + std::string(text) + "' is not a non-negative integer");
  return v;
}

std::string_view query_or(const Query& q, const std::string& key, std::string_view fallback) {
  const auto it = q.find(key);
  return it == q.end() ? fallback : std::string_view(it->second);
}

json parse_body(std::string_view body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::invalid_argument, std::string("request body is not JSON: ") + e.what());
  }
}

template <typename T>
T body_field(const json& body, const char* key) {
  require(body.is_object() && body.contains(key), ErrorCode::invalid_argument,
          std::string("request body needs '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::invalid_argument, std::string("request field '") + key + "' has the wrong type");
  }
}

Response ok(const json& j, int status = 200) { return Response{status, j.dump()}; }

}  // namespace

json ApiError::to_json() const {
  return json{{"code", code}, {"message", message}, {"http_status", http_status}};
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::not_found:
    case ErrorCode::index_out_of_range:
    case ErrorCode::empty_class: return 404;
    case ErrorCode::unknown_method:
    case ErrorCode::invalid_argument:
    case ErrorCode::parse_error:
    case ErrorCode::contract_violation:
    case ErrorCode::empty_input: return 400;
    case ErrorCode::empty_selection: return 422;
    case ErrorCode::no_model: return 409;
    case ErrorCode::numeric_error:
    case ErrorCode::unsupported_format:
    case ErrorCode::malformed_packet:
    case ErrorCode::io_error: return 500;
  }
  return 500;
}

ApiError to_api_error(const Error& e) {
  return ApiError{std::string(to_string(e.code())), e.what(), http_status(e.code())};
}

// ---------------------------------------------------------------------------

Service::Service(nn::Model model, data::Dataset dataset) {
  model.config.validate();
  model.weights.check_shapes(model.config);
  require(dataset.input_length == model.config.input_length, ErrorCode::contract_violation,
          "dataset input length " + std::to_string(dataset.input_length) + " does not match model input length " +
              std::to_string(model.config.input_length));
  auto st = std::make_shared<State>();
  st->model = std::move(model);
  st->dataset = std::move(dataset);
  for (std::size_t i = 0; i < st->dataset.samples.size(); ++i) {
    const auto& id = st->dataset.samples[i].sample_id;
    require(st->sample_index.emplace(id, i).second, ErrorCode::contract_violation, "duplicate sample id '" + id + "'");
  }
  const auto views = st->dataset.views();
  for (auto& [c, matrix] : agg::collect_all_cams(st->model, views)) {
    std::string name = c < st->dataset.class_names.size() ? st->dataset.class_names[c] : "class-" + std::to_string(c);
    st->classes.emplace(c, ClassEntry{std::move(name), std::make_shared<const agg::CamMatrix>(std::move(matrix))});
  }
  state_ = std::move(st);
}

const Service::State& Service::state() const {
  require(state_ != nullptr, ErrorCode::no_model, "no model loaded");
  return *state_;
}

const Service::ClassEntry& Service::class_entry(std::size_t class_index) const {
  const auto& st = state();
  require(class_index < st.model.config.num_classes, ErrorCode::not_found,
          "unknown class " + std::to_string(class_index));
  const auto it = st.classes.find(class_index);
  require(it != st.classes.end(), ErrorCode::empty_class,
          "no sample is predicted as class " + std::to_string(class_index));
  return it->second;
}

Service::SessionSlot& Service::slot(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  const auto it = sessions_.find(session_id);
  require(it != sessions_.end(), ErrorCode::not_found, "unknown session '" + session_id + "'");
  return *it->second;
}

json Service::classes() const {
  const auto& st = state();
  json out = json::array();
  for (const auto& [c, entry] : st.classes)
    out.push_back({{"class_index", c}, {"name", entry.name}, {"n_samples", entry.matrix->rows()}});
  return out;
}

json Service::class_cam(std::size_t class_index, std::string_view agg, std::string_view var) const {
  const auto a = agg::parse_aggregation(agg);
  const auto v = agg::parse_variability(var);
  const auto& entry = class_entry(class_index);
  const auto key = std::make_tuple(class_index, a, v);
  {
    std::lock_guard lock(cam_cache_mutex_);
    if (const auto it = cam_cache_.find(key); it != cam_cache_.end()) return it->second;
  }
  auto cam = agg::to_json(agg::build_aggregated_cam(*entry.matrix, a, v));
  std::lock_guard lock(cam_cache_mutex_);
  return cam_cache_.emplace(key, std::move(cam)).first->second;
}

json Service::histogram(std::size_t class_index, std::size_t feature, const std::optional<std::string>& session_id,
                        std::size_t bins) const {
  const auto& entry = class_entry(class_index);
  require(feature < entry.matrix->columns(), ErrorCode::not_found, "unknown feature " + std::to_string(feature));
  if (session_id) {
    auto& s = slot(*session_id);
    std::lock_guard lock(s.mutex);
    require(s.session.class_index() == class_index, ErrorCode::invalid_argument,
            "session '" + *session_id + "' belongs to class " + std::to_string(s.session.class_index()));
    return session::to_json(s.session.histogram(feature, bins));
  }
  return session::to_json(session::Session(entry.matrix).histogram(feature, bins));
}

json Service::sample_cam(std::string_view sample_id) const {
  const auto& st = state();
  const auto it = st.sample_index.find(sample_id);
  require(it != st.sample_index.end(), ErrorCode::not_found, "unknown sample '" + std::string(sample_id) + "'");
  const auto& sample = st.dataset.samples[it->second];
  return cam::to_json(cam::cam_for_prediction(st.model, sample.input, sample.sample_id));
}

std::string Service::create_session(std::size_t class_index) {
  const auto& entry = class_entry(class_index);
  std::unique_lock lock(sessions_mutex_);
  std::string id = "s" + std::to_string(next_session_++);
  sessions_.emplace(id, std::make_unique<SessionSlot>(session::Session(entry.matrix)));
  return id;
}

namespace {

json with_cam(const session::Session& s, agg::AggregationMethod a, agg::VariabilityMethod v) {
  auto out = s.to_json();
  out["cam"] = agg::to_json(s.subglobal_cam(a, v));
  return out;
}

}  // namespace

json Service::add_filter(const std::string& session_id, std::size_t feature, double lo, double hi,
                         std::string_view agg, std::string_view var) {
  const auto a = agg::parse_aggregation(agg);
  const auto v = agg::parse_variability(var);
  auto& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  s.session.apply_filter(feature, lo, hi);
  return with_cam(s.session, a, v);
}

json Service::pop_filter(const std::string& session_id, std::string_view agg, std::string_view var) {
  const auto a = agg::parse_aggregation(agg);
  const auto v = agg::parse_variability(var);
  auto& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  s.session.pop_filter();
  return with_cam(s.session, a, v);
}

json Service::session_cam(const std::string& session_id, std::string_view agg, std::string_view var) const {
  const auto a = agg::parse_aggregation(agg);
  const auto v = agg::parse_variability(var);
  auto& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  return agg::to_json(s.session.subglobal_cam(a, v));
}

json Service::annotate(const std::string& session_id, std::size_t feature, std::string_view status) {
  const auto parsed = session::parse_annotation(status);
  auto& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  s.session.annotate(feature, parsed);
  return s.session.to_json();
}

json Service::session_export(const std::string& session_id) const {
  auto& s = slot(session_id);
  std::lock_guard lock(s.mutex);
  return s.session.to_json();
}

// ---------------------------------------------------------------------------

Response Service::handle(std::string_view method, std::string_view path, const Query& query, std::string_view body) {
  try {
    return route(method, path, query, body);
  } catch (const Error& e) {
    const auto err = to_api_error(e);
    return Response{err.http_status, err.to_json().dump()};
  } catch (const std::exception& e) {
    const ApiError err{"internal_error", e.what(), 500};
    return Response{err.http_status, err.to_json().dump()};
  }
}

Response Service::route(std::string_view method, std::string_view path, const Query& query, std::string_view body) {
  const auto p = split_path(path);
  const auto n = p.size();
  const auto is = [&](std::size_t i, std::string_view s) { return i < n && p[i] == s; };
  require(n >= 2 && is(0, "api"), ErrorCode::not_found, "no route for " + std::string(path));

  if (method == "GET") {
    if (n == 2 && is(1, "classes")) return ok(classes());
    if (n == 4 && is(1, "classes") && is(3, "cam")) {
      return ok(class_cam(parse_index(p[2], "class"), query_or(query, "agg", kDefaultAgg),
                          query_or(query, "var", kDefaultVar)));
    }
    if (n == 6 && is(1, "classes") && is(3, "features") && is(5, "histogram")) {
      std::optional<std::string> session_id;
      if (const auto it = query.find("session"); it != query.end() && !it->second.empty()) session_id = it->second;
      const std::size_t bins = query.contains("bins") ? parse_index(query.at("bins"), "bins")
                                                      : session::kDefaultHistogramBins;
      return ok(histogram(parse_index(p[2], "class"), parse_index(p[4], "feature"), session_id, bins));
    }
    if (n == 4 && is(1, "samples") && is(3, "cam")) return ok(sample_cam(p[2]));
    if (n == 3 && is(1, "sessions")) return ok(session_export(std::string(p[2])));
    if (n == 4 && is(1, "sessions") && is(3, "cam")) {
      return ok(session_cam(std::string(p[2]), query_or(query, "agg", kDefaultAgg), query_or(query, "var", kDefaultVar)));
    }
  } else if (method == "POST") {
    if (n == 2 && is(1, "sessions")) {
      const auto j = parse_body(body);
      const auto id = create_session(body_field<std::size_t>(j, "class_index"));
      return ok(json{{"session_id", id}}, 201);
    }
    if (n == 4 && is(1, "sessions") && is(3, "filters")) {
      const auto j = parse_body(body);
      return ok(add_filter(std::string(p[2]), body_field<std::size_t>(j, "feature_index"), body_field<double>(j, "lo"),
                           body_field<double>(j, "hi"), query_or(query, "agg", kDefaultAgg),
                           query_or(query, "var", kDefaultVar)));
    }
  } else if (method == "DELETE") {
    if (n == 5 && is(1, "sessions") && is(3, "filters") && is(4, "last")) {
      return ok(pop_filter(std::string(p[2]), query_or(query, "agg", kDefaultAgg), query_or(query, "var", kDefaultVar)));
    }
  } else if (method == "PUT") {
    if (n == 5 && is(1, "sessions") && is(3, "annotations")) {
      const auto j = parse_body(body);
      const auto& status = j.is_object() && j.contains("status") && j["status"].is_null()
                               ? std::string{}
                               : body_field<std::string>(j, "status");
      return ok(annotate(std::string(p[2]), parse_index(p[4], "feature"), status));
    }
  }
  fail(ErrorCode::not_found, "no route for " + std::string(method) + " " + std::string(path));
}

}  // namespace camscope::service
