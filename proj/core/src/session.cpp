#include "camscope/session.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "camscope/error.hpp"

namespace camscope::session {

std::string_view to_string(Annotation a) noexcept {
  return a == Annotation::interesting ? "interesting" : "irrelevant";
}

std::optional<Annotation> parse_annotation(std::string_view name) {
  if (name == "interesting") return Annotation::interesting;
  if (name == "irrelevant") return Annotation::irrelevant;
  if (name.empty() || name == "none") return std::nullopt;
  fail(ErrorCode::invalid_argument, "unknown annotation status '" + std::string(name) + "'");
}

HistogramView histogram_of(std::span<const double> values, std::size_t feature_index, std::size_t bins) {
  require(!values.empty(), ErrorCode::empty_selection, "histogram of an empty sample set");
  require(bins >= 1, ErrorCode::invalid_argument, "histogram needs at least one bin");
  HistogramView h;
  h.feature_index = feature_index;
  const auto [mn, mx] = std::ranges::minmax(values);
  if (!(mx > mn)) {
    constexpr double half_width = 1e-6;
    h.bin_edges = {mn - half_width, mn + half_width};
    h.counts = {values.size()};
    return h;
  }
  h.counts.assign(bins, 0);
  h.bin_edges.resize(bins + 1);
  const double width = (mx - mn) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) h.bin_edges[b] = mn + width * static_cast<double>(b);
  h.bin_edges[bins] = mx;
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - mn) / (mx - mn) * static_cast<double>(bins));
    h.counts[std::min(b, bins - 1)] += 1;
  }
  return h;
}

nlohmann::json to_json(const HistogramView& h) {
  return nlohmann::json{{"feature_index", h.feature_index}, {"bin_edges", h.bin_edges}, {"counts", h.counts}};
}

nlohmann::json to_json(const FilterStep& f) {
  return nlohmann::json{{"feature_index", f.feature_index}, {"lo", f.lo}, {"hi", f.hi}};
}

// ---------------------------------------------------------------------------

Session::Session(std::shared_ptr<const agg::CamMatrix> base) : base_(std::move(base)) {
  require(base_ != nullptr && !base_->empty(), ErrorCode::empty_input, "session needs a non-empty CAM matrix");
  active_ = select({});
}

std::vector<std::size_t> Session::select(std::span<const FilterStep> steps) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < base_->rows(); ++i) {
    const bool keep = std::ranges::all_of(steps, [&](const FilterStep& s) { return s.contains(base_->at(i, s.feature_index)); });
    if (keep) rows.push_back(i);
  }
  return rows;
}

void Session::check_feature(std::size_t feature_index) const {
  require(feature_index < base_->columns(), ErrorCode::index_out_of_range,
          "feature " + std::to_string(feature_index) + " out of range for " + std::to_string(base_->columns()) +
              " features");
}

std::vector<std::string> Session::active_ids() const {
  std::vector<std::string> ids;
  ids.reserve(active_.size());
  for (std::size_t r : active_) ids.push_back(base_->sample_ids()[r]);
  return ids;
}

HistogramView Session::histogram(std::size_t feature_index, std::size_t bins) const {
  check_feature(feature_index);
  return histogram_of(base_->column(feature_index, active_), feature_index, bins);
}

void Session::apply_filter(std::size_t feature_index, double lo, double hi) {
  check_feature(feature_index);
  require(std::isfinite(lo) && std::isfinite(hi), ErrorCode::invalid_argument, "filter bounds must be finite");
  require(lo <= hi, ErrorCode::invalid_argument, "filter range needs lo <= hi");
  const FilterStep step{feature_index, lo, hi};
  std::vector<std::size_t> next;
  std::ranges::copy_if(active_, std::back_inserter(next),
                       [&](std::size_t r) { return step.contains(base_->at(r, feature_index)); });
  require(!next.empty(), ErrorCode::empty_selection,
          "filter on feature " + std::to_string(feature_index) + " leaves no samples");
  filters_.push_back(step);
  active_ = std::move(next);
}

void Session::pop_filter() {
  if (filters_.empty()) return;
  filters_.pop_back();
  active_ = select(filters_);
}

void Session::reset() {
  filters_.clear();
  active_ = select({});
}

void Session::annotate(std::size_t feature_index, std::optional<Annotation> status) {
  check_feature(feature_index);
  if (status) {
    annotations_[feature_index] = *status;
  } else {
    annotations_.erase(feature_index);
  }
}

agg::AggregatedCam Session::subglobal_cam(agg::AggregationMethod agg, agg::VariabilityMethod var) const {
  require(!active_.empty(), ErrorCode::empty_selection, "no active samples");
  return agg::build_aggregated_cam(*base_, active_, agg, var);
}

nlohmann::json Session::to_json() const {
  nlohmann::json filters = nlohmann::json::array();
  for (const auto& f : filters_) filters.push_back(session::to_json(f));
  nlohmann::json annotations = nlohmann::json::array();
  for (const auto& [feature, status] : annotations_)
    annotations.push_back({{"feature_index", feature}, {"status", to_string(status)}});
  return nlohmann::json{{"class_index", class_index()},
                        {"filters", std::move(filters)},
                        {"active_ids", active_ids()},
                        {"annotations", std::move(annotations)}};
}

Session Session::replay(std::shared_ptr<const agg::CamMatrix> base, const nlohmann::json& exported) {
  Session s(std::move(base));
  try {
    require(exported.at("class_index").get<std::size_t>() == s.class_index(), ErrorCode::contract_violation,
            "session export belongs to another class");
    for (const auto& f : exported.at("filters"))
      s.apply_filter(f.at("feature_index").get<std::size_t>(), f.at("lo").get<double>(), f.at("hi").get<double>());
    for (const auto& a : exported.value("annotations", nlohmann::json::array()))
      s.annotate(a.at("feature_index").get<std::size_t>(), parse_annotation(a.at("status").get<std::string>()));
    if (exported.contains("active_ids")) {
      require(exported["active_ids"].get<std::vector<std::string>>() == s.active_ids(),
              ErrorCode::contract_violation, "replayed session selects different samples than the export");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("invalid session export: ") + e.what());
  }
  return s;
}

bool Session::operator==(const Session& other) const {
  return base_ == other.base_ && filters_ == other.filters_ && active_ == other.active_ &&
         annotations_ == other.annotations_;
}

}  // namespace camscope::session
