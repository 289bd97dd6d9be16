#pragma once

// Drill-down over one class's CAM matrix: stacked inclusive range filters on
// normalized CAM values, per-feature histograms of the active subset,
// sub-global re-aggregation and per-feature annotations.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "camscope/aggregate.hpp"

namespace camscope::session {

inline constexpr std::size_t kDefaultHistogramBins = 32;

enum class Annotation { interesting, irrelevant };
std::string_view to_string(Annotation a) noexcept;
/// "interesting" | "irrelevant"; "none" (or empty) clears. Anything else is invalid_argument.
std::optional<Annotation> parse_annotation(std::string_view name);

struct FilterStep {
  std::size_t feature_index = 0;
  double lo = -1.0;
  double hi = 1.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const FilterStep&) const = default;
};

struct HistogramView {
  std::size_t feature_index = 0;
  std::vector<double> bin_edges;  // counts.size() + 1, strictly increasing
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max] with a right-inclusive last bin. A
/// constant input collapses to one bin of width 2e-6 centered on the value.
HistogramView histogram_of(std::span<const double> values, std::size_t feature_index, std::size_t bins);

nlohmann::json to_json(const HistogramView& h);
nlohmann::json to_json(const FilterStep& f);

class Session {
 public:
  explicit Session(std::shared_ptr<const agg::CamMatrix> base);

  std::size_t class_index() const { return base_->class_index(); }
  const agg::CamMatrix& base() const { return *base_; }
  const std::vector<FilterStep>& filters() const { return filters_; }
  /// Row indices into the base matrix, ascending.
  const std::vector<std::size_t>& active_rows() const { return active_; }
  std::vector<std::string> active_ids() const;
  const std::map<std::size_t, Annotation>& annotations() const { return annotations_; }

  HistogramView histogram(std::size_t feature_index, std::size_t bins = kDefaultHistogramBins) const;

  /// Pushes a filter. If no active sample would survive, throws
  /// Error(empty_selection) and leaves the session untouched.
  void apply_filter(std::size_t feature_index, double lo, double hi);
  /// No-op on an empty stack.
  void pop_filter();
  /// Clears every filter; annotations are kept.
  void reset();

  void annotate(std::size_t feature_index, std::optional<Annotation> status);

  agg::AggregatedCam subglobal_cam(agg::AggregationMethod agg, agg::VariabilityMethod var) const;

  /// `{ "class_index", "filters": [...], "active_ids": [...], "annotations": [...] }`
  nlohmann::json to_json() const;
  /// Rebuilds a session by replaying an export against the same base matrix.
  static Session replay(std::shared_ptr<const agg::CamMatrix> base, const nlohmann::json& exported);

  bool operator==(const Session& other) const;

 private:
  std::vector<std::size_t> select(std::span<const FilterStep> steps) const;
  void check_feature(std::size_t feature_index) const;

  std::shared_ptr<const agg::CamMatrix> base_;
  std::vector<FilterStep> filters_;
  std::vector<std::size_t> active_;
  std::map<std::size_t, Annotation> annotations_;
};

}  // namespace camscope::session
