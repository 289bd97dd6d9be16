#pragma once

// Per-class aggregation of local CAMs into a global explanation: one impact
// value and one variability value per input position.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "camscope/cam.hpp"
#include "camscope/nn.hpp"

namespace camscope::agg {

enum class AggregationMethod { mean, median, kde_mode };
enum class VariabilityMethod { variance, stddev, entropy, gini };

std::string_view to_string(AggregationMethod m) noexcept;
std::string_view to_string(VariabilityMethod m) noexcept;
/// Lowercase names only; anything else throws Error(unknown_method).
AggregationMethod parse_aggregation(std::string_view name);
VariabilityMethod parse_variability(std::string_view name);

/// Stacked normalized CAMs of one predicted class, one row per sample.
class CamMatrix {
 public:
  CamMatrix() = default;
  CamMatrix(std::size_t class_index, std::size_t columns) : class_index_(class_index), columns_(columns) {}

  /// Rows must have `columns()` entries in [-1, 1].
  void append(std::string sample_id, std::span<const double> normalized_row);

  std::size_t class_index() const { return class_index_; }
  std::size_t rows() const { return sample_ids_.size(); }
  std::size_t columns() const { return columns_; }
  bool empty() const { return sample_ids_.empty(); }

  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * columns_, columns_}; }
  double at(std::size_t i, std::size_t j) const { return values_[i * columns_ + j]; }
  std::vector<double> column(std::size_t j) const;
  std::vector<double> column(std::size_t j, std::span<const std::size_t> rows) const;

 private:
  std::size_t class_index_ = 0;
  std::size_t columns_ = 0;
  std::vector<std::string> sample_ids_;
  std::vector<double> values_;
};

struct SampleView {
  std::string_view id;
  std::span<const double> input;
};

/// Local CAMs of the samples predicted as `class_index`, in input order.
/// Throws Error(empty_class) when no sample is predicted as that class.
CamMatrix collect_cams(const nn::Model& model, std::span<const SampleView> samples, std::size_t class_index);

/// One forward pass per sample, grouped by predicted class. Classes with no
/// predicted sample are absent from the map.
std::map<std::size_t, CamMatrix> collect_all_cams(const nn::Model& model, std::span<const SampleView> samples);

// ---------------------------------------------------------------------------
// Column reductions

inline constexpr std::size_t kDefaultKdeGridPoints = 512;
inline constexpr std::size_t kEntropyBins = 16;

/// Silverman's rule: 0.9 * min(sd, IQR / 1.34) * n^(-1/5), sample sd and
/// linearly interpolated quartiles. Zero for n < 2.
double silverman_bandwidth(std::span<const double> values);

/// Argmax of a Gaussian KDE on a uniform grid over [min, max]. A degenerate
/// bandwidth (or min == max) yields the most frequent value instead.
double kde_mode(std::span<const double> values, std::size_t grid_points = kDefaultKdeGridPoints);

/// Lower-middle element for even counts.
double lower_median(std::span<const double> values);

double aggregate_column(std::span<const double> column, AggregationMethod method,
                        std::size_t grid_points = kDefaultKdeGridPoints);

/// Min-max rescale to [0, 1], then the chosen dispersion scaled into [0, 1].
/// Constant columns give 0 for every method.
double column_variability(std::span<const double> column, VariabilityMethod method);

std::vector<double> aggregate_impact(const CamMatrix& matrix, AggregationMethod method);
std::vector<double> variability(const CamMatrix& matrix, VariabilityMethod method);

struct AggregatedCam {
  std::size_t class_index = 0;
  std::size_t n_samples = 0;
  AggregationMethod agg_method = AggregationMethod::mean;
  VariabilityMethod var_method = VariabilityMethod::entropy;
  std::vector<double> impact;
  std::vector<double> variability;

  bool operator==(const AggregatedCam&) const = default;
};

AggregatedCam build_aggregated_cam(const CamMatrix& matrix, AggregationMethod agg, VariabilityMethod var);

/// Aggregation restricted to a subset of matrix rows (drill-down).
AggregatedCam build_aggregated_cam(const CamMatrix& matrix, std::span<const std::size_t> rows,
                                   AggregationMethod agg, VariabilityMethod var);

/// `{ "class_index", "n_samples", "agg_method", "var_method", "impact", "variability" }`
nlohmann::json to_json(const AggregatedCam& cam);
AggregatedCam aggregated_cam_from_json(const nlohmann::json& j);

}  // namespace camscope::agg
