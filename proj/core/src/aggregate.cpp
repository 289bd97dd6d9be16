#include "camscope/aggregate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "camscope/error.hpp"

namespace camscope::agg {

std::string_view to_string(AggregationMethod m) noexcept {
  switch (m) {
    case AggregationMethod::mean: return "mean";
    case AggregationMethod::median: return "median";
    case AggregationMethod::kde_mode: return "kde_mode";
  }
  return "mean";
}

std::string_view to_string(VariabilityMethod m) noexcept {
  switch (m) {
    case VariabilityMethod::variance: return "variance";
    case VariabilityMethod::stddev: return "stddev";
    case VariabilityMethod::entropy: return "entropy";
    case VariabilityMethod::gini: return "gini";
  }
  return "entropy";
}

AggregationMethod parse_aggregation(std::string_view name) {
  for (auto m : {AggregationMethod::mean, AggregationMethod::median, AggregationMethod::kde_mode})
    if (name == to_string(m)) return m;
  fail(ErrorCode::unknown_method, "unknown aggregation method '" + std::string(name) + "'");
}

VariabilityMethod parse_variability(std::string_view name) {
  for (auto m : {VariabilityMethod::variance, VariabilityMethod::stddev, VariabilityMethod::entropy,
                 VariabilityMethod::gini})
    if (name == to_string(m)) return m;
  fail(ErrorCode::unknown_method, "unknown variability method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

void CamMatrix::append(std::string sample_id, std::span<const double> normalized_row) {
  require(normalized_row.size() == columns_, ErrorCode::contract_violation,
          "CAM row has " + std::to_string(normalized_row.size()) + " entries, matrix has " +
              std::to_string(columns_) + " columns");
  require(std::ranges::all_of(normalized_row, [](double v) { return v >= -1.0 && v <= 1.0; }),
          ErrorCode::contract_violation, "CAM row '" + sample_id + "' is not normalized to [-1, 1]");
  sample_ids_.push_back(std::move(sample_id));
  values_.insert(values_.end(), normalized_row.begin(), normalized_row.end());
}

std::vector<double> CamMatrix::column(std::size_t j) const {
  std::vector<double> out(rows());
  for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, j);
  return out;
}

std::vector<double> CamMatrix::column(std::size_t j, std::span<const std::size_t> rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t n = 0; n < rows.size(); ++n) out[n] = at(rows[n], j);
  return out;
}

CamMatrix collect_cams(const nn::Model& model, std::span<const SampleView> samples, std::size_t class_index) {
  require(!samples.empty(), ErrorCode::empty_input, "no samples to collect CAMs from");
  require(class_index < model.config.num_classes, ErrorCode::index_out_of_range,
          "class " + std::to_string(class_index) + " out of range");
  CamMatrix matrix(class_index, model.config.input_length);
  for (const auto& s : samples) {
    const auto fwd = nn::forward(model, s.input);
    if (nn::argmax(fwd.probabilities) != class_index) continue;
    const auto raw = cam::class_activation(model.weights.dense, fwd.last_feature_maps(), class_index);
    matrix.append(std::string(s.id), cam::normalize(raw));
  }
  require(!matrix.empty(), ErrorCode::empty_class,
          "no sample is predicted as class " + std::to_string(class_index));
  return matrix;
}

std::map<std::size_t, CamMatrix> collect_all_cams(const nn::Model& model, std::span<const SampleView> samples) {
  std::map<std::size_t, CamMatrix> out;
  for (const auto& s : samples) {
    const auto local = cam::cam_for_prediction(model, s.input, std::string(s.id));
    auto it = out.try_emplace(local.class_index, local.class_index, model.config.input_length).first;
    it->second.append(local.sample_id, local.normalized);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Smallest of the most frequent values of a sorted sequence.
double most_frequent_sorted(std::span<const double> sorted) {
  double best = sorted.front();
  std::size_t best_run = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    if (j - i > best_run) {
      best_run = j - i;
      best = sorted[i];
    }
    i = j;
  }
  return best;
}

// Summing in ascending order makes the result independent of row order.
double ordered_mean(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  return std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
}

void require_nonempty(std::span<const double> values, const char* what) {
  require(!values.empty(), ErrorCode::empty_input, std::string(what) + " of an empty column");
}

}  // namespace

double silverman_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  return 0.9 * std::min(sd, iqr / 1.34) * std::pow(static_cast<double>(n), -0.2);
}

double kde_mode(std::span<const double> values, std::size_t grid_points) {
  require_nonempty(values, "kde_mode");
  require(grid_points >= 2, ErrorCode::invalid_argument, "kde_mode needs at least 2 grid points");
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  const double lo = sorted.front();
  const double hi = sorted.back();
  const double h = silverman_bandwidth(sorted);
  if (lo == hi || !(h > 0.0)) return most_frequent_sorted(sorted);

  // Kernel contributions beyond 10 bandwidths are below 2e-22 of the peak.
  const double cutoff = 10.0 * h;
  const double inv_two_h2 = 1.0 / (2.0 * h * h);
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  double best_x = lo;
  double best_density = -1.0;
  auto first = sorted.begin();
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = g + 1 == grid_points ? hi : lo + step * static_cast<double>(g);
    while (first != sorted.end() && *first < x - cutoff) ++first;
    double density = 0.0;
    for (auto it = first; it != sorted.end() && *it <= x + cutoff; ++it) {
      const double d = x - *it;
      density += std::exp(-d * d * inv_two_h2);
    }
    if (density > best_density) {
      best_density = density;
      best_x = x;
    }
  }
  return best_x;
}

double lower_median(std::span<const double> values) {
  require_nonempty(values, "median");
  std::vector<double> v(values.begin(), values.end());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double aggregate_column(std::span<const double> column, AggregationMethod method, std::size_t grid_points) {
  require_nonempty(column, "aggregation");
  const auto [mn, mx] = std::ranges::minmax(column);
  double value = 0.0;
  switch (method) {
    case AggregationMethod::mean:
      value = ordered_mean(column);
      break;
    case AggregationMethod::median:
      value = lower_median(column);
      break;
    case AggregationMethod::kde_mode:
      value = kde_mode(column, grid_points);
      break;
  }
  // Rounding in the mean may step outside the observed range by an ulp.
  return std::clamp(value, mn, mx);
}

double column_variability(std::span<const double> column, VariabilityMethod method) {
  require_nonempty(column, "variability");
  const auto [mn, mx] = std::ranges::minmax(column);
  if (!(mx > mn)) return 0.0;
  const std::size_t n = column.size();
  const double range = mx - mn;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::clamp((column[i] - mn) / range, 0.0, 1.0);
  std::ranges::sort(x);
  const double dn = static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / dn;

  double result = 0.0;
  switch (method) {
    case VariabilityMethod::variance:
    case VariabilityMethod::stddev: {
      double ss = 0.0;
      for (double v : x) ss += (v - mean) * (v - mean);
      const double var = ss / dn;
      result = method == VariabilityMethod::variance ? var / 0.25 : std::sqrt(var) / 0.5;
      break;
    }
    case VariabilityMethod::entropy: {
      std::array<std::size_t, kEntropyBins> counts{};
      for (double v : x) {
        const auto bin = static_cast<std::size_t>(v * static_cast<double>(kEntropyBins));
        counts[std::min(bin, kEntropyBins - 1)] += 1;
      }
      double h = 0.0;
      for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / dn;
        h -= p * std::log(p);
      }
      result = h / std::log(static_cast<double>(kEntropyBins));
      break;
    }
    case VariabilityMethod::gini: {
      if (!(mean > 0.0)) return 0.0;
      // sum_i sum_j |x_i - x_j| = 2 * sum_i (2i - n + 1) x_(i) over sorted x
      double pairwise = 0.0;
      for (std::size_t i = 0; i < n; ++i) pairwise += (2.0 * static_cast<double>(i) - dn + 1.0) * x[i];
      pairwise *= 2.0;
      result = pairwise / (2.0 * dn * dn * mean);
      break;
    }
  }
  return std::clamp(result, 0.0, 1.0);
}

std::vector<double> aggregate_impact(const CamMatrix& matrix, AggregationMethod method) {
  require(!matrix.empty(), ErrorCode::empty_input, "aggregation of an empty CAM matrix");
  std::vector<double> out(matrix.columns());
  for (std::size_t j = 0; j < matrix.columns(); ++j) out[j] = aggregate_column(matrix.column(j), method);
  return out;
}

std::vector<double> variability(const CamMatrix& matrix, VariabilityMethod method) {
  require(!matrix.empty(), ErrorCode::empty_input, "variability of an empty CAM matrix");
  std::vector<double> out(matrix.columns());
  for (std::size_t j = 0; j < matrix.columns(); ++j) out[j] = column_variability(matrix.column(j), method);
  return out;
}

AggregatedCam build_aggregated_cam(const CamMatrix& matrix, std::span<const std::size_t> rows,
                                   AggregationMethod agg, VariabilityMethod var) {
  require(!rows.empty(), ErrorCode::empty_input, "aggregation over an empty sample subset");
  for (std::size_t r : rows)
    require(r < matrix.rows(), ErrorCode::index_out_of_range, "row " + std::to_string(r) + " out of range");
  AggregatedCam out;
  out.class_index = matrix.class_index();
  out.n_samples = rows.size();
  out.agg_method = agg;
  out.var_method = var;
  out.impact.resize(matrix.columns());
  out.variability.resize(matrix.columns());
  for (std::size_t j = 0; j < matrix.columns(); ++j) {
    const auto col = matrix.column(j, rows);
    out.impact[j] = aggregate_column(col, agg);
    out.variability[j] = column_variability(col, var);
  }
  return out;
}

AggregatedCam build_aggregated_cam(const CamMatrix& matrix, AggregationMethod agg, VariabilityMethod var) {
  require(!matrix.empty(), ErrorCode::empty_input, "aggregation of an empty CAM matrix");
  std::vector<std::size_t> rows(matrix.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return build_aggregated_cam(matrix, rows, agg, var);
}

nlohmann::json to_json(const AggregatedCam& cam) {
  return nlohmann::json{{"class_index", cam.class_index},
                        {"n_samples", cam.n_samples},
                        {"agg_method", to_string(cam.agg_method)},
                        {"var_method", to_string(cam.var_method)},
                        {"impact", cam.impact},
                        {"variability", cam.variability}};
}

AggregatedCam aggregated_cam_from_json(const nlohmann::json& j) {
  try {
    AggregatedCam cam;
    cam.class_index = j.at("class_index").get<std::size_t>();
    cam.n_samples = j.at("n_samples").get<std::size_t>();
    cam.agg_method = parse_aggregation(j.at("agg_method").get<std::string>());
    cam.var_method = parse_variability(j.at("var_method").get<std::string>());
    cam.impact = j.at("impact").get<std::vector<double>>();
    cam.variability = j.at("variability").get<std::vector<double>>();
    require(cam.impact.size() == cam.variability.size(), ErrorCode::contract_violation,
            "impact and variability lengths differ");
    return cam;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("invalid aggregated CAM: ") + e.what());
  }
}

}  // namespace camscope::agg
