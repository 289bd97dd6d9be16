#include "camscope/glyph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "camscope/error.hpp"

namespace camscope::glyph {

namespace {

std::uint8_t lerp_channel(std::uint8_t from, std::uint8_t to, double t) {
  const double v = static_cast<double>(from) + (static_cast<double>(to) - static_cast<double>(from)) * t;
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

Rgb lerp(const Rgb& from, const Rgb& to, double t) {
  return {lerp_channel(from.r, to.r, t), lerp_channel(from.g, to.g, t), lerp_channel(from.b, to.b, t)};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", r, g, b);
  return buf;
}

Rgb impact_color(double impact) {
  if (std::isnan(impact)) impact = 0.0;
  impact = std::clamp(impact, -1.0, 1.0);
  if (impact >= 0.0) return lerp(kNeutralColor, kPositiveColor, impact);
  return lerp(kNeutralColor, kNegativeColor, -impact);
}

double square_side(double variability, double cell_size, double min_area_fraction) {
  require(min_area_fraction > 0.0 && min_area_fraction < 1.0, ErrorCode::invalid_argument,
          "min_area_fraction must lie in (0, 1)");
  const double v = std::clamp(variability, 0.0, 1.0);
  return cell_size * std::sqrt(min_area_fraction + (1.0 - v) * (1.0 - min_area_fraction));
}

std::size_t grid_rows(std::size_t features, std::size_t wrap_width) {
  require(wrap_width >= 1, ErrorCode::invalid_argument, "wrap width must be >= 1");
  return (features + wrap_width - 1) / wrap_width;
}

std::string render_svg(const agg::AggregatedCam& cam, const GridSpec& spec) {
  require(cam.impact.size() == cam.variability.size(), ErrorCode::contract_violation,
          "impact and variability lengths differ");
  require(spec.cell_size > 0.0, ErrorCode::invalid_argument, "cell size must be positive");
  const std::size_t n = cam.impact.size();
  const std::size_t rows = grid_rows(n, spec.wrap_width);
  const std::size_t cols = std::min(n, spec.wrap_width);
  const double width = spec.cell_size * static_cast<double>(cols);
  const double height = spec.cell_size * static_cast<double>(rows);

  std::string out;
  out.reserve(n * 160 + 256);
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" + fmt(height) +
         "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\" data-class=\"" +
         std::to_string(cam.class_index) + "\" data-agg=\"" + std::string(agg::to_string(cam.agg_method)) +
         "\" data-var=\"" + std::string(agg::to_string(cam.var_method)) + "\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double side = square_side(cam.variability[i], spec.cell_size, spec.min_area_fraction);
    const double inset = (spec.cell_size - side) / 2.0;
    const double x = spec.cell_size * static_cast<double>(i % spec.wrap_width) + inset;
    const double y = spec.cell_size * static_cast<double>(i / spec.wrap_width) + inset;
    out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(side) + "\" height=\"" + fmt(side) +
           "\" fill=\"" + impact_color(cam.impact[i]).hex() + "\"><title>feature " + std::to_string(i) +
           ": impact " + fmt(cam.impact[i]) + ", variability " + fmt(cam.variability[i]) + "</title></rect>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace camscope::glyph
