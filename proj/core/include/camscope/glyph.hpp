#pragma once

// Visual encoding of an aggregated CAM: impact -> diverging color,
// variability -> square area. Shared by the SVG exporter and the web UI.

#include <cstddef>
#include <cstdint>
#include <string>

#include "camscope/aggregate.hpp"

namespace camscope::glyph {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  std::string hex() const;  // "#RRGGBB"
  bool operator==(const Rgb&) const = default;
};

inline constexpr Rgb kNegativeColor{0x3B, 0x4C, 0xC0};
inline constexpr Rgb kNeutralColor{0xF7, 0xF7, 0xF7};
inline constexpr Rgb kPositiveColor{0xB4, 0x04, 0x26};

inline constexpr std::size_t kDefaultWrapWidth = 150;
inline constexpr double kDefaultMinAreaFraction = 0.04;
inline constexpr double kDefaultCellSize = 10.0;

/// Linear per half: -1 -> blue, 0 -> white, +1 -> red. Inputs are clamped to [-1, 1];
/// channels are rounded to the nearest integer.
Rgb impact_color(double impact);

/// Side length whose area fraction is min_area + (1 - variability) * (1 - min_area).
double square_side(double variability, double cell_size = kDefaultCellSize,
                   double min_area_fraction = kDefaultMinAreaFraction);

struct GridSpec {
  std::size_t wrap_width = kDefaultWrapWidth;
  double cell_size = kDefaultCellSize;
  double min_area_fraction = kDefaultMinAreaFraction;
};

std::size_t grid_rows(std::size_t features, std::size_t wrap_width);

/// Row-major wrapped grid with one centered <rect> per feature and a <title>
/// tooltip. Throws contract_violation on mismatched impact/variability lengths.
std::string render_svg(const agg::AggregatedCam& cam, const GridSpec& spec = {});

}  // namespace camscope::glyph
