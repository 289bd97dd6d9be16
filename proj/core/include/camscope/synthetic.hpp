#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "camscope/dataset.hpp"

namespace camscope::data {

/// Uniform byte noise with one class-specific motif planted at a fixed,
/// class-specific offset in every sample.
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t per_class = 300;
  std::size_t length = 128;
  std::size_t motif_length = 6;
  std::uint64_t seed = 7;
};

struct MotifSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  std::vector<double> values;

  bool contains(std::size_t position) const { return position >= start && position < start + length; }
};

struct SyntheticDataset {
  Dataset dataset;
  std::vector<MotifSpan> motifs;  // one per class
};

/// Samples are interleaved by class ("synth-<n>"); motif offsets are spread
/// evenly over the input and motif bytes are 0 or 255.
SyntheticDataset make_motif_dataset(const SyntheticSpec& spec);

}  // namespace camscope::data
