#include "camscope/synthetic.hpp"

#include <random>

#include "camscope/error.hpp"

namespace camscope::data {

SyntheticDataset make_motif_dataset(const SyntheticSpec& spec) {
  require(spec.classes >= 2, ErrorCode::invalid_argument, "synthetic data needs at least two classes");
  require(spec.motif_length >= 1 && spec.classes * spec.motif_length <= spec.length, ErrorCode::invalid_argument,
          "motifs do not fit into the sample length");
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> byte(0, 255);
  std::bernoulli_distribution bit(0.5);

  SyntheticDataset out;
  const std::size_t slot = spec.length / spec.classes;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    MotifSpan m;
    m.length = spec.motif_length;
    m.start = c * slot + (slot - spec.motif_length) / 2;
    // Redraw until the pattern differs from every earlier class and is not flat.
    while (true) {
      m.values.assign(spec.motif_length, 0.0);
      for (auto& v : m.values) v = bit(rng) ? 1.0 : 0.0;
      bool flat = true;
      for (double v : m.values) flat = flat && v == m.values.front();
      bool seen = false;
      for (const auto& other : out.motifs) seen = seen || other.values == m.values;
      if (!flat && !seen) break;
    }
    out.motifs.push_back(std::move(m));
    out.dataset.class_names.push_back("class-" + std::to_string(c));
  }

  out.dataset.input_length = spec.length;
  for (std::size_t n = 0; n < spec.per_class * spec.classes; ++n) {
    const std::size_t c = n % spec.classes;
    PreparedSample s;
    s.sample_id = "synth-" + std::to_string(n);
    s.label = c;
    s.input.resize(spec.length);
    for (auto& v : s.input) v = static_cast<double>(byte(rng)) / 255.0;
    const auto& m = out.motifs[c];
    for (std::size_t j = 0; j < m.length; ++j) s.input[m.start + j] = m.values[j];
    out.dataset.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace camscope::data
