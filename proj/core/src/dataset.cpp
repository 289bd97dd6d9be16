#include "camscope/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iterator>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "camscope/error.hpp"

namespace camscope::data {

std::string_view to_string(SkipReason reason) noexcept {
  switch (reason) {
    case SkipReason::ipv6: return "ipv6";
    case SkipReason::arp: return "arp";
    case SkipReason::vlan: return "vlan";
    case SkipReason::other_ethertype: return "other_ethertype";
  }
  return "other_ethertype";
}

PreprocessOutcome preprocess_packet(const Packet& packet, std::string sample_id, std::optional<std::size_t> label) {
  const auto& frame = packet.bytes;
  require(frame.size() >= kEthernetHeaderSize, ErrorCode::malformed_packet,
          "frame of " + std::to_string(frame.size()) + " bytes has no complete Ethernet header");
  const auto ether_type = static_cast<std::uint16_t>((frame[12] << 8) | frame[13]);
  switch (ether_type) {
    case kEtherTypeIpv4: break;
    case 0x86dd: return SkipReason::ipv6;
    case 0x0806: return SkipReason::arp;
    case 0x8100:
    case 0x88a8: return SkipReason::vlan;
    default: return SkipReason::other_ethertype;
  }
  // Ethernet header plus the 20-byte minimum IPv4 header.
  require(frame.size() >= kEthernetHeaderSize + 20, ErrorCode::malformed_packet,
          "IPv4 frame of " + std::to_string(frame.size()) + " bytes is shorter than 34 bytes");

  PreparedSample sample;
  sample.sample_id = std::move(sample_id);
  sample.label = label;
  sample.input.assign(kPacketInputLength, 0.0);
  const std::size_t payload = std::min(frame.size() - kEthernetHeaderSize, kPacketInputLength);
  for (std::size_t i = 0; i < payload; ++i) {
    const bool address_byte = i >= 12 && i < 20;
    const std::uint8_t byte = address_byte ? 0 : frame[kEthernetHeaderSize + i];
    sample.input[i] = static_cast<double>(byte) / 255.0;
  }
  return sample;
}

std::vector<nn::Example> Dataset::examples() const {
  std::vector<nn::Example> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    require(s.label.has_value(), ErrorCode::contract_violation, "sample '" + s.sample_id + "' has no label");
    out.push_back({s.input, *s.label});
  }
  return out;
}

std::vector<agg::SampleView> Dataset::views() const {
  std::vector<agg::SampleView> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.sample_id, s.input});
  return out;
}

const PreparedSample* Dataset::find(std::string_view sample_id) const {
  const auto it = std::ranges::find_if(samples, [&](const PreparedSample& s) { return s.sample_id == sample_id; });
  return it == samples.end() ? nullptr : &*it;
}

nlohmann::json to_json(const DatasetSummary& summary) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < summary.class_names.size(); ++c) {
    classes.push_back({{"class_index", c},
                       {"name", summary.class_names[c]},
                       {"before", c < summary.before.size() ? summary.before[c] : 0},
                       {"after", c < summary.after.size() ? summary.after[c] : 0}});
  }
  return nlohmann::json{{"classes", classes},
                        {"per_class_target", summary.per_class_target},
                        {"seed", summary.seed},
                        {"skipped", summary.skipped},
                        {"truncated_records", summary.truncated_records}};
}

std::vector<PreparedSample> undersample(const std::vector<PreparedSample>& samples, std::size_t num_classes,
                                        std::size_t per_class_target, std::uint64_t seed, DatasetSummary* summary) {
  require(per_class_target >= 1, ErrorCode::invalid_argument, "per-class target must be >= 1");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& label = samples[i].label;
    require(label.has_value(), ErrorCode::contract_violation,
            "undersampling needs labels; sample '" + samples[i].sample_id + "' has none");
    require(*label < num_classes, ErrorCode::index_out_of_range,
            "sample '" + samples[i].sample_id + "' has label " + std::to_string(*label));
    by_class[*label].push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  std::vector<std::size_t> after(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto& idx = by_class[c];
    if (idx.size() <= per_class_target) {
      keep.insert(keep.end(), idx.begin(), idx.end());
    } else {
      std::sample(idx.begin(), idx.end(), std::back_inserter(keep), per_class_target, rng);
    }
    after[c] = std::min(idx.size(), per_class_target);
  }
  std::ranges::sort(keep);

  if (summary != nullptr) {
    summary->before.assign(num_classes, 0);
    for (std::size_t c = 0; c < num_classes; ++c) summary->before[c] = by_class[c].size();
    summary->after = after;
    summary->per_class_target = per_class_target;
    summary->seed = seed;
  }
  std::vector<PreparedSample> out;
  out.reserve(keep.size());
  for (std::size_t i : keep) out.push_back(samples[i]);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace

Dataset load_csv(std::istream& in, std::string_view label_column) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) header = split_row(line);
  }
  require(!header.empty(), ErrorCode::parse_error, "CSV has no header row");
  const auto label_it = std::ranges::find(header, label_column);
  require(label_it != header.end(), ErrorCode::parse_error,
          "CSV header has no label column '" + std::string(label_column) + "'");
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t features = header.size() - 1;
  require(features >= 1, ErrorCode::parse_error, "CSV has no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    require(cells.size() == header.size(), ErrorCode::parse_error,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " cells, got " +
                std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(features);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_col) continue;
      const auto& cell = cells[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      require(ec == std::errc{} && ptr == cell.data() + cell.size() && !cell.empty() && std::isfinite(v),
              ErrorCode::parse_error,
              "line " + std::to_string(line_no) + ", column '" + header[c] + "': '" + cell + "' is not a number");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
    labels.push_back(cells[label_col]);
  }

  Dataset ds;
  ds.input_length = features;
  const std::set<std::string> names(labels.begin(), labels.end());
  ds.class_names.assign(names.begin(), names.end());

  std::vector<double> lo(features, 0.0), hi(features, 0.0);
  for (std::size_t f = 0; f < features && !rows.empty(); ++f) {
    lo[f] = hi[f] = rows[0][f];
    for (const auto& r : rows) {
      lo[f] = std::min(lo[f], r[f]);
      hi[f] = std::max(hi[f], r[f]);
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    PreparedSample s;
    s.sample_id = "row-" + std::to_string(i + 1);
    s.label = static_cast<std::size_t>(std::ranges::lower_bound(ds.class_names, labels[i]) - ds.class_names.begin());
    s.input.resize(features);
    for (std::size_t f = 0; f < features; ++f) {
      const double range = hi[f] - lo[f];
      s.input[f] = range > 0.0 ? std::clamp((rows[i][f] - lo[f]) / range, 0.0, 1.0) : 0.0;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open CSV " + path.string());
  try {
    return load_csv(in, label_column);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> parse_manifest(const nlohmann::json& j) {
  require(j.is_object() && j.contains("files") && j["files"].is_object(), ErrorCode::parse_error,
          "manifest must be an object with a 'files' object");
  std::map<std::string, std::string> out;
  for (const auto& [name, cls] : j["files"].items()) {
    require(cls.is_string(), ErrorCode::parse_error, "manifest entry '" + name + "' must map to a class name");
    out.emplace(name, cls.get<std::string>());
  }
  return out;
}

Dataset prepare_pcap_dataset(const std::filesystem::path& pcap_dir, const std::map<std::string, std::string>& manifest,
                             std::size_t per_class_target, std::uint64_t seed, DatasetSummary& summary) {
  Dataset ds;
  ds.input_length = kPacketInputLength;
  std::set<std::string> names;
  for (const auto& [file, cls] : manifest) names.insert(cls);
  ds.class_names.assign(names.begin(), names.end());
  summary = DatasetSummary{};
  summary.class_names = ds.class_names;

  std::vector<PreparedSample> all;
  for (const auto& [file, cls] : manifest) {
    const auto label =
        static_cast<std::size_t>(std::ranges::lower_bound(ds.class_names, cls) - ds.class_names.begin());
    const auto path = pcap_dir / file;
    const Capture cap = read_pcap(path);
    require(cap.link_type == kLinkTypeEthernet, ErrorCode::unsupported_format,
            path.string() + ": link type " + std::to_string(cap.link_type) + " is not Ethernet");
    summary.truncated_records += cap.truncated_records;
    std::size_t offset = kPcapGlobalHeaderSize;
    for (std::size_t n = 0; n < cap.packets.size(); ++n) {
      const auto& packet = cap.packets[n];
      PreprocessOutcome outcome;
      try {
        outcome = preprocess_packet(packet, file + ":" + std::to_string(n), label);
      } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": packet " + std::to_string(n) + " at offset " +
                                  std::to_string(offset) + ": " + e.what());
      }
      if (auto* s = std::get_if<PreparedSample>(&outcome)) {
        all.push_back(std::move(*s));
      } else {
        summary.skipped[std::string(to_string(std::get<SkipReason>(outcome)))] += 1;
      }
      offset += kPcapRecordHeaderSize + packet.bytes.size();
    }
  }
  require(!all.empty(), ErrorCode::empty_input, "no samples: no IPv4 packets found in " + pcap_dir.string());
  ds.samples = undersample(all, ds.class_names.size(), per_class_target, seed, &summary);
  return ds;
}

}  // namespace camscope::data
