#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "camscope/aggregate.hpp"
#include "camscope/pcap.hpp"
#include "camscope/train.hpp"

namespace camscope::data {

inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kPacketInputLength = 1500;
inline constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;

struct PreparedSample {
  std::string sample_id;
  std::optional<std::size_t> label;
  std::vector<double> input;  // values in [0, 1]

  bool operator==(const PreparedSample&) const = default;
};

enum class SkipReason { ipv6, arp, vlan, other_ethertype };
std::string_view to_string(SkipReason reason) noexcept;

using PreprocessOutcome = std::variant<PreparedSample, SkipReason>;

/// Strips the Ethernet header, zeroes the IPv4 source and destination
/// addresses, pads or truncates to 1500 bytes and scales by 1/255.
/// Non-IPv4 frames are skipped with a reason; frames too short to hold
/// Ethernet + IPv4 headers throw Error(malformed_packet).
PreprocessOutcome preprocess_packet(const Packet& packet, std::string sample_id = {},
                                    std::optional<std::size_t> label = std::nullopt);

/// Ordered class names plus samples; labels index into class_names.
struct Dataset {
  std::vector<std::string> class_names;
  std::size_t input_length = 0;
  std::vector<PreparedSample> samples;

  std::vector<nn::Example> examples() const;  // requires every sample to be labeled
  std::vector<agg::SampleView> views() const;
  const PreparedSample* find(std::string_view sample_id) const;
};

struct DatasetSummary {
  std::vector<std::string> class_names;
  std::vector<std::size_t> before;
  std::vector<std::size_t> after;
  std::size_t per_class_target = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> skipped;  // reason -> count (pcap preparation only)
  std::size_t truncated_records = 0;
};

nlohmann::json to_json(const DatasetSummary& summary);

/// Reduces every class above `per_class_target` to exactly that many samples
/// by seeded sampling without replacement; relative order is preserved.
std::vector<PreparedSample> undersample(const std::vector<PreparedSample>& samples, std::size_t num_classes,
                                        std::size_t per_class_target, std::uint64_t seed,
                                        DatasetSummary* summary = nullptr);

/// CSV with a header row. All columns except `label_column` are numeric
/// features, min-max scaled per column; class names are the sorted distinct
/// labels. Sample ids are "row-<n>" (1-based data rows).
Dataset load_csv(std::istream& in, std::string_view label_column = "label");
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column = "label");

/// `{ "files": { "<name>.pcap": "<class>" } }`
std::map<std::string, std::string> parse_manifest(const nlohmann::json& j);

/// Reads every manifest entry from `pcap_dir` (in file-name order), keeps
/// IPv4 frames and undersamples per class. Sample ids are "<file>:<packet>".
Dataset prepare_pcap_dataset(const std::filesystem::path& pcap_dir, const std::map<std::string, std::string>& manifest,
                             std::size_t per_class_target, std::uint64_t seed, DatasetSummary& summary);

// ---------------------------------------------------------------------------
// Bundles: JSON document or the "CSDS" columnar binary (version 1,
// little-endian, float32 rows).

inline constexpr const char* kBundleFormat = "camscope-dataset-v1";
inline constexpr std::uint8_t kBundleVersion = 1;

nlohmann::json bundle_to_json(const Dataset& dataset);
Dataset bundle_from_json(const nlohmann::json& j);
std::vector<std::uint8_t> encode_bundle(const Dataset& dataset);
Dataset decode_bundle(std::span<const std::uint8_t> bytes);

/// ".json" paths use the JSON form, everything else the binary form.
void save_bundle(const Dataset& dataset, const std::filesystem::path& path);
/// Detects the format from the file contents.
Dataset load_bundle(const std::filesystem::path& path);

}  // namespace camscope::data
