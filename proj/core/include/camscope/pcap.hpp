#pragma once

// Classic libpcap capture files (microsecond timestamps, either byte order).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace camscope::data {

inline constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;
inline constexpr std::uint32_t kLinkTypeEthernet = 1;
inline constexpr std::size_t kPcapGlobalHeaderSize = 24;
inline constexpr std::size_t kPcapRecordHeaderSize = 16;

struct Packet {
  std::uint32_t ts_sec = 0;
  std::uint32_t ts_usec = 0;
  std::uint32_t original_length = 0;
  std::vector<std::uint8_t> bytes;  // captured bytes, size <= original_length

  double timestamp() const { return static_cast<double>(ts_sec) + static_cast<double>(ts_usec) * 1e-6; }
  bool operator==(const Packet&) const = default;
};

struct Capture {
  bool byte_swapped = false;  // file written in the opposite byte order from the magic's native reading
  std::uint16_t version_major = 2;
  std::uint16_t version_minor = 4;
  std::int32_t thiszone = 0;
  std::uint32_t sigfigs = 0;
  std::uint32_t snaplen = 65535;
  std::uint32_t link_type = kLinkTypeEthernet;
  std::vector<Packet> packets;
  /// Trailing records cut short by the end of the stream (parsing stops there).
  std::size_t truncated_records = 0;
};

/// Throws Error(unsupported_format) for unknown magics (pcapng included) and
/// Error(parse_error) with a byte offset for inconsistent records.
Capture parse_pcap(std::span<const std::uint8_t> stream);
Capture read_pcap(const std::filesystem::path& path);

/// Serializes in little-endian (`byte_swapped == false`) or big-endian order.
std::vector<std::uint8_t> write_pcap(const Capture& capture);

}  // namespace camscope::data
