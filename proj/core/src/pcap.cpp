#include "camscope/pcap.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "camscope/error.hpp"

namespace camscope::data {

namespace {

constexpr std::uint32_t kPcapngBlockType = 0x0a0d0d0a;

std::uint32_t read_u32(std::span<const std::uint8_t> s, std::size_t off, bool big_endian) {
  if (big_endian)
    return (std::uint32_t{s[off]} << 24) | (std::uint32_t{s[off + 1]} << 16) | (std::uint32_t{s[off + 2]} << 8) |
           std::uint32_t{s[off + 3]};
  return std::uint32_t{s[off]} | (std::uint32_t{s[off + 1]} << 8) | (std::uint32_t{s[off + 2]} << 16) |
         (std::uint32_t{s[off + 3]} << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> s, std::size_t off, bool big_endian) {
  if (big_endian) return static_cast<std::uint16_t>((s[off] << 8) | s[off + 1]);
  return static_cast<std::uint16_t>(s[off] | (s[off + 1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v, bool big_endian) {
  for (int i = 0; i < 4; ++i) {
    const int shift = big_endian ? (3 - i) * 8 : i * 8;
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v, bool big_endian) {
  if (big_endian) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  } else {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

Capture parse_pcap(std::span<const std::uint8_t> stream) {
  require(stream.size() >= 4, ErrorCode::parse_error, "capture shorter than its magic number (offset 0)");
  // The magic read little-endian tells us the file's byte order.
  const std::uint32_t magic = read_u32(stream, 0, false);
  bool big_endian = false;
  if (magic == kPcapMagic) {
    big_endian = false;
  } else if (magic == kPcapMagicSwapped) {
    big_endian = true;
  } else if (magic == kPcapngBlockType) {
    fail(ErrorCode::unsupported_format, "pcapng captures are not supported; convert to classic pcap");
  } else {
    fail(ErrorCode::unsupported_format, "unknown capture magic " + hex(magic) + " at offset 0");
  }
  require(stream.size() >= kPcapGlobalHeaderSize, ErrorCode::parse_error,
          "truncated pcap global header (" + std::to_string(stream.size()) + " bytes)");

  Capture cap;
  cap.byte_swapped = big_endian;
  cap.version_major = read_u16(stream, 4, big_endian);
  cap.version_minor = read_u16(stream, 6, big_endian);
  cap.thiszone = static_cast<std::int32_t>(read_u32(stream, 8, big_endian));
  cap.sigfigs = read_u32(stream, 12, big_endian);
  cap.snaplen = read_u32(stream, 16, big_endian);
  cap.link_type = read_u32(stream, 20, big_endian);

  std::size_t off = kPcapGlobalHeaderSize;
  while (off < stream.size()) {
    if (stream.size() - off < kPcapRecordHeaderSize) {
      cap.truncated_records += 1;
      break;
    }
    Packet p;
    p.ts_sec = read_u32(stream, off, big_endian);
    p.ts_usec = read_u32(stream, off + 4, big_endian);
    const std::uint32_t incl_len = read_u32(stream, off + 8, big_endian);
    p.original_length = read_u32(stream, off + 12, big_endian);
    require(incl_len <= p.original_length, ErrorCode::parse_error,
            "record at offset " + std::to_string(off) + " captures " + std::to_string(incl_len) +
                " bytes but the original length is " + std::to_string(p.original_length));
    const std::size_t body = off + kPcapRecordHeaderSize;
    if (stream.size() - body < incl_len) {
      cap.truncated_records += 1;
      break;
    }
    p.bytes.assign(stream.begin() + static_cast<std::ptrdiff_t>(body),
                   stream.begin() + static_cast<std::ptrdiff_t>(body + incl_len));
    cap.packets.push_back(std::move(p));
    off = body + incl_len;
  }
  return cap;
}

Capture read_pcap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open capture " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_pcap(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> write_pcap(const Capture& capture) {
  const bool be = capture.byte_swapped;
  std::vector<std::uint8_t> out;
  put_u32(out, kPcapMagic, be);
  put_u16(out, capture.version_major, be);
  put_u16(out, capture.version_minor, be);
  put_u32(out, static_cast<std::uint32_t>(capture.thiszone), be);
  put_u32(out, capture.sigfigs, be);
  put_u32(out, capture.snaplen, be);
  put_u32(out, capture.link_type, be);
  for (const auto& p : capture.packets) {
    require(p.bytes.size() <= p.original_length, ErrorCode::contract_violation,
            "packet captures more bytes than its original length");
    put_u32(out, p.ts_sec, be);
    put_u32(out, p.ts_usec, be);
    put_u32(out, static_cast<std::uint32_t>(p.bytes.size()), be);
    put_u32(out, p.original_length, be);
    out.insert(out.end(), p.bytes.begin(), p.bytes.end());
  }
  return out;
}

}  // namespace camscope::data
