#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "camscope/dataset.hpp"
#include "camscope/error.hpp"

namespace camscope::data {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'D', 'S'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{in_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t offset() const { return pos_; }

 private:
  void need(std::size_t n) const {
    require(in_.size() - pos_ >= n, ErrorCode::parse_error,
            "dataset bundle truncated at offset " + std::to_string(pos_));
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void validate(const Dataset& ds) {
  for (const auto& s : ds.samples) {
    require(s.input.size() == ds.input_length, ErrorCode::contract_violation,
            "sample '" + s.sample_id + "' has length " + std::to_string(s.input.size()) + ", expected " +
                std::to_string(ds.input_length));
    require(!s.label || *s.label < ds.class_names.size(), ErrorCode::index_out_of_range,
            "sample '" + s.sample_id + "' has an out-of-range label");
    require(std::ranges::all_of(s.input, [](double v) { return v >= 0.0 && v <= 1.0; }),
            ErrorCode::contract_violation, "sample '" + s.sample_id + "' has values outside [0, 1]");
  }
}

}  // namespace

nlohmann::json bundle_to_json(const Dataset& dataset) {
  validate(dataset);
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : dataset.samples) {
    samples.push_back({{"id", s.sample_id},
                       {"label", s.label ? nlohmann::json(*s.label) : nlohmann::json(nullptr)},
                       {"input", s.input}});
  }
  return nlohmann::json{{"format", kBundleFormat},
                        {"input_length", dataset.input_length},
                        {"class_names", dataset.class_names},
                        {"samples", std::move(samples)}};
}

Dataset bundle_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.value("format", std::string{}) == kBundleFormat, ErrorCode::parse_error,
          std::string("dataset bundle is not in format ") + kBundleFormat);
  Dataset ds;
  try {
    ds.input_length = j.at("input_length").get<std::size_t>();
    ds.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("samples")) {
      PreparedSample p;
      p.sample_id = s.at("id").get<std::string>();
      if (!s.at("label").is_null()) p.label = s.at("label").get<std::size_t>();
      p.input = s.at("input").get<std::vector<double>>();
      ds.samples.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("invalid dataset bundle: ") + e.what());
  }
  validate(ds);
  return ds;
}

std::vector<std::uint8_t> encode_bundle(const Dataset& dataset) {
  validate(dataset);
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u8(kBundleVersion);
  w.u32(static_cast<std::uint32_t>(dataset.input_length));
  w.u32(static_cast<std::uint32_t>(dataset.class_names.size()));
  for (const auto& name : dataset.class_names) w.str(name);
  w.u32(static_cast<std::uint32_t>(dataset.samples.size()));
  for (const auto& s : dataset.samples) {
    w.str(s.sample_id);
    w.i32(s.label ? static_cast<std::int32_t>(*s.label) : -1);
    for (double v : s.input) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Dataset decode_bundle(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 5 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorCode::unsupported_format,
          "not a CSDS dataset bundle");
  Reader r(bytes.subspan(4));
  const std::uint8_t version = r.u8();
  require(version == kBundleVersion, ErrorCode::unsupported_format,
          "unsupported CSDS version " + std::to_string(version));
  Dataset ds;
  ds.input_length = r.u32();
  const std::uint32_t classes = r.u32();
  for (std::uint32_t c = 0; c < classes; ++c) ds.class_names.push_back(r.str());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    PreparedSample s;
    s.sample_id = r.str();
    const std::int32_t label = r.i32();
    if (label >= 0) s.label = static_cast<std::size_t>(label);
    s.input.resize(ds.input_length);
    for (auto& v : s.input) v = static_cast<double>(r.f32());
    ds.samples.push_back(std::move(s));
  }
  require(r.done(), ErrorCode::parse_error, "trailing bytes after dataset bundle");
  validate(ds);
  return ds;
}

void save_bundle(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  if (path.extension() == ".json") {
    out << bundle_to_json(dataset).dump() << '\n';
  } else {
    const auto bytes = encode_bundle(dataset);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  require(static_cast<bool>(out), ErrorCode::io_error, "failed writing " + path.string());
}

Dataset load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open dataset bundle " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return decode_bundle(bytes);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::parse_error, std::string("neither CSDS nor JSON: ") + e.what());
    }
    return bundle_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace camscope::data
