#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace camscope {

// Every failure raised by the library carries one of these codes. The service
// layer maps each code to exactly one HTTP status.
enum class ErrorCode {
  contract_violation,  // shape or precondition mismatch
  numeric_error,       // non-finite values
  empty_input,
  index_out_of_range,
  empty_class,         // no sample predicted as the requested class
  empty_selection,     // a filter would leave no samples
  unsupported_format,
  parse_error,
  malformed_packet,
  invalid_argument,
  unknown_method,
  not_found,
  no_model,
  io_error,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace camscope
