#include "camscope/error.hpp"

namespace camscope {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::contract_violation: return "contract_violation";
    case ErrorCode::numeric_error: return "numeric_error";
    case ErrorCode::empty_input: return "empty_input";
    case ErrorCode::index_out_of_range: return "index_out_of_range";
    case ErrorCode::empty_class: return "empty_class";
    case ErrorCode::empty_selection: return "empty_selection";
    case ErrorCode::unsupported_format: return "unsupported_format";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::malformed_packet: return "malformed_packet";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unknown_method: return "unknown_method";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::no_model: return "no_model";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

}  // namespace camscope
