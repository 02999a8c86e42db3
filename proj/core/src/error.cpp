#include "cogtree/error.hpp"

namespace cogtree {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::label_out_of_range: return "label-out-of-range";
    case ErrorCode::empty_dataset: return "empty-dataset";
    case ErrorCode::empty_log: return "empty-log";
    case ErrorCode::no_valid_host: return "no-valid-host";
    case ErrorCode::unknown_class: return "unknown-class";
    case ErrorCode::zero_count: return "zero-count";
    case ErrorCode::k_out_of_range: return "k-out-of-range";
    case ErrorCode::malformed_row: return "malformed-row";
    case ErrorCode::inconsistent_dimension: return "inconsistent-dimension";
    case ErrorCode::unknown_header: return "unknown-header";
    case ErrorCode::unknown_label: return "unknown-label";
    case ErrorCode::invalid_spec: return "invalid-spec";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::parse_error: return "parse-error";
  }
  return "unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message,
                           std::optional<std::size_t> index) {
  std::string out = to_string(code);
  if (index) out += "(" + std::to_string(*index) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::size_t> index)
    : std::runtime_error(format_message(code, message, index)),
      code_(code),
      index_(index) {}

}  // namespace cogtree
