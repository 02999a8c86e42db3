#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cogtree {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  label_out_of_range,
  empty_dataset,
  empty_log,
  no_valid_host,
  unknown_class,
  zero_count,
  k_out_of_range,
  malformed_row,
  inconsistent_dimension,
  unknown_header,
  unknown_label,
  invalid_spec,
  invalid_config,
  io_error,
  parse_error,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception type thrown by every fallible operation in the library.
///
/// `index()` carries the offending sample index or 1-based line number when
/// the error is tied to a particular record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace cogtree
