#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcsr {

enum class ErrorKind {
  EmptyText,
  ParseError,
  SchemaError,
  DimensionError,
  NumericalError,
  IncompatibleCheckpoint,
  InsufficientNegatives,
  EmptyPool,
  IndexFormatError,
  RangeError,
  SpecError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit code or a counter.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace dcsr
