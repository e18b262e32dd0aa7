#include "dcsr/errors.hpp"

namespace dcsr {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyText: return "EmptyText";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorKind::InsufficientNegatives: return "InsufficientNegatives";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::IndexFormatError: return "IndexFormatError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace dcsr
