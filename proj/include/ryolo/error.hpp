#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ryolo {

// Error classes surfaced on the CLI as a single machine-parsable token.
enum class ErrorKind {
  InvalidArgument,
  ShapeMismatch,
  Parse,
  Io,
  Geometry,
  Numeric,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::ShapeMismatch: return "shape_mismatch";
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::Io: return "io_error";
    case ErrorKind::Geometry: return "geometry_mismatch";
    case ErrorKind::Numeric: return "numeric_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace ryolo
