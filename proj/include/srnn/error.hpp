// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_ERROR_HPP
#define SRNN_ERROR_HPP

#include <stdexcept>
#include <string>

namespace srnn {

// Error categories, mirrored by the C API status codes and the CLI's
// "error: <category>: <detail>" output.
enum class ErrorKind {
  Io,        // file missing, unreadable, short read/write
  Parse,     // malformed spec/CSV/checkpoint syntax
  Invalid,   // semantic violation (bad graph, bad config, bad arguments)
  Dim,       // shape/dimension mismatch
  Internal,  // broken invariant inside the library
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Invalid: return "invalid";
    case ErrorKind::Dim: return "dim";
    case ErrorKind::Internal: return "internal";
  }
  return "internal";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_io(const std::string& msg) { throw Error(ErrorKind::Io, msg); }
[[noreturn]] inline void throw_parse(const std::string& msg) { throw Error(ErrorKind::Parse, msg); }
[[noreturn]] inline void throw_invalid(const std::string& msg) { throw Error(ErrorKind::Invalid, msg); }
[[noreturn]] inline void throw_dim(const std::string& msg) { throw Error(ErrorKind::Dim, msg); }
[[noreturn]] inline void throw_internal(const std::string& msg) { throw Error(ErrorKind::Internal, msg); }

}  // namespace srnn

#endif
