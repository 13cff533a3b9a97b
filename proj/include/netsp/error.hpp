#pragma once

#include <stdexcept>
#include <string>

namespace netsp {

enum class ErrorKind {
  input,
  validity,
  parse,
  size,
  config,
  state,
  shape,
  load,
  degenerate_area,
  io,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so the
// C API can map it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace netsp
