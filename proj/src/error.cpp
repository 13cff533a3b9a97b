#include "netsp/error.hpp"

namespace netsp {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input error";
    case ErrorKind::validity: return "validity error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::size: return "size error";
    case ErrorKind::config: return "config error";
    case ErrorKind::state: return "state error";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::load: return "load error";
    case ErrorKind::degenerate_area: return "degenerate-area error";
    case ErrorKind::io: return "io error";
  }
  return "error";
}

}  // namespace netsp
