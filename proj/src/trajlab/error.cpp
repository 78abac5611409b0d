#include "trajlab/error.hpp"

namespace trajlab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Parameter: return "parameter error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Checkpoint: return "checkpoint error";
  }
  return "error";
}

}  // namespace trajlab
