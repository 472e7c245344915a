#include "hep2/error.hpp"

namespace hep2 {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape: return "ShapeError";
    case ErrorKind::invalid: return "InvalidArgument";
    case ErrorKind::spec: return "SpecError";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::format: return "FormatError";
    case ErrorKind::io: return "IoError";
    case ErrorKind::data: return "DataError";
  }
  return "Error";
}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

std::string_view to_string(Warning warning) {
  switch (warning) {
    case Warning::none: return "none";
    case Warning::constant_image: return "constant_image";
    case Warning::isotropic_mask: return "isotropic_mask";
  }
  return "unknown";
}

}  // namespace hep2
