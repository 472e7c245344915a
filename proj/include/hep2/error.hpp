#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hep2 {

// Coarse error classes. The CLI prints the class name as the first token of
// its error line so scripts can branch on it.
enum class ErrorKind {
  shape,       // dimension / size mismatch between operands
  invalid,     // argument outside its documented domain
  spec,        // inconsistent network description
  config,      // bad configuration document or training settings
  format,      // malformed or truncated file content
  io,          // filesystem failure
  data,        // dataset content problem (labels, ids, masks)
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// Non-fatal conditions reported next to a result.
enum class Warning {
  none,
  constant_image,  // contrast normalization found max == min
  isotropic_mask,  // PCA eigenvalues equal; orientation undefined
};

std::string_view to_string(Warning warning);

}  // namespace hep2
