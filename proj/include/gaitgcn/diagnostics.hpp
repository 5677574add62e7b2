#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gaitgcn {

/// Collects non-fatal warnings raised by an operation.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
  bool empty() const { return warnings.empty(); }
};

/// Malformed input document or file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gaitgcn
