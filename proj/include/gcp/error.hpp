#pragma once

#include <stdexcept>
#include <string>

namespace gcp {

// All library failures surface as gcp::Error; the message carries enough
// context (image id, file path, step index) to act on without a debugger.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gcp
