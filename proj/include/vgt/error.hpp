// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vgt {

/// Raised on every contract violation: bad shapes, non-finite values,
/// malformed files, invalid configuration.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace vgt
