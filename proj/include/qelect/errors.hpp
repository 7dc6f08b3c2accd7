#pragma once

#include <stdexcept>
#include <string>

namespace qelect {

/// Malformed input to an operation: length mismatches, out-of-range
/// probabilities, bad configuration values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A party attempted something the protocol forbids (measuring a consumed
/// qubit, reusing a pad in strict mode, acting out of phase).
class ProtocolViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace qelect
