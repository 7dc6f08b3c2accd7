#pragma once

#include <unordered_set>

#include "qelect/bitstring.hpp"
#include "qelect/errors.hpp"

namespace qelect {

/// One-time pad: key XOR message. The key must be as long as the message.
inline BitString otp_encrypt(const BitString& key, const BitString& msg) {
  if (key.size() != msg.size()) throw InvalidArgument("one-time pad key length must equal message length");
  return key ^ msg;
}

inline BitString otp_decrypt(const BitString& key, const BitString& ciphertext) {
  return otp_encrypt(key, ciphertext);
}

/// Tracks pads consumed within one scenario. In strict mode a second
/// encryption under the same pad is a protocol violation; otherwise reuse is
/// only counted.
class PadRegistry {
 public:
  explicit PadRegistry(bool strict = true) : strict_(strict) {}

  BitString encrypt(const BitString& key, const BitString& msg) {
    auto out = otp_encrypt(key, msg);
    if (!used_.insert(key).second) {
      ++reuse_count_;
      if (strict_) throw ProtocolViolation("one-time pad reused");
    }
    return out;
  }

  bool strict() const noexcept { return strict_; }
  std::size_t reuse_count() const noexcept { return reuse_count_; }
  std::size_t pads_used() const noexcept { return used_.size(); }

 private:
  bool strict_;
  std::size_t reuse_count_ = 0;
  std::unordered_set<BitString> used_;
};

}  // namespace qelect
