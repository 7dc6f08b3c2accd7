#pragma once

#include <cstddef>

#include "qelect/bitstring.hpp"
#include "qelect/errors.hpp"

namespace qelect {

/// Repetition code used for key redistribution. Each payload bit becomes a
/// block of r copies; decoding takes the per-block majority, so up to
/// (r - 1) / 2 flips per block are corrected.
struct EccConfig {
  std::size_t r = 5;

  void validate() const {
    if (r < 3 || r % 2 == 0) throw InvalidArgument("repetition factor must be odd and at least 3");
  }
  std::size_t correctable() const noexcept { return (r - 1) / 2; }
  std::size_t codeword_bits(std::size_t payload_bits) const noexcept { return payload_bits * r; }
};

inline BitString ecc_encode(const BitString& payload, const EccConfig& cfg) {
  cfg.validate();
  if (payload.empty()) throw InvalidArgument("ecc payload must be nonempty");
  BitString out(payload.size() * cfg.r);
  for (std::size_t i = 0; i < payload.size(); ++i)
    for (std::size_t k = 0; k < cfg.r; ++k) out.set(i * cfg.r + k, payload[i]);
  return out;
}

inline BitString ecc_decode(const BitString& codeword, const EccConfig& cfg) {
  cfg.validate();
  if (codeword.size() % cfg.r != 0) throw InvalidArgument("codeword length is not a multiple of r");
  BitString out(codeword.size() / cfg.r);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < cfg.r; ++k) ones += codeword[i * cfg.r + k];
    out.set(i, ones > cfg.r / 2 ? 1 : 0);
  }
  return out;
}

}  // namespace qelect
