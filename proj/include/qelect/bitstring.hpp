#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qelect/errors.hpp"
#include "qelect/rng.hpp"

namespace qelect {

/// Ordered sequence of bits. Index 0 is the leftmost, first-transmitted bit.
///
/// Serialized form is "<bit-length>:<lowercase hex>", with bits packed
/// most-significant-first into bytes and the final byte zero-padded. The
/// explicit length keeps non-byte-aligned strings unambiguous.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::size_t n) : bits_(n, 0) {}

  /// Parses a string of '0'/'1' characters.
  static BitString from_bits(std::string_view text) {
    BitString out;
    out.bits_.reserve(text.size());
    for (char ch : text) {
      if (ch != '0' && ch != '1') throw InvalidArgument("bit string may contain only '0' and '1'");
      out.bits_.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    return out;
  }

  static BitString from_hex(std::size_t n_bits, std::string_view hex) {
    if (hex.size() != (n_bits + 7) / 8 * 2) throw InvalidArgument("hex length does not match bit length");
    BitString out(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) {
      const int nibble = hex_value(hex[i / 4]);
      out.bits_[i] = static_cast<std::uint8_t>((nibble >> (3 - i % 4)) & 1);
    }
    for (std::size_t i = n_bits; i < hex.size() * 4; ++i) {
      if ((hex_value(hex[i / 4]) >> (3 - i % 4)) & 1) throw InvalidArgument("nonzero padding bits in hex");
    }
    return out;
  }

  static BitString parse(std::string_view serialized) {
    const auto colon = serialized.find(':');
    if (colon == std::string_view::npos || colon == 0) throw InvalidArgument("expected '<bits>:<hex>'");
    std::size_t n = 0;
    for (char ch : serialized.substr(0, colon)) {
      if (ch < '0' || ch > '9') throw InvalidArgument("bad bit length");
      n = n * 10 + static_cast<std::size_t>(ch - '0');
    }
    return from_hex(n, serialized.substr(colon + 1));
  }

  /// Big-endian rendering of the low `n_bits` bits of `value`.
  static BitString from_uint(std::uint64_t value, std::size_t n_bits) {
    if (n_bits > 64) throw InvalidArgument("from_uint supports at most 64 bits");
    BitString out(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) out.bits_[i] = (value >> (n_bits - 1 - i)) & 1;
    return out;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }

  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  std::uint8_t at(std::size_t i) const {
    if (i >= bits_.size()) throw InvalidArgument("bit index out of range");
    return bits_[i];
  }
  void set(std::size_t i, std::uint8_t v) { bits_.at(i) = v & 1; }
  void flip(std::size_t i) { bits_.at(i) ^= 1; }
  void push_back(std::uint8_t v) { bits_.push_back(v & 1); }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  BitString& append(const BitString& tail) {
    bits_.insert(bits_.end(), tail.bits_.begin(), tail.bits_.end());
    return *this;
  }

  BitString slice(std::size_t pos, std::size_t len) const {
    if (pos > bits_.size() || len > bits_.size() - pos) throw InvalidArgument("slice out of range");
    BitString out;
    out.bits_.assign(bits_.begin() + static_cast<std::ptrdiff_t>(pos),
                     bits_.begin() + static_cast<std::ptrdiff_t>(pos + len));
    return out;
  }

  BitString prefix(std::size_t len) const { return slice(0, len); }

  std::size_t count_ones() const noexcept {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  std::uint64_t to_uint() const {
    if (bits_.size() > 64) throw InvalidArgument("to_uint supports at most 64 bits");
    std::uint64_t v = 0;
    for (auto b : bits_) v = (v << 1) | b;
    return v;
  }

  std::string to_bits() const {
    std::string out(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) out[i] = static_cast<char>('0' + bits_[i]);
    return out;
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out((bits_.size() + 7) / 8 * 2, '0');
    for (std::size_t nib = 0; nib < out.size(); ++nib) {
      int v = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t i = nib * 4 + k;
        v = (v << 1) | (i < bits_.size() ? bits_[i] : 0);
      }
      out[nib] = kDigits[v];
    }
    return out;
  }

  std::string serialize() const { return std::to_string(bits_.size()) + ":" + to_hex(); }

  friend bool operator==(const BitString&, const BitString&) = default;
  friend auto operator<=>(const BitString&, const BitString&) = default;

  friend BitString operator^(const BitString& a, const BitString& b) {
    if (a.size() != b.size()) throw InvalidArgument("XOR requires equal-length bit strings");
    BitString out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.bits_[i] = a.bits_[i] ^ b.bits_[i];
    return out;
  }

  friend BitString operator+(BitString head, const BitString& tail) {
    head.append(tail);
    return head;
  }

 private:
  static int hex_value(char ch) {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    throw InvalidArgument("hex digits must be lowercase 0-9a-f");
  }

  std::vector<std::uint8_t> bits_;
};

/// n independent fair bits, drawn 64 at a time from the engine.
inline BitString random_bits(std::size_t n, Rng& rng) {
  BitString out(n);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) word = rng.next();
    out.set(i, static_cast<std::uint8_t>(word >> 63));
    word <<= 1;
  }
  return out;
}

/// Number of positions where a and b differ.
inline std::size_t hamming_distance(const BitString& a, const BitString& b) {
  return (a ^ b).count_ones();
}

}  // namespace qelect

template <>
struct std::hash<qelect::BitString> {
  std::size_t operator()(const qelect::BitString& s) const noexcept {
    std::uint64_t h = qelect::mix64(s.size());
    std::uint64_t word = 0;
    std::size_t i = 0;
    for (auto b : s.bits()) {
      word = (word << 1) | b;
      if (++i % 64 == 0) {
        h = qelect::mix64(h ^ word);
        word = 0;
      }
    }
    return static_cast<std::size_t>(qelect::mix64(h ^ word));
  }
};
