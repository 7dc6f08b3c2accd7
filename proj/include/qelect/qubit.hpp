#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qelect/bitstring.hpp"
#include "qelect/errors.hpp"
#include "qelect/rng.hpp"

namespace qelect {

namespace testing {
struct QubitProbe;
}
namespace detail {
struct ChannelNoise;
}

enum class Basis : std::uint8_t { Rectilinear = 0, Diagonal = 1 };

inline Basis basis_from_bit(std::uint8_t b) { return b ? Basis::Diagonal : Basis::Rectilinear; }
inline std::uint8_t basis_bit(Basis b) { return static_cast<std::uint8_t>(b); }

class Qubit;
Qubit prepare(Basis basis, std::uint8_t value);
std::uint8_t measure(Qubit& q, Basis chosen, Rng& rng);

/// A conjugate-coded qubit H^basis |value>.
///
/// Only prepare() can create one and only measure() can read it. Qubits are
/// move-only and measuring consumes them; measuring twice throws.
class Qubit {
 public:
  Qubit(const Qubit&) = delete;
  Qubit& operator=(const Qubit&) = delete;
  Qubit(Qubit&& other) noexcept : basis_(other.basis_), value_(other.value_), consumed_(other.consumed_) {
    other.consumed_ = true;
  }
  Qubit& operator=(Qubit&& other) noexcept {
    basis_ = other.basis_;
    value_ = other.value_;
    consumed_ = other.consumed_;
    other.consumed_ = true;
    return *this;
  }

  bool consumed() const noexcept { return consumed_; }

 private:
  Qubit(Basis basis, std::uint8_t value) : basis_(basis), value_(value & 1) {}

  /// Channel noise acting on the stored value.
  void apply_bit_flip() noexcept { value_ ^= 1; }

  friend Qubit prepare(Basis, std::uint8_t);
  friend std::uint8_t measure(Qubit&, Basis, Rng&);
  friend struct detail::ChannelNoise;
  friend struct testing::QubitProbe;

  Basis basis_;
  std::uint8_t value_;
  bool consumed_ = false;
};

inline Qubit prepare(Basis basis, std::uint8_t value) {
  if (value > 1) throw InvalidArgument("qubit value must be 0 or 1");
  return Qubit(basis, value);
}

/// Single-particle measurement. A matching basis returns the stored value;
/// a mismatched basis returns a fair coin from rng.
inline std::uint8_t measure(Qubit& q, Basis chosen, Rng& rng) {
  if (q.consumed_) throw ProtocolViolation("qubit already measured");
  q.consumed_ = true;
  return chosen == q.basis_ ? q.value_ : rng.bit();
}

/// Conjugate coding: qubit j is H^{basis_bits[j]} |value_bits[j]>.
inline std::vector<Qubit> encode(const BitString& basis_bits, const BitString& value_bits) {
  if (basis_bits.size() != value_bits.size()) throw InvalidArgument("basis and value strings differ in length");
  if (basis_bits.empty()) throw InvalidArgument("cannot encode an empty string");
  std::vector<Qubit> out;
  out.reserve(basis_bits.size());
  for (std::size_t j = 0; j < basis_bits.size(); ++j) out.push_back(prepare(basis_from_bit(basis_bits[j]), value_bits[j]));
  return out;
}

/// In-line attacker on a quantum channel. It sees only qubits that survived
/// loss, together with their original positions, and may replace them.
class Interceptor {
 public:
  virtual ~Interceptor() = default;
  virtual void intercept(std::span<Qubit> in_flight, std::span<const std::size_t> positions, Rng& rng) = 0;
};

struct QuantumChannelConfig {
  double loss_prob = 0.0;
  double flip_prob = 0.0;
  Interceptor* interceptor = nullptr;  // non-owning; null on honest channels

  void validate() const {
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw InvalidArgument("loss_prob must lie in [0, 1]");
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw InvalidArgument("flip_prob must lie in [0, 1]");
  }
};

struct TransmissionReport {
  std::vector<std::size_t> delivered_indices;  // strictly increasing original positions
  std::vector<Qubit> qubits;                   // aligned with delivered_indices
};

namespace detail {
struct ChannelNoise {
  static void flip(Qubit& q) noexcept { q.apply_bit_flip(); }
};
}  // namespace detail

/// Sends qubits through a lossy, noisy channel. Per qubit, in order: a loss
/// draw; then the interceptor (if any) over all survivors; then a value flip
/// with flip_prob on each delivered qubit.
inline TransmissionReport transmit(std::vector<Qubit> qubits, const QuantumChannelConfig& cfg, Rng& rng) {
  cfg.validate();
  TransmissionReport report;
  for (std::size_t j = 0; j < qubits.size(); ++j) {
    if (rng.bernoulli(cfg.loss_prob)) continue;
    report.delivered_indices.push_back(j);
    report.qubits.push_back(std::move(qubits[j]));
  }
  if (cfg.interceptor != nullptr) cfg.interceptor->intercept(report.qubits, report.delivered_indices, rng);
  if (cfg.flip_prob > 0.0) {
    for (auto& q : report.qubits)
      if (rng.bernoulli(cfg.flip_prob)) detail::ChannelNoise::flip(q);
  }
  return report;
}

}  // namespace qelect
