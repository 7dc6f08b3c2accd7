#pragma once

#include <cstddef>
#include <unordered_set>
#include <vector>

#include "qelect/bitstring.hpp"
#include "qelect/errors.hpp"
#include "qelect/rng.hpp"

namespace qelect {

/// Key pre-shared between an anonymous user and the administrator.
///
/// For security parameter m: p is m bits, x and y are 3m bits, z is 5m bits.
/// z seals y || r3 (3m + 2m bits) with a one-time pad, which fixes its length.
struct AqkdCredential {
  BitString p;  // request token shown to the administrator
  BitString x;  // confirmation token shown to the counter
  BitString y;  // sealed check value
  BitString z;  // pad for the basis confirmation

  static std::size_t p_bits(std::size_t m) { return m; }
  static std::size_t x_bits(std::size_t m) { return 3 * m; }
  static std::size_t y_bits(std::size_t m) { return 3 * m; }
  static std::size_t z_bits(std::size_t m) { return 5 * m; }
  static std::size_t total_bits(std::size_t m) { return 12 * m; }

  static AqkdCredential generate(std::size_t m, Rng& rng) {
    if (m == 0) throw InvalidArgument("security parameter m must be positive");
    return {random_bits(p_bits(m), rng), random_bits(x_bits(m), rng), random_bits(y_bits(m), rng),
            random_bits(z_bits(m), rng)};
  }

  /// x || y || z, the part the administrator forwards to the counter.
  BitString forwarded() const { return x + y + z; }

  bool well_formed(std::size_t m) const {
    return p.size() == p_bits(m) && x.size() == x_bits(m) && y.size() == y_bits(m) && z.size() == z_bits(m);
  }

  friend bool operator==(const AqkdCredential&, const AqkdCredential&) = default;
};

/// Voter key k_bj = (k, a, b, c). k authenticates the voter to the
/// administrator; (a, b, c) take the (x, y, z) roles during key distribution.
struct VoterCredential {
  BitString k;
  BitString a;
  BitString b;
  BitString c;

  static VoterCredential generate(std::size_t m, Rng& rng) {
    auto cred = AqkdCredential::generate(m, rng);
    return {std::move(cred.p), std::move(cred.x), std::move(cred.y), std::move(cred.z)};
  }

  AqkdCredential as_aqkd() const { return {k, a, b, c}; }

  friend bool operator==(const VoterCredential&, const VoterCredential&) = default;
};

/// Draws `count` voter credentials whose 4 * count component strings are
/// pairwise distinct, redrawing any credential that collides with an
/// earlier one. `taken` carries strings already in use (previous rounds).
inline std::vector<VoterCredential> issue_unique_credentials(std::size_t count, std::size_t m, Rng& rng,
                                                             std::unordered_set<BitString>& taken) {
  std::vector<VoterCredential> out;
  out.reserve(count);
  while (out.size() < count) {
    auto cred = VoterCredential::generate(m, rng);
    const BitString* parts[] = {&cred.k, &cred.a, &cred.b, &cred.c};
    bool clash = false;
    for (std::size_t i = 0; i < 4 && !clash; ++i) {
      clash = taken.contains(*parts[i]);
      for (std::size_t j = 0; j < i && !clash; ++j) clash = *parts[i] == *parts[j];
    }
    if (clash) continue;
    for (const auto* part : parts) taken.insert(*part);
    out.push_back(std::move(cred));
  }
  return out;
}

inline std::vector<VoterCredential> issue_unique_credentials(std::size_t count, std::size_t m, Rng& rng) {
  std::unordered_set<BitString> taken;
  return issue_unique_credentials(count, m, rng, taken);
}

}  // namespace qelect
