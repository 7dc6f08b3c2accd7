#pragma once

// Authority-certified anonymous key distribution between an anonymous user,
// the administrator who certifies the user's credential, and the counter who
// ends up sharing a key with the user without learning who the user is.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qelect/bitstring.hpp"
#include "qelect/credentials.hpp"
#include "qelect/ecc.hpp"
#include "qelect/errors.hpp"
#include "qelect/otp.hpp"
#include "qelect/qubit.hpp"
#include "qelect/rng.hpp"
#include "qelect/transcript.hpp"

namespace qelect {

/// 0 at every checked position, 1 elsewhere.
inline BitString check_indicator(std::span<const std::size_t> sigma, std::size_t n) {
  BitString f(n);
  for (std::size_t j = 0; j < n; ++j) f.set(j, 1);
  for (auto p : sigma) {
    if (p >= n) throw InvalidArgument("check position out of range");
    f.set(p, 0);
  }
  return f;
}

/// Inverse of check_indicator: the increasing list of zero positions.
inline std::vector<std::size_t> check_positions(const BitString& f) {
  std::vector<std::size_t> sigma;
  for (std::size_t j = 0; j < f.size(); ++j)
    if (f[j] == 0) sigma.push_back(j);
  return sigma;
}

/// What the counter publishes after measuring: which positions arrived, the
/// basis used on each, the check positions and the outcomes there.
struct CheckAnnouncement {
  std::vector<std::size_t> delivered_indices;
  BitString bases;  // aligned with delivered_indices
  std::vector<std::size_t> sigma;
  BitString f;
  BitString F;  // outcomes at sigma, in order

  /// Basis the counter used at an original position, if it arrived.
  std::optional<Basis> basis_at(std::size_t position) const {
    auto it = std::lower_bound(delivered_indices.begin(), delivered_indices.end(), position);
    if (it == delivered_indices.end() || *it != position) return std::nullopt;
    return basis_from_bit(bases[static_cast<std::size_t>(it - delivered_indices.begin())]);
  }

  nlohmann::json to_json() const {
    BitString mask(f.size());
    for (auto p : delivered_indices) mask.set(p, 1);
    return {{"delivered", mask.serialize()}, {"bases", bases.serialize()}, {"f", f.serialize()},
            {"F", F.serialize()}};
  }
};

/// Positions outside sigma, increasing. These carry the key.
inline std::vector<std::size_t> key_positions(const BitString& f) {
  std::vector<std::size_t> e;
  for (std::size_t j = 0; j < f.size(); ++j)
    if (f[j] == 1) e.push_back(j);
  return e;
}

struct BasisConfirmation {
  BitString x_token;
  BitString sealed;                  // E_z[y || r3]
  std::optional<BitString> z_block;  // G xor ECC(final key), reconciliation variant only

  nlohmann::json to_json() const {
    nlohmann::json j{{"x", x_token.serialize()}, {"Y", sealed.serialize()}};
    if (z_block) j["Z"] = z_block->serialize();
    return j;
  }
};

enum class AbortReason { None, TooFewDelivered, Undecidable, ErrorRateExceeded, InsufficientSift };

inline std::string_view to_string(AbortReason r) {
  switch (r) {
    case AbortReason::None: return "none";
    case AbortReason::TooFewDelivered: return "too-few-delivered";
    case AbortReason::Undecidable: return "undecidable";
    case AbortReason::ErrorRateExceeded: return "error-rate-exceeded";
    case AbortReason::InsufficientSift: return "insufficient-sift";
  }
  return "?";
}

struct CheckResult {
  bool accepted = false;
  std::size_t decisive = 0;  // checked positions where the counter's basis matched
  std::size_t errors = 0;
  AbortReason reason = AbortReason::None;

  double error_rate() const { return decisive == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(decisive); }
};

enum class UserPhase { Init, SentRequest, SentQubits, Verified, Confirmed, Reconciled, Aborted };

inline std::string_view to_string(UserPhase p) {
  switch (p) {
    case UserPhase::Init: return "Init";
    case UserPhase::SentRequest: return "SentRequest";
    case UserPhase::SentQubits: return "SentQubits";
    case UserPhase::Verified: return "Verified";
    case UserPhase::Confirmed: return "Confirmed";
    case UserPhase::Reconciled: return "Reconciled";
    case UserPhase::Aborted: return "Aborted";
  }
  return "?";
}

/// The anonymous user's side of one session.
class AqkdUser {
 public:
  AqkdUser(AqkdCredential credential, std::size_t m) : credential_(std::move(credential)), m_(m) {
    if (m_ == 0) throw InvalidArgument("security parameter m must be positive");
    if (!credential_.well_formed(m_)) throw InvalidArgument("credential lengths do not match m");
  }

  /// Step 1: the request token for the administrator.
  const BitString& request() {
    require(UserPhase::Init, "request");
    phase_ = UserPhase::SentRequest;
    return credential_.p;
  }

  /// Step 4: draws r1 (bases) and r2 (values) and prepares 3m qubits.
  std::vector<Qubit> prepare_qubits(Rng& rng) {
    require(UserPhase::SentRequest, "prepare_qubits");
    r1_ = random_bits(3 * m_, rng);
    r2_ = random_bits(3 * m_, rng);
    phase_ = UserPhase::SentQubits;
    return encode(r1_, r2_);
  }

  TransmissionReport send_qubits(const QuantumChannelConfig& channel, Rng& rng) {
    return transmit(prepare_qubits(rng), channel, rng);
  }

  /// Step 6 check: compares the published outcomes with r2 on the checked
  /// positions where the counter's basis equals r1.
  CheckResult verify(const CheckAnnouncement& ann, double tolerance) {
    require(UserPhase::SentQubits, "verify");
    validate_announcement(ann);
    CheckResult res;
    for (std::size_t k = 0; k < ann.sigma.size(); ++k) {
      const auto pos = ann.sigma[k];
      auto basis = ann.basis_at(pos);
      if (!basis) throw ProtocolViolation("checked position was not delivered");
      if (basis_bit(*basis) != r1_[pos]) continue;
      ++res.decisive;
      if (ann.F[k] != r2_[pos]) ++res.errors;
    }
    if (res.decisive == 0) {
      res.reason = AbortReason::Undecidable;
    } else if (res.error_rate() > tolerance) {
      res.reason = AbortReason::ErrorRateExceeded;
    } else {
      res.accepted = true;
    }
    phase_ = res.accepted ? UserPhase::Verified : UserPhase::Aborted;
    return res;
  }

  /// r3 marks, over the 2m unchecked positions, where the counter measured in
  /// the preparation basis; lost positions are 0. g is r2 on those positions.
  BasisConfirmation confirm(const CheckAnnouncement& ann) {
    require(UserPhase::Verified, "confirm");
    const auto e = key_positions(ann.f);
    r3_ = BitString(e.size());
    sifted_ = BitString();
    for (std::size_t j = 0; j < e.size(); ++j) {
      auto basis = ann.basis_at(e[j]);
      if (basis && basis_bit(*basis) == r1_[e[j]]) {
        r3_.set(j, 1);
        sifted_.push_back(r2_[e[j]]);
      }
    }
    confirmation_ = BasisConfirmation{credential_.x, otp_encrypt(credential_.z, credential_.y + r3_), std::nullopt};
    phase_ = UserPhase::Confirmed;
    return *confirmation_;
  }

  /// Key redistribution: pick a fresh final key, encode it, and mask the
  /// codeword with the leading sifted bits. Aborts when g is too short.
  std::optional<BasisConfirmation> reconcile(std::size_t key_bits, const EccConfig& ecc, Rng& rng) {
    require(UserPhase::Confirmed, "reconcile");
    ecc.validate();
    if (key_bits == 0) throw InvalidArgument("final key length must be positive");
    if (sifted_.size() < ecc.codeword_bits(key_bits)) {
      phase_ = UserPhase::Aborted;
      abort_reason_ = AbortReason::InsufficientSift;
      return std::nullopt;
    }
    final_key_ = random_bits(key_bits, rng);
    const auto codeword = ecc_encode(final_key_, ecc);
    confirmation_->z_block = sifted_.prefix(codeword.size()) ^ codeword;
    phase_ = UserPhase::Reconciled;
    return *confirmation_;
  }

  void abort(AbortReason reason) {
    phase_ = UserPhase::Aborted;
    abort_reason_ = reason;
  }

  UserPhase phase() const noexcept { return phase_; }
  AbortReason abort_reason() const noexcept { return abort_reason_; }
  std::size_t m() const noexcept { return m_; }
  const AqkdCredential& credential() const noexcept { return credential_; }
  const BitString& basis_bits() const noexcept { return r1_; }
  const BitString& value_bits() const noexcept { return r2_; }
  const BitString& r3() const noexcept { return r3_; }
  const BitString& sifted() const noexcept { return sifted_; }
  const BitString& final_key() const noexcept { return final_key_; }

 private:
  void require(UserPhase expected, std::string_view op) const {
    if (phase_ != expected)
      throw ProtocolViolation(std::string(op) + " called in phase " + std::string(to_string(phase_)));
  }

  void validate_announcement(const CheckAnnouncement& ann) const {
    if (ann.f.size() != 3 * m_) throw ProtocolViolation("announcement indicator has wrong length");
    if (ann.sigma != check_positions(ann.f)) throw ProtocolViolation("announcement sigma disagrees with f");
    if (ann.F.size() != ann.sigma.size()) throw ProtocolViolation("announcement F does not match sigma");
    if (ann.bases.size() != ann.delivered_indices.size()) throw ProtocolViolation("announcement bases misaligned");
  }

  AqkdCredential credential_;
  std::size_t m_;
  UserPhase phase_ = UserPhase::Init;
  AbortReason abort_reason_ = AbortReason::None;
  BitString r1_, r2_, r3_;
  BitString sifted_;
  BitString final_key_;
  std::optional<BasisConfirmation> confirmation_;
};

/// What the administrator sends the counter for one session: the sealed
/// credential X = E_{k_bc}[k_c || x || y || z], plus the fresh (k_c, k_bc)
/// pair both of them hold out of band.
struct KeyForward {
  BitString k_c;
  BitString k_bc;
  BitString sealed;
};

inline KeyForward seal_for_counter(const BitString& x, const BitString& y, const BitString& z, std::size_t m,
                                   Rng& rng) {
  KeyForward fw;
  fw.k_c = random_bits(m, rng);
  const auto plain = fw.k_c + x + y + z;
  fw.k_bc = random_bits(plain.size(), rng);
  fw.sealed = otp_encrypt(fw.k_bc, plain);
  return fw;
}

/// Administrator role in a stand-alone session: holds issued credentials
/// keyed by request token, each usable once.
class AqkdAdministrator {
 public:
  explicit AqkdAdministrator(std::size_t m) : m_(m) {}

  void issue(const AqkdCredential& cred) {
    if (!cred.well_formed(m_)) throw InvalidArgument("credential lengths do not match m");
    table_.emplace(cred.p, Entry{cred, false});
  }

  /// Step 2. nullopt means the request was rejected (unknown, wrong length,
  /// or already used).
  std::optional<KeyForward> authorize(const BitString& p, Rng& rng) {
    if (p.size() != AqkdCredential::p_bits(m_)) return std::nullopt;
    auto it = table_.find(p);
    if (it == table_.end() || it->second.consumed) return std::nullopt;
    it->second.consumed = true;
    const auto& c = it->second.credential;
    return seal_for_counter(c.x, c.y, c.z, m_, rng);
  }

 private:
  struct Entry {
    AqkdCredential credential;
    bool consumed;
  };
  std::size_t m_;
  std::unordered_map<BitString, Entry> table_;
};

enum class ConfirmRejection { Replay, UnknownToken, Malformed, SealMismatch, InsufficientSift };

inline std::string_view to_string(ConfirmRejection r) {
  switch (r) {
    case ConfirmRejection::Replay: return "replay";
    case ConfirmRejection::UnknownToken: return "unknown-token";
    case ConfirmRejection::Malformed: return "malformed";
    case ConfirmRejection::SealMismatch: return "seal-mismatch";
    case ConfirmRejection::InsufficientSift: return "insufficient-sift";
  }
  return "?";
}

/// The counter's registry of confirmation tokens it has accepted, shared by
/// all of its sessions. Single writer.
class TokenRegistry {
 public:
  bool contains(const BitString& x) const { return accepted_.contains(x); }
  void accept(const BitString& x) {
    if (!accepted_.insert(x).second) throw ProtocolViolation("token accepted twice");
  }
  std::size_t size() const noexcept { return accepted_.size(); }

 private:
  std::unordered_set<BitString> accepted_;
};

struct ConfirmOutcome {
  std::optional<BitString> sifted;
  ConfirmRejection rejection = ConfirmRejection::Malformed;
  bool accepted() const noexcept { return sifted.has_value(); }
};

/// The counter's side of one session.
class CounterSession {
 public:
  explicit CounterSession(std::size_t m) : m_(m) {
    if (m_ == 0) throw InvalidArgument("security parameter m must be positive");
  }

  /// Step 3: decrypt X and check the embedded k_c.
  bool receive_forward(const BitString& sealed, const BitString& k_c, const BitString& k_bc) {
    if (sealed.size() != k_bc.size() || sealed.size() != (1 + 11) * m_ || k_c.size() != m_) return false;
    const auto plain = otp_decrypt(k_bc, sealed);
    if (plain.prefix(m_) != k_c) return false;
    x_ = plain.slice(m_, AqkdCredential::x_bits(m_));
    y_ = plain.slice(4 * m_, AqkdCredential::y_bits(m_));
    z_ = plain.slice(7 * m_, AqkdCredential::z_bits(m_));
    forwarded_ = true;
    return true;
  }

  /// Step 5. Measures every delivered qubit in a random basis and picks m
  /// check positions uniformly among the delivered ones. nullopt when fewer
  /// than m qubits arrived.
  std::optional<CheckAnnouncement> measure_and_announce(TransmissionReport report, Rng& rng) {
    const std::size_t n = 3 * m_;
    for (std::size_t i = 0; i < report.delivered_indices.size(); ++i) {
      if (report.delivered_indices[i] >= n || (i > 0 && report.delivered_indices[i] <= report.delivered_indices[i - 1]))
        throw InvalidArgument("delivered indices must be increasing and below 3m");
    }
    CheckAnnouncement ann;
    ann.delivered_indices = report.delivered_indices;
    ann.bases = BitString(report.qubits.size());
    outcomes_ = BitString(report.qubits.size());
    for (std::size_t i = 0; i < report.qubits.size(); ++i) {
      const auto b = rng.bit();
      ann.bases.set(i, b);
      outcomes_.set(i, measure(report.qubits[i], basis_from_bit(b), rng));
    }
    if (report.qubits.size() < m_) return std::nullopt;

    // Partial Fisher-Yates over delivered slots gives a uniform m-subset.
    std::vector<std::size_t> slots(report.qubits.size());
    for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(slots.size() - i));
      std::swap(slots[i], slots[j]);
    }
    std::vector<std::size_t> chosen(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(m_));
    std::sort(chosen.begin(), chosen.end());
    for (auto slot : chosen) {
      ann.sigma.push_back(ann.delivered_indices[slot]);
      ann.F.push_back(outcomes_[slot]);
    }
    ann.f = check_indicator(ann.sigma, n);
    announcement_ = ann;
    return ann;
  }

  /// Step 7: token checks, unseal, then extract G' from the flagged
  /// positions. Marks the token accepted on success.
  ConfirmOutcome accept_confirmation(const BasisConfirmation& conf, TokenRegistry& registry) {
    ConfirmOutcome out;
    if (registry.contains(conf.x_token)) {
      out.rejection = ConfirmRejection::Replay;
      return out;
    }
    if (!forwarded_ || conf.x_token != x_) {
      out.rejection = ConfirmRejection::UnknownToken;
      return out;
    }
    if (!announcement_ || conf.sealed.size() != z_.size()) {
      out.rejection = ConfirmRejection::Malformed;
      return out;
    }
    const auto opened = otp_decrypt(z_, conf.sealed);
    if (opened.prefix(y_.size()) != y_) {
      out.rejection = ConfirmRejection::SealMismatch;
      return out;
    }
    const auto r3 = opened.slice(y_.size(), 2 * m_);
    const auto e = key_positions(announcement_->f);
    BitString g;
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (r3[j] == 0) continue;
      auto it = std::lower_bound(announcement_->delivered_indices.begin(), announcement_->delivered_indices.end(), e[j]);
      if (it == announcement_->delivered_indices.end() || *it != e[j]) continue;
      g.push_back(outcomes_[static_cast<std::size_t>(it - announcement_->delivered_indices.begin())]);
    }
    registry.accept(conf.x_token);
    sifted_ = g;
    out.sifted = std::move(g);
    return out;
  }

  /// D' = Z xor G', decoded. nullopt if G' is shorter than Z or Z is not a
  /// whole number of code blocks.
  std::optional<BitString> reconcile(const BitString& z_block, const EccConfig& ecc) {
    if (!sifted_) throw ProtocolViolation("reconcile before an accepted confirmation");
    if (z_block.empty() || z_block.size() > sifted_->size() || z_block.size() % ecc.r != 0) return std::nullopt;
    final_key_ = ecc_decode(z_block ^ sifted_->prefix(z_block.size()), ecc);
    return final_key_;
  }

  bool forwarded() const noexcept { return forwarded_; }
  const std::optional<CheckAnnouncement>& announcement() const noexcept { return announcement_; }
  const std::optional<BitString>& sifted() const noexcept { return sifted_; }
  const BitString& final_key() const noexcept { return final_key_; }
  const BitString& expected_token() const noexcept { return x_; }

 private:
  std::size_t m_;
  bool forwarded_ = false;
  BitString x_, y_, z_;
  BitString outcomes_;
  std::optional<CheckAnnouncement> announcement_;
  std::optional<BitString> sifted_;
  BitString final_key_;
};

// ---------------------------------------------------------------------------
// Session driver

struct AqkdParams {
  std::size_t m = 64;
  double tolerance = 0.05;
  EccConfig ecc{};
  std::size_t key_bits = 128;  // final key length; 0 runs the plain variant (key = G)

  void validate() const {
    if (m == 0) throw InvalidArgument("m must be positive");
    if (!(tolerance >= 0.0 && tolerance <= 1.0)) throw InvalidArgument("tolerance must lie in [0, 1]");
    ecc.validate();
  }
};

enum class SessionOutcome {
  Completed,
  RequestRejected,
  ForwardCheckFailed,
  TooFewDelivered,
  Undecidable,
  ErrorRateExceeded,
  InsufficientSift,
  ConfirmationRejected,
  ReconcileFailed,
};

inline std::string_view to_string(SessionOutcome o) {
  switch (o) {
    case SessionOutcome::Completed: return "completed";
    case SessionOutcome::RequestRejected: return "request-rejected";
    case SessionOutcome::ForwardCheckFailed: return "forward-check-failed";
    case SessionOutcome::TooFewDelivered: return "too-few-delivered";
    case SessionOutcome::Undecidable: return "undecidable";
    case SessionOutcome::ErrorRateExceeded: return "error-rate-exceeded";
    case SessionOutcome::InsufficientSift: return "insufficient-sift";
    case SessionOutcome::ConfirmationRejected: return "confirmation-rejected";
    case SessionOutcome::ReconcileFailed: return "reconcile-failed";
  }
  return "?";
}

struct SessionResult {
  SessionOutcome outcome = SessionOutcome::Completed;
  std::optional<ConfirmRejection> rejection;
  std::size_t delivered = 0;
  CheckResult check;
  std::size_t sift_bits = 0;
  BitString user_key;
  BitString counter_key;

  bool completed() const noexcept { return outcome == SessionOutcome::Completed; }
  bool keys_agree() const { return completed() && user_key == counter_key; }
  /// Aborted by the user's eavesdropping check (including undecidable).
  bool detected() const noexcept {
    return outcome == SessionOutcome::ErrorRateExceeded || outcome == SessionOutcome::Undecidable;
  }
};

/// Where session messages are logged, and under which voter label the
/// user's private events are recorded.
struct SessionLog {
  Transcript* transcript = nullptr;
  std::string user_label;
};

/// Steps 4 to 7 (plus redistribution when params.key_bits > 0), for a
/// session whose forward has already reached the counter.
inline SessionResult run_forwarded_session(AqkdUser& user, CounterSession& counter, TokenRegistry& registry,
                                           const AqkdParams& params, const QuantumChannelConfig& channel, Rng& rng,
                                           const SessionLog& log = {}) {
  SessionResult res;
  Transcript* t = log.transcript;
  const std::string counter_name(party::kCounter);

  auto report = user.send_qubits(channel, rng);
  res.delivered = report.delivered_indices.size();
  if (t) t->anonymous(Channel::AnonymousQuantum, "aqkd.qubits", counter_name,
                      {{"sent", 3 * params.m}, {"delivered", res.delivered}});

  auto ann = counter.measure_and_announce(std::move(report), rng);
  if (!ann) {
    if (t) t->broadcast("aqkd.restart", counter_name, {{"reason", to_string(AbortReason::TooFewDelivered)}});
    user.abort(AbortReason::TooFewDelivered);
    res.outcome = SessionOutcome::TooFewDelivered;
    return res;
  }
  if (t) t->broadcast("aqkd.announce", counter_name, ann->to_json());

  res.check = user.verify(*ann, params.tolerance);
  if (t) t->local("aqkd.check", log.user_label,
                  {{"decisive", res.check.decisive}, {"errors", res.check.errors},
                   {"accepted", res.check.accepted}, {"reason", to_string(res.check.reason)}});
  if (!res.check.accepted) {
    res.outcome = res.check.reason == AbortReason::Undecidable ? SessionOutcome::Undecidable
                                                               : SessionOutcome::ErrorRateExceeded;
    return res;
  }

  auto conf = user.confirm(*ann);
  res.sift_bits = user.sifted().size();
  if (params.key_bits > 0) {
    auto extended = user.reconcile(params.key_bits, params.ecc, rng);
    if (!extended) {
      if (t) t->local("aqkd.abort", log.user_label, {{"reason", to_string(AbortReason::InsufficientSift)},
                                                      {"sift_bits", res.sift_bits}});
      res.outcome = SessionOutcome::InsufficientSift;
      return res;
    }
    conf = std::move(*extended);
  }
  if (t) t->anonymous(Channel::AnonymousClassical, "aqkd.confirm", counter_name, conf.to_json());

  auto accepted = counter.accept_confirmation(conf, registry);
  if (!accepted.accepted()) {
    if (t) t->local("aqkd.reject", counter_name, {{"reason", to_string(accepted.rejection)}});
    res.outcome = SessionOutcome::ConfirmationRejected;
    res.rejection = accepted.rejection;
    return res;
  }
  if (params.key_bits > 0) {
    auto key = counter.reconcile(*conf.z_block, params.ecc);
    if (!key) {
      if (t) t->local("aqkd.reject", counter_name, {{"reason", "reconcile-failed"}});
      res.outcome = SessionOutcome::ReconcileFailed;
      return res;
    }
    res.user_key = user.final_key();
    res.counter_key = *key;
  } else {
    res.user_key = user.sifted();
    res.counter_key = *accepted.sifted;
  }
  if (t) t->local("aqkd.accept", counter_name, {{"key_bits", res.counter_key.size()}});
  res.outcome = SessionOutcome::Completed;
  return res;
}

/// A complete stand-alone session: fresh credential, administrator
/// authorisation, forward, then the anonymous part.
inline SessionResult run_aqkd_session(const AqkdParams& params, const QuantumChannelConfig& channel, Rng& rng,
                                      const SessionLog& log = {}) {
  params.validate();
  auto cred = AqkdCredential::generate(params.m, rng);
  AqkdAdministrator admin(params.m);
  admin.issue(cred);
  AqkdUser user(cred, params.m);
  TokenRegistry registry;
  CounterSession counter(params.m);
  SessionResult res;

  auto forward = admin.authorize(user.request(), rng);
  if (!forward) {
    res.outcome = SessionOutcome::RequestRejected;
    return res;
  }
  if (!counter.receive_forward(forward->sealed, forward->k_c, forward->k_bc)) {
    res.outcome = SessionOutcome::ForwardCheckFailed;
    return res;
  }
  return run_forwarded_session(user, counter, registry, params, channel, rng, log);
}

}  // namespace qelect
