#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qelect/aqkd.hpp"
#include "qelect/ballot.hpp"
#include "qelect/bitstring.hpp"
#include "qelect/credentials.hpp"
#include "qelect/qubit.hpp"
#include "qelect/rng.hpp"
#include "qelect/transcript.hpp"

namespace qelect {

enum class AdversaryKind {
  None,
  InterceptResend,
  ImpersonateVoter,
  ReplayBallot,
  ForgeRandomBallot,
  DishonestAbstain,
  EavesdropClassical,
};

inline std::string_view to_string(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::None: return "none";
    case AdversaryKind::InterceptResend: return "intercept-resend";
    case AdversaryKind::ImpersonateVoter: return "impersonate-voter";
    case AdversaryKind::ReplayBallot: return "replay-ballot";
    case AdversaryKind::ForgeRandomBallot: return "forge-random-ballot";
    case AdversaryKind::DishonestAbstain: return "dishonest-abstain";
    case AdversaryKind::EavesdropClassical: return "eavesdrop-classical";
  }
  return "?";
}

inline std::optional<AdversaryKind> adversary_from_string(std::string_view s) {
  for (auto k : {AdversaryKind::None, AdversaryKind::InterceptResend, AdversaryKind::ImpersonateVoter,
                 AdversaryKind::ReplayBallot, AdversaryKind::ForgeRandomBallot, AdversaryKind::DishonestAbstain,
                 AdversaryKind::EavesdropClassical})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// Which of the victim's (a, b, c) the impersonator holds.
enum class Knowledge { None, Token, Full };

inline std::string_view to_string(Knowledge k) {
  switch (k) {
    case Knowledge::None: return "none";
    case Knowledge::Token: return "token";
    case Knowledge::Full: return "full";
  }
  return "?";
}

inline std::optional<Knowledge> knowledge_from_string(std::string_view s) {
  for (auto k : {Knowledge::None, Knowledge::Token, Knowledge::Full})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

/// One adversary per scenario; fields not used by `kind` are ignored.
struct AdversaryConfig {
  AdversaryKind kind = AdversaryKind::None;
  double fraction = 1.0;              // intercept-resend: share of qubits attacked
  Knowledge knowledge = Knowledge::None;  // impersonate-voter
  std::size_t target = 0;             // impersonate-voter, dishonest-abstain: voter index
  std::size_t attempts = 0;           // forge-random-ballot: forgeries per voting round
  std::size_t rounds_to_waste = 1;    // dishonest-abstain
  std::size_t withhold = 1;           // replay-ballot: honest ballots held back in total

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("adversary fraction must lie in [0, 1]");
  }
};

// ---------------------------------------------------------------------------
// Intercept-resend

struct EveNote {
  std::size_t position;
  Basis basis;
  std::uint8_t outcome;
};

/// Measures each attacked qubit in a random basis and resends a fresh qubit
/// prepared in that basis with the observed outcome.
class InterceptResend final : public Interceptor {
 public:
  explicit InterceptResend(double fraction) : fraction_(fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidArgument("intercept fraction must lie in [0, 1]");
  }

  void intercept(std::span<Qubit> in_flight, std::span<const std::size_t> positions, Rng& rng) override {
    for (std::size_t i = 0; i < in_flight.size(); ++i) {
      if (!rng.bernoulli(fraction_)) continue;
      const auto basis = basis_from_bit(rng.bit());
      const auto outcome = measure(in_flight[i], basis, rng);
      in_flight[i] = prepare(basis, outcome);
      notes_.push_back({positions[i], basis, outcome});
    }
  }

  const std::vector<EveNote>& notes() const noexcept { return notes_; }
  void clear_notes() { notes_.clear(); }
  double fraction() const noexcept { return fraction_; }

  /// Eve's guess of the value at an original position: her outcome if she
  /// attacked it, otherwise a coin.
  std::uint8_t guess_at(std::size_t position, Rng& rng) const {
    for (const auto& n : notes_)
      if (n.position == position) return n.outcome;
    return rng.bit();
  }

 private:
  double fraction_;
  std::vector<EveNote> notes_;
};

/// Guesses an x-bit key with no access to any qubit: the public
/// announcements are independent of the key bits, so a uniform guess is
/// the best available.
inline BitString guess_without_access(std::size_t bits, Rng& rng) { return random_bits(bits, rng); }

// ---------------------------------------------------------------------------
// Impersonation

struct ImpersonationResult {
  SessionOutcome outcome = SessionOutcome::ConfirmationRejected;
  std::optional<ConfirmRejection> rejection;
  BitString key;  // key shared with the counter, when accepted

  bool accepted() const noexcept { return outcome == SessionOutcome::Completed; }
};

/// Builds the confirmation credential the impersonator will present: known
/// components are copied from the victim, the rest are uniform guesses.
inline AqkdCredential impersonator_credential(const VoterCredential& victim, Knowledge knowledge, std::size_t m,
                                              Rng& rng) {
  auto guess = AqkdCredential::generate(m, rng);
  if (knowledge == Knowledge::Token || knowledge == Knowledge::Full) guess.x = victim.a;
  if (knowledge == Knowledge::Full) {
    guess.y = victim.b;
    guess.z = victim.c;
  }
  return guess;
}

/// Runs Steps 4 to 6 with the attacker's own qubits against the counter
/// session opened for the victim, then presents the forged confirmation.
/// The attacker never aborts on the check, since its qubits are its own.
inline ImpersonationResult impersonate_voter(const VoterCredential& victim, Knowledge knowledge,
                                             CounterSession& session, TokenRegistry& registry,
                                             const AqkdParams& params, Rng& rng, const SessionLog& log = {}) {
  AqkdUser attacker(impersonator_credential(victim, knowledge, params.m, rng), params.m);
  (void)attacker.request();
  auto attack_params = params;
  attack_params.tolerance = 1.0;
  auto res = run_forwarded_session(attacker, session, registry, attack_params, QuantumChannelConfig{}, rng, log);
  ImpersonationResult out;
  out.outcome = res.outcome;
  out.rejection = res.rejection;
  if (res.completed()) out.key = res.user_key;
  return out;
}

// ---------------------------------------------------------------------------
// Ballot replay

/// Sees every anonymous ballot, duplicates them within the round, holds back
/// up to `withhold` honest ones over the whole election, and re-injects
/// everything it has seen in later rounds.
class BallotReplayer {
 public:
  explicit BallotReplayer(std::size_t withhold) : withhold_(withhold) {}

  struct RoundPlan {
    std::vector<BallotMessage> deliver;       // honest ballots let through
    std::vector<BallotMessage> duplicates;    // same-round copies
    std::vector<BallotMessage> stale_withheld;  // held back in an earlier round, never delivered
    std::vector<BallotMessage> stale_seen;      // delivered in an earlier round
    std::size_t withheld = 0;                   // held back this round
  };

  RoundPlan intercept_round(std::vector<BallotMessage> honest, Rng& rng) {
    RoundPlan plan;
    plan.stale_withheld = std::move(withheld_);
    plan.stale_seen = delivered_;
    withheld_.clear();
    rng.shuffle(honest);
    const auto hold = std::min(withhold_, honest.size());
    withhold_ -= hold;
    plan.withheld = hold;
    for (std::size_t i = 0; i < honest.size(); ++i) {
      if (i < hold) {
        withheld_.push_back(honest[i]);
      } else {
        plan.duplicates.push_back(honest[i]);
        delivered_.push_back(honest[i]);
        plan.deliver.push_back(std::move(honest[i]));
      }
    }
    return plan;
  }

 private:
  std::size_t withhold_;
  std::vector<BallotMessage> withheld_;
  std::vector<BallotMessage> delivered_;
};

// ---------------------------------------------------------------------------
// Random forgery

/// Forged ballots with a uniform s-bit key half and ciphertext.
inline std::vector<BallotMessage> forge_random_ballots(std::size_t attempts, std::size_t s, Rng& rng) {
  std::vector<BallotMessage> out;
  out.reserve(attempts);
  for (std::size_t i = 0; i < attempts; ++i) out.push_back({random_bits(s, rng), random_bits(s, rng)});
  return out;
}

/// A random ciphertext presented under a known, not yet used key half.
inline BallotMessage forge_under_key(const BitString& key_left, std::size_t s, Rng& rng) {
  return {key_left, random_bits(s, rng)};
}

// ---------------------------------------------------------------------------
// Classical eavesdropping

/// Records visible to a passive classical eavesdropper: the anonymous
/// classical channel and public broadcasts. Authenticated channels are
/// confidential and quantum traffic is not classical.
inline std::vector<Record> eavesdropper_view(const Transcript& t) {
  std::vector<Record> out;
  for (const auto& r : t.records())
    if (r.channel == Channel::AnonymousClassical || r.channel == Channel::PublicBroadcast) out.push_back(r);
  return out;
}

}  // namespace qelect
