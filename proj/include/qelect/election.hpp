#pragma once

// Four-phase election: setup, authentication, per-voter anonymous key
// distribution, anonymous voting with re-vote rounds, and publication.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qelect/adversaries.hpp"
#include "qelect/aqkd.hpp"
#include "qelect/ballot.hpp"
#include "qelect/bitstring.hpp"
#include "qelect/credentials.hpp"
#include "qelect/ecc.hpp"
#include "qelect/errors.hpp"
#include "qelect/qubit.hpp"
#include "qelect/rng.hpp"
#include "qelect/transcript.hpp"

namespace qelect {

enum class ElectionPhase { Setup, Authentication, KeyDistribution, Voting, Published };

inline std::string_view to_string(ElectionPhase p) {
  switch (p) {
    case ElectionPhase::Setup: return "Setup";
    case ElectionPhase::Authentication: return "Authentication";
    case ElectionPhase::KeyDistribution: return "KeyDistribution";
    case ElectionPhase::Voting: return "Voting";
    case ElectionPhase::Published: return "Published";
  }
  return "?";
}

/// Deliberate misbehaviour by an otherwise semi-honest party.
enum class FaultInjection { None, CounterDropsBallot };

inline std::string_view to_string(FaultInjection f) {
  return f == FaultInjection::CounterDropsBallot ? "counter-drops-ballot" : "none";
}

struct ElectionConfig {
  std::size_t s = 64;
  std::size_t m = 128;
  std::size_t voters = 10;
  std::vector<std::string> candidates{"A", "B", "C", "D"};
  double loss_prob = 0.0;
  double flip_prob = 0.0;
  std::size_t ecc_r = 5;
  std::optional<double> tolerance;  // unset: 0.05 on a noiseless channel, flip_prob + 0.03 otherwise
  std::size_t retry_cap = 3;
  AdversaryConfig adversary;
  FaultInjection fault = FaultInjection::None;
  std::vector<std::size_t> choices;  // candidate index per voter; drawn at random when empty
  bool test_scale = false;           // lifts the s >= 64 and negligibility gates for small-s tests

  double effective_tolerance() const {
    if (tolerance) return *tolerance;
    return flip_prob == 0.0 ? 0.05 : flip_prob + 0.03;
  }

  void validate() const {
    if (s == 0) throw InvalidArgument("s must be positive");
    if (m == 0) throw InvalidArgument("m must be positive");
    if (candidates.empty()) throw InvalidArgument("at least one candidate is required");
    if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw InvalidArgument("loss_prob must lie in [0, 1]");
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw InvalidArgument("flip_prob must lie in [0, 1]");
    if (tolerance && !(*tolerance >= 0.0 && *tolerance <= 1.0)) throw InvalidArgument("tolerance must lie in [0, 1]");
    EccConfig{ecc_r}.validate();
    adversary.validate();
    if (!choices.empty() && choices.size() != voters) throw InvalidArgument("choices must list one entry per voter");
    for (auto c : choices)
      if (c >= candidates.size()) throw InvalidArgument("choice index out of range");
    if ((adversary.kind == AdversaryKind::ImpersonateVoter || adversary.kind == AdversaryKind::DishonestAbstain) &&
        adversary.target >= voters)
      throw InvalidArgument("adversary target is not a voter");
  }
};

enum class Inclusion { NotVoted, Confirmed, Missing };

inline std::string_view to_string(Inclusion i) {
  switch (i) {
    case Inclusion::NotVoted: return "not-voted";
    case Inclusion::Confirmed: return "confirmed";
    case Inclusion::Missing: return "missing";
  }
  return "?";
}

struct Voter {
  std::string id;
  VoterCredential credential;
  std::size_t m = 0;
  std::size_t choice = 0;
  std::optional<BitString> key;      // final key from this round's distribution
  std::vector<BitString> keys_left;  // K_L of every key this voter obtained
  std::optional<BallotMessage> last_cast;
  bool voted = false;  // own remark appeared in a verification set
  bool flagged = false;
  std::size_t failed_rounds = 0;
  Inclusion inclusion = Inclusion::NotVoted;
};

/// Administrator's list of verified voters for the current round.
struct VerifiedRow {
  std::size_t entry;
  std::string id;
  std::size_t voter;  // index into the voter list
};

struct SessionStats {
  std::size_t sessions = 0;
  std::size_t completed = 0;
  std::map<std::string, std::size_t> outcomes;
  std::size_t decisive = 0;
  std::size_t check_errors = 0;
  std::size_t sift_bits = 0;
  std::size_t key_mismatches = 0;
  std::size_t key_collisions = 0;

  void add(const SessionResult& r) {
    ++sessions;
    ++outcomes[std::string(to_string(r.outcome))];
    decisive += r.check.decisive;
    check_errors += r.check.errors;
    sift_bits += r.sift_bits;
    if (r.completed()) {
      ++completed;
      if (r.user_key != r.counter_key) ++key_mismatches;
    }
  }

  void merge(const SessionStats& o) {
    sessions += o.sessions;
    completed += o.completed;
    for (const auto& [k, v] : o.outcomes) outcomes[k] += v;
    decisive += o.decisive;
    check_errors += o.check_errors;
    sift_bits += o.sift_bits;
    key_mismatches += o.key_mismatches;
    key_collisions += o.key_collisions;
  }

  nlohmann::json to_json() const {
    return {{"sessions", sessions},         {"completed", completed},       {"outcomes", outcomes},
            {"decisive_checks", decisive},  {"check_errors", check_errors}, {"sift_bits", sift_bits},
            {"key_mismatches", key_mismatches}, {"key_collisions", key_collisions}};
  }
};

/// Where an anonymous ballot came from; known to the simulator only.
enum class BallotOrigin { Honest, Duplicate, StaleWithheld, StaleSeen, Forged, Impersonator };

inline std::string_view to_string(BallotOrigin o) {
  switch (o) {
    case BallotOrigin::Honest: return "honest";
    case BallotOrigin::Duplicate: return "duplicate";
    case BallotOrigin::StaleWithheld: return "cross-round-withheld";
    case BallotOrigin::StaleSeen: return "cross-round-seen";
    case BallotOrigin::Forged: return "forged";
    case BallotOrigin::Impersonator: return "impersonator";
  }
  return "?";
}

struct BallotStats {
  // origin -> outcome ("counted" or a rejection reason) -> count
  std::map<std::string, std::map<std::string, std::size_t>> by_origin;
  std::size_t received = 0;
  std::size_t counted = 0;

  void add(BallotOrigin origin, const BallotDecision& d) {
    ++received;
    if (d.counted) ++counted;
    ++by_origin[std::string(to_string(origin))][d.counted ? "counted" : std::string(to_string(d.reason))];
  }

  std::size_t count(BallotOrigin origin, std::string_view outcome) const {
    auto it = by_origin.find(std::string(to_string(origin)));
    if (it == by_origin.end()) return 0;
    auto jt = it->second.find(std::string(outcome));
    return jt == it->second.end() ? 0 : jt->second;
  }

  std::size_t injected(BallotOrigin origin) const {
    auto it = by_origin.find(std::string(to_string(origin)));
    if (it == by_origin.end()) return 0;
    std::size_t n = 0;
    for (const auto& [_, c] : it->second) n += c;
    return n;
  }

  void merge(const BallotStats& o) {
    received += o.received;
    counted += o.counted;
    for (const auto& [origin, outcomes] : o.by_origin)
      for (const auto& [k, v] : outcomes) by_origin[origin][k] += v;
  }

  /// received == counted + every rejection, summed over origins.
  bool reconciles() const {
    std::size_t total = 0, counted_total = 0;
    for (const auto& [_, outcomes] : by_origin)
      for (const auto& [k, v] : outcomes) {
        total += v;
        if (k == "counted") counted_total += v;
      }
    return total == received && counted_total == counted;
  }

  nlohmann::json to_json() const { return {{"received", received}, {"counted", counted}, {"by_origin", by_origin}}; }
};

struct VoterSummary {
  std::string id;
  std::string choice;
  bool voted = false;
  bool flagged = false;
  std::size_t failed_rounds = 0;
  std::size_t accepted_ballots = 0;  // accepted key-table rows under this voter's keys
  Inclusion inclusion = Inclusion::NotVoted;
};

struct ElectionResult {
  bool published = false;
  unsigned rounds = 0;
  std::map<std::string, std::size_t> tally;
  std::map<std::string, std::size_t> cast;  // choices of voters who voted, from their own state
  BallotTable table3;
  std::vector<std::vector<BitString>> verification_sets;
  std::vector<VoterSummary> voters;
  SessionStats sessions;
  BallotStats ballots;
  std::size_t candidate_resamples = 0;
  std::size_t irregularities = 0;
  std::size_t impersonations_accepted = 0;

  bool all_voted() const {
    return std::all_of(voters.begin(), voters.end(), [](const VoterSummary& v) { return v.voted && !v.flagged; });
  }
  bool tally_matches_cast() const { return tally == cast; }
  /// Every voter voted, the tally equals what they cast, and no one found
  /// their ballot missing.
  bool completed() const { return published && all_voted() && tally_matches_cast() && irregularities == 0; }

  std::vector<std::string> missing_voters() const {
    std::vector<std::string> out;
    for (const auto& v : voters)
      if (v.inclusion == Inclusion::Missing) out.push_back(v.id);
    return out;
  }
};

inline std::string voter_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "V%04zu", index + 1);
  return buf;
}

class Election {
 public:
  Election(ElectionConfig cfg, std::uint64_t seed, std::size_t trial = 0)
      : cfg_(std::move(cfg)), rng_(derive_seed(seed, trial)) {
    cfg_.validate();
    transcript_.set_trial(trial);
    if (cfg_.adversary.kind == AdversaryKind::InterceptResend)
      interceptor_ = std::make_unique<InterceptResend>(cfg_.adversary.fraction);
    if (cfg_.adversary.kind == AdversaryKind::ReplayBallot)
      replayer_ = std::make_unique<BallotReplayer>(cfg_.adversary.withhold);
  }

  /// Runs every phase and round to publication.
  ElectionResult run() {
    setup();
    for (;;) {
      begin_round();
      for (auto idx : active_) authenticate(voters_[idx].id, voters_[idx].credential.k);
      run_key_distribution();
      begin_voting();
      auto pool = collect_ballots();
      deliver(std::move(pool));
      close_round();
      if (active_.empty()) break;
    }
    publish_results();
    for (std::size_t i = 0; i < voters_.size(); ++i) verify_inclusion(i);
    return result();
  }

  // --- Setup -------------------------------------------------------------

  void setup() {
    require_phase(ElectionPhase::Setup, "setup");
    if (!cfg_.test_scale) {
      if (cfg_.s < 64) throw InvalidArgument("s must be at least 64");
      if (!CandidateSet::negligible(cfg_.candidates.size(), cfg_.s))
        throw InvalidArgument("candidate set too dense: |S| / 2^s exceeds 2^-40");
    }
    candidates_ = CandidateSet::generate(cfg_.candidates, cfg_.s, rng_, &candidate_resamples_);
    transcript_.broadcast("setup.candidates", std::string(party::kAdministrator), candidates_.to_json());
    if (candidate_resamples_ > 0)
      transcript_.local("setup.resample", std::string(party::kAdministrator), {{"collisions", candidate_resamples_}});

    auto creds = issue_unique_credentials(cfg_.voters, cfg_.m, rng_, credential_pool_);
    voters_.reserve(cfg_.voters);
    for (std::size_t i = 0; i < cfg_.voters; ++i) {
      Voter v;
      v.id = voter_id(i);
      v.credential = std::move(creds[i]);
      v.m = cfg_.m;
      v.choice = cfg_.choices.empty() ? static_cast<std::size_t>(rng_.below(cfg_.candidates.size())) : cfg_.choices[i];
      issued_[v.id] = v.credential;
      transcript_.send(Channel::Authenticated, "setup.credential", std::string(party::kAdministrator), v.id,
                       {{"k_bits", v.credential.k.size()}, {"abc_bits", v.credential.a.size() + v.credential.b.size() + v.credential.c.size()}});
      voters_.push_back(std::move(v));
      active_.push_back(i);
    }
  }

  // --- Authentication ----------------------------------------------------

  enum class AuthResult { Accepted, RepeatApplication, BadToken, UnknownVoter, Excluded };

  /// Administrator's check of (ID, k): fresh in this round and matching the
  /// issued token. On success appends a Table 1 row.
  AuthResult authenticate(const std::string& id, const BitString& k) {
    require_phase(ElectionPhase::Authentication, "authenticate");
    transcript_.send(Channel::Authenticated, "auth.request", id, std::string(party::kAdministrator),
                     {{"id", id}, {"k_bits", k.size()}});
    AuthResult res = AuthResult::Accepted;
    auto it = issued_.find(id);
    if (it == issued_.end()) {
      res = AuthResult::UnknownVoter;
    } else if (applied_.contains(id)) {
      res = AuthResult::RepeatApplication;
    } else if (excluded_.contains(id)) {
      res = AuthResult::Excluded;
    } else if (it->second.k != k) {
      res = AuthResult::BadToken;
    }
    if (res == AuthResult::Accepted) {
      applied_.insert(id);
      table1_.push_back({table1_.size() + 1, id, index_of(id)});
    }
    transcript_.local("auth.decision", std::string(party::kAdministrator),
                      {{"id", id}, {"accepted", res == AuthResult::Accepted}});
    return res;
  }

  // --- Key distribution --------------------------------------------------

  void run_key_distribution() {
    require_phase(ElectionPhase::Authentication, "run_key_distribution");
    auto ids = nlohmann::json::array();
    for (const auto& row : table1_) ids.push_back(row.id);
    transcript_.broadcast("auth.verified", std::string(party::kAdministrator), {{"n", table1_.size()}, {"ids", ids}});
    enter(ElectionPhase::KeyDistribution);

    for (const auto& row : table1_) distribute_key(row.voter);
    transcript_.broadcast("kd.complete", std::string(party::kCounter), nlohmann::json::object());
  }

  // --- Voting --------------------------------------------------------------

  void begin_voting() {
    require_phase(ElectionPhase::KeyDistribution, "begin_voting");
    enter(ElectionPhase::Voting);
  }

  /// A voter's ballot for `label`, or nullopt if the label is not a
  /// candidate or the voter holds no key.
  std::optional<BallotMessage> cast_ballot(std::size_t voter, std::string_view label) {
    require_phase(ElectionPhase::Voting, "cast_ballot");
    auto& v = voters_.at(voter);
    const BitString* value = candidates_.find(label);
    if (value == nullptr || !v.key) return std::nullopt;
    auto msg = make_ballot(*v.key, *value);
    v.last_cast = msg;
    return msg;
  }

  /// Counter's handling of one anonymous ballot.
  BallotDecision receive_ballot(const BallotMessage& msg) {
    transcript_.anonymous(Channel::AnonymousClassical, "vote.ballot", std::string(party::kCounter), msg.to_json());
    BallotDecision d;
    if (phase_ != ElectionPhase::Voting) {
      d.reason = BallotRejection::WrongPhase;
    } else {
      d = key_table_.receive(msg, candidates_);
    }
    transcript_.local("vote.decision", std::string(party::kCounter),
                      {{"counted", d.counted}, {"reason", d.counted ? "" : std::string(to_string(d.reason))}});
    return d;
  }

  struct RoundClose {
    std::vector<BitString> verification_set;
    std::vector<std::string> failed;
    std::vector<std::string> flagged;
    std::size_t purged = 0;
  };

  /// Drops never-accepted key rows, publishes the remarks of accepted rows,
  /// and lets the administrator re-credential voters who did not make it.
  RoundClose close_round() {
    require_phase(ElectionPhase::Voting, "close_round");
    RoundClose rc;
    rc.purged = key_table_.purge_unaccepted();
    rc.verification_set = key_table_.accepted_remarks();
    auto arr = nlohmann::json::array();
    for (const auto& a : rc.verification_set) arr.push_back(a.serialize());
    transcript_.broadcast("round.verification-set", std::string(party::kCounter), {{"remarks", arr}});
    verification_sets_.push_back(rc.verification_set);

    std::unordered_set<BitString> published(rc.verification_set.begin(), rc.verification_set.end());
    std::vector<std::size_t> next;
    for (auto idx : active_) {
      auto& v = voters_[idx];
      if (published.contains(v.credential.a)) {
        v.voted = true;
        continue;
      }
      rc.failed.push_back(v.id);
      ++v.failed_rounds;
      if (v.failed_rounds > cfg_.retry_cap) {
        v.flagged = true;
        excluded_.insert(v.id);
        rc.flagged.push_back(v.id);
        transcript_.local("round.flag", std::string(party::kAdministrator),
                          {{"id", v.id}, {"failed_rounds", v.failed_rounds}});
        continue;
      }
      recredential(idx, "round.recredential");
      next.push_back(idx);
    }
    active_ = std::move(next);
    return rc;
  }

  // --- Publication -------------------------------------------------------

  void publish_results() {
    if (phase_ != ElectionPhase::Voting && phase_ != ElectionPhase::Setup)
      throw ProtocolViolation("publish_results called in phase " + std::string(to_string(phase_)));
    for (const auto& row : key_table_.rows())
      if (row.accepted) table3_.push_back({*row.vote, row.left});
    rng_.shuffle(table3_);
    if (cfg_.fault == FaultInjection::CounterDropsBallot && !table3_.empty()) {
      const auto drop = static_cast<std::size_t>(rng_.below(table3_.size()));
      transcript_.local("fault.drop-ballot", std::string(party::kCounter), nlohmann::json::object());
      table3_.erase(table3_.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    tally_.clear();
    for (const auto& e : candidates_.entries()) tally_[e.label] = 0;
    for (const auto& row : table3_) ++tally_[*candidates_.label_of(row.vote)];
    enter(ElectionPhase::Published);
    transcript_.broadcast("publish.table3", std::string(party::kCounter), {{"rows", to_json(table3_)}});
    transcript_.broadcast("publish.tally", std::string(party::kCounter), {{"tally", tally_}});
  }

  /// A voter searching for its own (K_L, v) in the public ballot list.
  Inclusion verify_inclusion(std::size_t voter) {
    require_phase(ElectionPhase::Published, "verify_inclusion");
    auto& v = voters_.at(voter);
    if (!v.voted) {
      v.inclusion = Inclusion::NotVoted;
      return v.inclusion;
    }
    bool found = false;
    if (v.last_cast) {
      const auto& own_vote = candidates_.entries()[v.choice].value;
      found = std::find(table3_.begin(), table3_.end(), BallotTableRow{own_vote, v.last_cast->key_left}) != table3_.end();
    }
    v.inclusion = found ? Inclusion::Confirmed : Inclusion::Missing;
    if (!found) {
      ++irregularities_;
      transcript_.local("verify.irregularity", v.id, {{"reason", v.last_cast ? "ballot-missing" : "never-cast"}});
    }
    return v.inclusion;
  }

  // --- Accessors -----------------------------------------------------------

  ElectionPhase phase() const noexcept { return phase_; }
  const ElectionConfig& config() const noexcept { return cfg_; }
  const CandidateSet& candidates() const noexcept { return candidates_; }
  const std::vector<VerifiedRow>& table1() const noexcept { return table1_; }
  const KeyTable& key_table() const noexcept { return key_table_; }
  const BallotTable& table3() const noexcept { return table3_; }
  const std::vector<Voter>& voters() const noexcept { return voters_; }
  const Transcript& transcript() const noexcept { return transcript_; }
  Transcript& transcript() noexcept { return transcript_; }
  const InterceptResend* interceptor() const noexcept { return interceptor_.get(); }
  unsigned round() const noexcept { return round_; }

  /// Starts the next round: clears the per-round administrator state and
  /// moves to Authentication.
  void begin_round() {
    ++round_;
    transcript_.set_round(round_);
    table1_.clear();
    applied_.clear();
    for (auto idx : active_) voters_[idx].key.reset();
    phase_ = ElectionPhase::Authentication;
    transcript_.set_phase(std::string(to_string(phase_)));
  }

  ElectionResult result() const {
    ElectionResult r;
    r.published = phase_ == ElectionPhase::Published;
    r.rounds = round_;
    r.tally = tally_;
    for (const auto& e : candidates_.entries()) r.cast[e.label] = 0;
    r.table3 = table3_;
    r.verification_sets = verification_sets_;
    r.sessions = session_stats_;
    r.ballots = ballot_stats_;
    r.candidate_resamples = candidate_resamples_;
    r.irregularities = irregularities_;
    r.impersonations_accepted = impersonations_accepted_;
    for (const auto& v : voters_) {
      VoterSummary s;
      s.id = v.id;
      s.choice = candidates_.entries().empty() ? "" : candidates_.entries()[v.choice].label;
      s.voted = v.voted;
      s.flagged = v.flagged;
      s.failed_rounds = v.failed_rounds;
      s.inclusion = v.inclusion;
      std::unordered_set<BitString> mine(v.keys_left.begin(), v.keys_left.end());
      for (const auto& row : key_table_.rows())
        if (row.accepted && mine.contains(row.left)) ++s.accepted_ballots;
      if (v.voted && v.last_cast) ++r.cast[s.choice];
      r.voters.push_back(std::move(s));
    }
    return r;
  }

 private:
  void require_phase(ElectionPhase expected, std::string_view op) const {
    if (phase_ != expected)
      throw ProtocolViolation(std::string(op) + " called in phase " + std::string(to_string(phase_)));
  }

  void enter(ElectionPhase next) {
    if (static_cast<int>(next) <= static_cast<int>(phase_)) throw ProtocolViolation("election phases only move forward");
    phase_ = next;
    transcript_.set_phase(std::string(to_string(phase_)));
  }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < voters_.size(); ++i)
      if (voters_[i].id == id) return i;
    throw InvalidArgument("unknown voter " + id);
  }

  void recredential(std::size_t idx, const char* step) {
    auto& v = voters_[idx];
    v.credential = std::move(issue_unique_credentials(1, v.m, rng_, credential_pool_).front());
    issued_[v.id] = v.credential;
    transcript_.send(Channel::Authenticated, step, std::string(party::kAdministrator), v.id,
                     {{"k_bits", v.credential.k.size()}, {"m", v.m}});
  }

  bool impersonation_target(std::size_t idx) const {
    return cfg_.adversary.kind == AdversaryKind::ImpersonateVoter && idx == cfg_.adversary.target && round_ == 1 &&
           !impersonation_done_;
  }

  /// One voter's key distribution with retries. Each retry uses fresh
  /// credentials; m doubles after a loss- or sift-starved abort.
  void distribute_key(std::size_t idx) {
    auto& v = voters_[idx];
    const std::string counter_name(party::kCounter);
    for (std::size_t attempt = 0; attempt <= cfg_.retry_cap; ++attempt) {
      if (attempt > 0) recredential(idx, "kd.recredential");
      AqkdParams params{v.m, cfg_.effective_tolerance(), EccConfig{cfg_.ecc_r}, 2 * cfg_.s};

      auto forward = seal_for_counter(v.credential.a, v.credential.b, v.credential.c, v.m, rng_);
      transcript_.send(Channel::Authenticated, "kd.forward", std::string(party::kAdministrator), counter_name,
                       {{"X", forward.sealed.serialize()}});
      CounterSession session(v.m);
      if (!session.receive_forward(forward.sealed, forward.k_c, forward.k_bc))
        throw ProtocolViolation("counter rejected an honest forward");

      AqkdUser user(v.credential.as_aqkd(), v.m);
      (void)user.request();
      QuantumChannelConfig channel{cfg_.loss_prob, cfg_.flip_prob, interceptor_.get()};

      SessionResult res;
      if (impersonation_target(idx)) {
        res = run_impersonated(v, user, session, params);
        if (cfg_.adversary.knowledge == Knowledge::Full && impersonations_accepted_ > 0) {
          // The administrator is the impersonator and does not offer the
          // victim another attempt.
          session_stats_.add(res);
          return;
        }
      } else {
        res = run_forwarded_session(user, session, registry_, params, channel, rng_, {&transcript_, v.id});
      }
      session_stats_.add(res);

      if (res.completed()) {
        const auto& k = res.counter_key;
        if (key_table_.add(k.prefix(cfg_.s), k.slice(cfg_.s, cfg_.s), v.credential.a)) {
          v.key = res.user_key;
          v.keys_left.push_back(res.user_key.prefix(cfg_.s));
          return;
        }
        ++session_stats_.key_collisions;
        transcript_.broadcast("kd.key-collision", counter_name, {{"x", v.credential.a.serialize()}});
      }
      if (res.outcome == SessionOutcome::InsufficientSift || res.outcome == SessionOutcome::TooFewDelivered) v.m *= 2;
      transcript_.send(Channel::Authenticated, "kd.retry-request", v.id, std::string(party::kAdministrator),
                       {{"reason", std::string(to_string(res.outcome))}});
    }
  }

  /// The adversary swaps the victim's qubits for its own and races the
  /// victim's confirmation with a forged one.
  SessionResult run_impersonated(Voter& v, AqkdUser& victim, CounterSession& session, const AqkdParams& params) {
    impersonation_done_ = true;
    (void)victim.prepare_qubits(rng_);  // captured and discarded by the attacker
    transcript_.local("adversary.impersonate", std::string(party::kAdversary),
                      {{"knowledge", std::string(to_string(cfg_.adversary.knowledge))}});
    auto attack = impersonate_voter(v.credential, cfg_.adversary.knowledge, session, registry_, params, rng_,
                                    {&transcript_, std::string(party::kAdversary)});
    if (attack.accepted()) {
      const auto& k = session.final_key();
      if (key_table_.add(k.prefix(cfg_.s), k.slice(cfg_.s, cfg_.s), v.credential.a)) {
        ++impersonations_accepted_;
        impersonator_key_ = attack.key;
      }
    }
    SessionResult res;
    res.check = victim.verify(*session.announcement(), params.tolerance);
    transcript_.local("aqkd.check", v.id,
                      {{"decisive", res.check.decisive}, {"errors", res.check.errors},
                       {"accepted", res.check.accepted}, {"reason", to_string(res.check.reason)}});
    if (!res.check.accepted) {
      res.outcome = res.check.reason == AbortReason::Undecidable ? SessionOutcome::Undecidable
                                                                 : SessionOutcome::ErrorRateExceeded;
      return res;
    }
    auto conf = victim.confirm(*session.announcement());
    auto extended = victim.reconcile(params.key_bits, params.ecc, rng_);
    if (!extended) {
      res.outcome = SessionOutcome::InsufficientSift;
      return res;
    }
    transcript_.anonymous(Channel::AnonymousClassical, "aqkd.confirm", std::string(party::kCounter), extended->to_json());
    auto accepted = session.accept_confirmation(*extended, registry_);
    if (!accepted.accepted()) {
      transcript_.local("aqkd.reject", std::string(party::kCounter), {{"reason", to_string(accepted.rejection)}});
      res.outcome = SessionOutcome::ConfirmationRejected;
      res.rejection = accepted.rejection;
      return res;
    }
    auto key = session.reconcile(*extended->z_block, params.ecc);
    if (!key) {
      res.outcome = SessionOutcome::ReconcileFailed;
      return res;
    }
    res.outcome = SessionOutcome::Completed;
    res.user_key = victim.final_key();
    res.counter_key = *key;
    return res;
  }

  struct Pending {
    BallotMessage msg;
    BallotOrigin origin;
  };

  std::vector<Pending> collect_ballots() {
    std::vector<BallotMessage> honest;
    for (auto idx : active_) {
      auto& v = voters_[idx];
      if (!v.key) continue;
      if (cfg_.adversary.kind == AdversaryKind::DishonestAbstain && idx == cfg_.adversary.target &&
          round_ <= cfg_.adversary.rounds_to_waste) {
        transcript_.local("vote.abstain", v.id, nlohmann::json::object());
        continue;
      }
      honest.push_back(*cast_ballot(idx, candidates_.entries()[v.choice].label));
    }

    std::vector<Pending> pool;
    if (replayer_) {
      auto plan = replayer_->intercept_round(std::move(honest), rng_);
      transcript_.local("adversary.replay", std::string(party::kAdversary),
                        {{"withheld", plan.withheld}, {"duplicates", plan.duplicates.size()},
                         {"stale_withheld", plan.stale_withheld.size()}, {"stale_seen", plan.stale_seen.size()}});
      for (auto& m : plan.deliver) pool.push_back({std::move(m), BallotOrigin::Honest});
      for (auto& m : plan.duplicates) pool.push_back({std::move(m), BallotOrigin::Duplicate});
      for (auto& m : plan.stale_withheld) pool.push_back({std::move(m), BallotOrigin::StaleWithheld});
      for (auto& m : plan.stale_seen) pool.push_back({std::move(m), BallotOrigin::StaleSeen});
    } else {
      for (auto& m : honest) pool.push_back({std::move(m), BallotOrigin::Honest});
    }

    if (cfg_.adversary.kind == AdversaryKind::ForgeRandomBallot && cfg_.adversary.attempts > 0) {
      transcript_.local("adversary.forge", std::string(party::kAdversary), {{"attempts", cfg_.adversary.attempts}});
      for (auto& m : forge_random_ballots(cfg_.adversary.attempts, cfg_.s, rng_))
        pool.push_back({std::move(m), BallotOrigin::Forged});
    }
    if (impersonator_key_) {
      const auto& target_vote = candidates_.entries()[rng_.below(candidates_.size())].value;
      pool.push_back({make_ballot(*impersonator_key_, target_vote), BallotOrigin::Impersonator});
      impersonator_key_.reset();
    }
    return pool;
  }

  /// Anonymous delivery: shuffled, sender stripped.
  void deliver(std::vector<Pending> pool) {
    rng_.shuffle(pool);
    for (const auto& p : pool) ballot_stats_.add(p.origin, receive_ballot(p.msg));
  }

  ElectionConfig cfg_;
  Rng rng_;
  Transcript transcript_;
  ElectionPhase phase_ = ElectionPhase::Setup;
  unsigned round_ = 0;

  CandidateSet candidates_;
  std::size_t candidate_resamples_ = 0;
  std::vector<Voter> voters_;
  std::vector<std::size_t> active_;
  std::unordered_set<BitString> credential_pool_;

  // administrator
  std::unordered_map<std::string, VoterCredential> issued_;
  std::unordered_set<std::string> applied_;
  std::unordered_set<std::string> excluded_;
  std::vector<VerifiedRow> table1_;

  // counter
  TokenRegistry registry_;
  KeyTable key_table_;
  BallotTable table3_;
  std::map<std::string, std::size_t> tally_;
  std::vector<std::vector<BitString>> verification_sets_;

  // adversary
  std::unique_ptr<InterceptResend> interceptor_;
  std::unique_ptr<BallotReplayer> replayer_;
  std::optional<BitString> impersonator_key_;
  bool impersonation_done_ = false;
  std::size_t impersonations_accepted_ = 0;

  SessionStats session_stats_;
  BallotStats ballot_stats_;
  std::size_t irregularities_ = 0;
};

}  // namespace qelect
