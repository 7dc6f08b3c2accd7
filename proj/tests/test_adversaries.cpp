#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "qelect/adversaries.hpp"

using namespace qelect;

TEST(AdversaryNames, RoundTrip) {
  for (auto k : {AdversaryKind::None, AdversaryKind::InterceptResend, AdversaryKind::ImpersonateVoter,
                 AdversaryKind::ReplayBallot, AdversaryKind::ForgeRandomBallot, AdversaryKind::DishonestAbstain,
                 AdversaryKind::EavesdropClassical})
    EXPECT_EQ(adversary_from_string(to_string(k)), k);
  EXPECT_FALSE(adversary_from_string("ddos"));
  EXPECT_EQ(knowledge_from_string("token"), Knowledge::Token);
  EXPECT_THROW(InterceptResend(1.5), InvalidArgument);
}

TEST(InterceptResend, ZeroFractionIsIdentity) {
  Rng rng(1);
  InterceptResend eve(0.0);
  auto b = random_bits(200, rng), v = random_bits(200, rng);
  auto rep = transmit(encode(b, v), {0, 0, &eve}, rng);
  EXPECT_TRUE(eve.notes().empty());
  for (std::size_t j = 0; j < 200; ++j) EXPECT_EQ(measure(rep.qubits[j], basis_from_bit(b[j]), rng), v[j]);
}

// Enumeration oracle: Eve's basis matches w.p. 1/2 (no error); otherwise her
// resent qubit gives the receiver a fair coin (error w.p. 1/2). Error 1/4.
TEST(InterceptResend, MatchedBasisErrorIsQuarter) {
  Rng rng(2);
  const std::size_t n = 100000;
  InterceptResend eve(1.0);
  auto b = random_bits(n, rng), v = random_bits(n, rng);
  auto rep = transmit(encode(b, v), {0, 0, &eve}, rng);
  std::size_t errors = 0;
  for (std::size_t j = 0; j < n; ++j) errors += measure(rep.qubits[j], basis_from_bit(b[j]), rng) != v[j];
  EXPECT_NEAR(static_cast<double>(errors) / n, 0.25, 3 * std::sqrt(0.25 * 0.75 / n));
  EXPECT_EQ(eve.notes().size(), n);
}

TEST(InterceptResend, ErrorRateMonotoneInFraction) {
  std::vector<double> rates;
  for (double fraction : {0.0, 0.25, 0.5, 1.0}) {
    Rng rng(3);
    std::size_t decisive = 0, errors = 0;
    for (int t = 0; t < 10000; ++t) {
      InterceptResend eve(fraction);
      auto res = run_aqkd_session({64, 1.0, EccConfig{}, 0}, {0, 0, fraction > 0 ? &eve : nullptr}, rng);
      decisive += res.check.decisive;
      errors += res.check.errors;
    }
    rates.push_back(static_cast<double>(errors) / static_cast<double>(decisive));
  }
  EXPECT_EQ(rates[0], 0.0);
  for (std::size_t i = 1; i < rates.size(); ++i) EXPECT_GT(rates[i], rates[i - 1]);
  EXPECT_NEAR(rates[1], 0.0625, 0.01);
  EXPECT_NEAR(rates[2], 0.125, 0.01);
  EXPECT_NEAR(rates[3], 0.25, 0.01);
}

// Full-key guess with intercept-resend notes over x = 8 sifted bits; bound
// (3/4)^8 ~ 0.100 per key.
TEST(InterceptResend, FullKeyGuessWithinThreeQuarterBound) {
  Rng rng(4);
  const std::size_t x = 8, trials = 10000;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    InterceptResend eve(1.0);
    auto b = random_bits(x, rng), v = random_bits(x, rng);
    auto rep = transmit(encode(b, v), {0, 0, &eve}, rng);
    bool all = true;
    for (std::size_t j = 0; j < x; ++j) all = all && eve.guess_at(j, rng) == v[j];
    hits += all;
  }
  const double p = std::pow(0.75, 8);
  EXPECT_LE(static_cast<double>(hits), trials * p + 3 * std::sqrt(trials * p * (1 - p)));
}

TEST(NoAccess, GuessMatchesHalfToTheX) {
  Rng rng(5);
  const std::size_t x = 8, trials = 100000;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) hits += guess_without_access(x, rng) == random_bits(x, rng);
  const double p = 1.0 / 256;
  EXPECT_NEAR(static_cast<double>(hits), trials * p, 4 * std::sqrt(trials * p * (1 - p)));
}

namespace {

struct Victim {
  VoterCredential cred;
  CounterSession session;
};

Victim victim_session(std::size_t m, Rng& rng) {
  Victim v{VoterCredential::generate(m, rng), CounterSession(m)};
  auto fw = seal_for_counter(v.cred.a, v.cred.b, v.cred.c, m, rng);
  EXPECT_TRUE(v.session.receive_forward(fw.sealed, fw.k_c, fw.k_bc));
  return v;
}

}  // namespace

TEST(Impersonation, NoKnowledgeNeverAccepted) {
  Rng rng(6);
  TokenRegistry reg;
  AqkdParams params{16, 0.05, EccConfig{}, 0};
  std::size_t accepted = 0, unknown = 0, reached = 0;
  for (int t = 0; t < 100000; ++t) {
    auto v = victim_session(16, rng);
    auto res = impersonate_voter(v.cred, Knowledge::None, v.session, reg, params, rng);
    accepted += res.accepted();
    // an all-mismatched basis draw (2^-16) ends the attempt before confirmation
    reached += res.outcome == SessionOutcome::ConfirmationRejected;
    unknown += res.outcome == SessionOutcome::ConfirmationRejected && res.rejection == ConfirmRejection::UnknownToken;
  }
  EXPECT_EQ(accepted, 0u);
  EXPECT_GE(reached, 99990u);
  EXPECT_EQ(unknown, reached);
}

TEST(Impersonation, StolenTokenFailsSealCheck) {
  Rng rng(7);
  TokenRegistry reg;
  AqkdParams params{16, 0.05, EccConfig{}, 0};
  for (int t = 0; t < 2000; ++t) {
    auto v = victim_session(16, rng);
    auto res = impersonate_voter(v.cred, Knowledge::Token, v.session, reg, params, rng);
    ASSERT_FALSE(res.accepted());
    ASSERT_EQ(res.rejection, ConfirmRejection::SealMismatch);
  }
}

TEST(Impersonation, FullKnowledgeSucceeds) {
  Rng rng(8);
  TokenRegistry reg;
  auto v = victim_session(128, rng);
  auto res = impersonate_voter(v.cred, Knowledge::Full, v.session, reg, {128, 0.05, EccConfig{}, 16}, rng);
  EXPECT_TRUE(res.accepted());
  EXPECT_EQ(res.key, v.session.final_key());
  EXPECT_TRUE(reg.contains(v.cred.a));
}

TEST(Replayer, WithholdsBudgetOnceThenReplaysEverything) {
  Rng rng(9);
  BallotReplayer r(1);
  std::vector<BallotMessage> round1{{random_bits(8, rng), random_bits(8, rng)}, {random_bits(8, rng), random_bits(8, rng)}};
  auto p1 = r.intercept_round(round1, rng);
  EXPECT_EQ(p1.withheld, 1u);
  EXPECT_EQ(p1.deliver.size(), 1u);
  EXPECT_EQ(p1.duplicates, p1.deliver);
  EXPECT_TRUE(p1.stale_withheld.empty());
  std::vector<BallotMessage> round2{{random_bits(8, rng), random_bits(8, rng)}};
  auto p2 = r.intercept_round(round2, rng);
  EXPECT_EQ(p2.withheld, 0u);
  EXPECT_EQ(p2.deliver.size(), 1u);
  EXPECT_EQ(p2.stale_withheld.size(), 1u);
  EXPECT_EQ(p2.stale_seen, p1.deliver);
}

TEST(Forgery, CountsAndShapes) {
  Rng rng(10);
  EXPECT_TRUE(forge_random_ballots(0, 64, rng).empty());
  auto f = forge_random_ballots(5, 12, rng);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[0].key_left.size(), 12u);
  EXPECT_EQ(f[0].ciphertext.size(), 12u);
}

// Membership oracle: a random ciphertext under a valid unused key decrypts to
// a uniform s-bit string, which lies in S with probability |S| / 2^s.
TEST(Forgery, UnderValidKeyAcceptedAtMembershipRate) {
  Rng rng(11);
  const std::size_t s = 8, trials = 50000;
  auto set = CandidateSet::generate({"A", "B", "C", "D"}, s, rng);
  std::size_t accepted = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    KeyTable table;
    auto key = random_bits(2 * s, rng);
    ASSERT_TRUE(table.add(key.prefix(s), key.slice(s, s), BitString(1)));
    accepted += table.receive(forge_under_key(key.prefix(s), s, rng), set).counted;
  }
  const double p = 4.0 / 256;
  EXPECT_NEAR(static_cast<double>(accepted), trials * p, 3 * std::sqrt(trials * p * (1 - p)));
}

TEST(Eavesdropper, SeesOnlyAnonymousClassicalAndPublic) {
  Transcript t;
  t.send(Channel::Authenticated, "auth.request", std::string("V0001"), std::string("administrator"), {});
  t.anonymous(Channel::AnonymousQuantum, "aqkd.qubits", "counter", {});
  t.anonymous(Channel::AnonymousClassical, "vote.ballot", "counter", {});
  t.broadcast("publish.tally", "counter", {});
  t.local("vote.decision", "counter", {});
  auto view = eavesdropper_view(t);
  ASSERT_EQ(view.size(), 2u);
  EXPECT_EQ(view[0].step, "vote.ballot");
  EXPECT_EQ(view[1].step, "publish.tally");
}
