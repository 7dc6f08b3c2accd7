#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "qelect/errors.hpp"
#include "qelect/qubit.hpp"

namespace qelect::testing {
struct QubitProbe {
  static Basis basis(const Qubit& q) { return q.basis_; }
  static std::uint8_t value(const Qubit& q) { return q.value_; }
};
}  // namespace qelect::testing

using qelect::Basis;
using qelect::BitString;
using qelect::Rng;
using Probe = qelect::testing::QubitProbe;

TEST(Encode, IdentityCase) {
  auto q = qelect::encode(BitString::from_bits("0"), BitString::from_bits("0"));
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(Probe::basis(q[0]), Basis::Rectilinear);
  EXPECT_EQ(Probe::value(q[0]), 0);
}

TEST(Encode, HadamardOnZeroIsPlus) {
  auto q = qelect::encode(BitString::from_bits("1"), BitString::from_bits("0"));
  EXPECT_EQ(Probe::basis(q[0]), Basis::Diagonal);
  EXPECT_EQ(Probe::value(q[0]), 0);
}

TEST(Encode, PositionalPairing) {
  auto q = qelect::encode(BitString::from_bits("0110"), BitString::from_bits("1011"));
  ASSERT_EQ(q.size(), 4u);
  const int expect[4][2] = {{0, 1}, {1, 0}, {1, 1}, {0, 1}};
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(qelect::basis_bit(Probe::basis(q[j])), expect[j][0]);
    EXPECT_EQ(Probe::value(q[j]), expect[j][1]);
  }
}

TEST(Encode, RejectsBadInput) {
  EXPECT_THROW((void)qelect::encode(BitString::from_bits("01"), BitString::from_bits("0")), qelect::InvalidArgument);
  EXPECT_THROW((void)qelect::encode(BitString(), BitString()), qelect::InvalidArgument);
  EXPECT_THROW((void)qelect::prepare(Basis::Rectilinear, 2), qelect::InvalidArgument);
}

TEST(Measure, MatchingBasisIsDeterministic) {
  Rng rng(1);
  auto q = qelect::prepare(Basis::Rectilinear, 1);
  EXPECT_EQ(qelect::measure(q, Basis::Rectilinear, rng), 1);
}

TEST(Measure, SecondMeasurementIsAViolation) {
  Rng rng(1);
  auto q = qelect::prepare(Basis::Diagonal, 1);
  (void)qelect::measure(q, Basis::Rectilinear, rng);
  EXPECT_TRUE(q.consumed());
  EXPECT_THROW((void)qelect::measure(q, Basis::Rectilinear, rng), qelect::ProtocolViolation);
}

TEST(Measure, MovedFromQubitCannotBeMeasured) {
  Rng rng(1);
  auto q = qelect::prepare(Basis::Diagonal, 1);
  auto r = std::move(q);
  EXPECT_THROW((void)qelect::measure(q, Basis::Diagonal, rng), qelect::ProtocolViolation);
  EXPECT_EQ(qelect::measure(r, Basis::Diagonal, rng), 1);
}

TEST(Measure, MismatchedBasisIsFair) {
  Rng rng(2);
  std::size_t ones = 0;
  for (int i = 0; i < 100000; ++i) {
    auto q = qelect::prepare(Basis::Diagonal, 1);
    ones += qelect::measure(q, Basis::Rectilinear, rng);
  }
  EXPECT_NEAR(static_cast<double>(ones) / 1e5, 0.5, 0.01);
}

// 2x2 contingency of encoded value against mismatched-basis outcome.
TEST(Measure, MismatchedOutcomeIndependentOfValue) {
  Rng rng(3);
  double table[2][2] = {{0, 0}, {0, 0}};
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.bit();
    const auto basis = qelect::basis_from_bit(rng.bit());
    auto q = qelect::prepare(basis, v);
    const auto other = basis == Basis::Rectilinear ? Basis::Diagonal : Basis::Rectilinear;
    table[v][qelect::measure(q, other, rng)] += 1;
  }
  double chi = 0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const double row = table[a][0] + table[a][1], col = table[0][b] + table[1][b];
      const double expected = row * col / n;
      chi += (table[a][b] - expected) * (table[a][b] - expected) / expected;
    }
  EXPECT_LT(chi, 10.83);  // p = 0.001 at one degree of freedom
}

TEST(Transmit, IdentityChannel) {
  Rng rng(4);
  auto bases = qelect::random_bits(100, rng), values = qelect::random_bits(100, rng);
  auto rep = qelect::transmit(qelect::encode(bases, values), {}, rng);
  ASSERT_EQ(rep.delivered_indices.size(), 100u);
  for (std::size_t j = 0; j < 100; ++j) {
    EXPECT_EQ(rep.delivered_indices[j], j);
    EXPECT_EQ(qelect::basis_bit(Probe::basis(rep.qubits[j])), bases[j]);
    EXPECT_EQ(Probe::value(rep.qubits[j]), values[j]);
  }
}

TEST(Transmit, TotalLoss) {
  Rng rng(5);
  auto rep = qelect::transmit(qelect::encode(BitString(50), BitString(50)), {1.0, 0.0, nullptr}, rng);
  EXPECT_TRUE(rep.delivered_indices.empty());
  EXPECT_TRUE(rep.qubits.empty());
}

TEST(Transmit, LossCountWithinBinomialBound) {
  Rng rng(6);
  auto rep = qelect::transmit(qelect::encode(BitString(10000), BitString(10000)), {0.1, 0.0, nullptr}, rng);
  const double sd = std::sqrt(1e4 * 0.1 * 0.9);
  EXPECT_NEAR(static_cast<double>(rep.delivered_indices.size()), 9000.0, 3 * sd);
  for (std::size_t i = 1; i < rep.delivered_indices.size(); ++i)
    ASSERT_LT(rep.delivered_indices[i - 1], rep.delivered_indices[i]);
  EXPECT_EQ(rep.delivered_indices.size(), rep.qubits.size());
}

TEST(Transmit, FlipRateOnMatchedBasis) {
  Rng rng(7);
  const std::size_t n = 20000;
  auto bases = qelect::random_bits(n, rng), values = qelect::random_bits(n, rng);
  auto rep = qelect::transmit(qelect::encode(bases, values), {0.0, 0.05, nullptr}, rng);
  std::size_t errors = 0;
  for (std::size_t j = 0; j < n; ++j)
    errors += qelect::measure(rep.qubits[j], qelect::basis_from_bit(bases[j]), rng) != values[j];
  EXPECT_NEAR(static_cast<double>(errors) / n, 0.05, 3 * std::sqrt(0.05 * 0.95 / n));
}

TEST(Transmit, MatchedBasisRoundTripIsIdentity) {
  Rng rng(8);
  auto bases = qelect::random_bits(500, rng), values = qelect::random_bits(500, rng);
  auto rep = qelect::transmit(qelect::encode(bases, values), {0.3, 0.0, nullptr}, rng);
  for (std::size_t i = 0; i < rep.qubits.size(); ++i) {
    const auto j = rep.delivered_indices[i];
    ASSERT_EQ(qelect::measure(rep.qubits[i], qelect::basis_from_bit(bases[j]), rng), values[j]);
  }
}

TEST(Transmit, DeterministicUnderSeed) {
  auto run = [] {
    Rng rng(9);
    auto b = qelect::random_bits(300, rng), v = qelect::random_bits(300, rng);
    auto rep = qelect::transmit(qelect::encode(b, v), {0.2, 0.1, nullptr}, rng);
    BitString out;
    for (auto& q : rep.qubits) out.push_back(qelect::measure(q, Basis::Rectilinear, rng));
    return std::make_pair(rep.delivered_indices, out);
  };
  EXPECT_EQ(run(), run());
}

TEST(Transmit, RejectsBadProbabilities) {
  Rng rng(1);
  EXPECT_THROW((void)qelect::transmit({}, {1.5, 0.0, nullptr}, rng), qelect::InvalidArgument);
  EXPECT_THROW((void)qelect::transmit({}, {0.0, -0.1, nullptr}, rng), qelect::InvalidArgument);
}
