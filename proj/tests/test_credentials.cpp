#include <gtest/gtest.h>

#include <unordered_set>

#include "qelect/credentials.hpp"
#include "qelect/errors.hpp"

using qelect::Rng;

TEST(Credentials, ComponentLengths) {
  Rng rng(1);
  auto c = qelect::AqkdCredential::generate(16, rng);
  EXPECT_EQ(c.p.size(), 16u);
  EXPECT_EQ(c.x.size(), 48u);
  EXPECT_EQ(c.y.size(), 48u);
  EXPECT_EQ(c.z.size(), 80u);
  EXPECT_EQ(c.p.size() + c.x.size() + c.y.size() + c.z.size(), qelect::AqkdCredential::total_bits(16));
  EXPECT_TRUE(c.well_formed(16));
  EXPECT_FALSE(c.well_formed(8));
  EXPECT_EQ(c.forwarded().size(), 11u * 16);
}

TEST(Credentials, ZeroMRejected) {
  Rng rng(1);
  EXPECT_THROW((void)qelect::AqkdCredential::generate(0, rng), qelect::InvalidArgument);
}

TEST(Credentials, VoterMapsOntoAqkdRoles) {
  Rng rng(2);
  auto v = qelect::VoterCredential::generate(8, rng);
  auto a = v.as_aqkd();
  EXPECT_EQ(a.p, v.k);
  EXPECT_EQ(a.x, v.a);
  EXPECT_EQ(a.y, v.b);
  EXPECT_EQ(a.z, v.c);
}

TEST(Credentials, TwentyVotersGiveEightyDistinctComponents) {
  Rng rng(3);
  auto creds = qelect::issue_unique_credentials(20, 64, rng);
  std::unordered_set<qelect::BitString> parts;
  for (const auto& c : creds) {
    parts.insert(c.k);
    parts.insert(c.a);
    parts.insert(c.b);
    parts.insert(c.c);
  }
  EXPECT_EQ(parts.size(), 80u);
}

TEST(Credentials, TinyComponentsStillComeOutDistinct) {
  // m = 2 makes collisions frequent, so the redraw path is exercised.
  Rng rng(4);
  std::unordered_set<qelect::BitString> taken;
  auto creds = qelect::issue_unique_credentials(3, 2, rng, taken);
  EXPECT_EQ(taken.size(), 12u);
  auto more = qelect::issue_unique_credentials(1, 2, rng, taken);
  EXPECT_EQ(taken.size(), 16u);
}
