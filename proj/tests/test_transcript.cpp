#include <gtest/gtest.h>

#include "qelect/errors.hpp"
#include "qelect/transcript.hpp"

using qelect::Channel;
using qelect::Transcript;

TEST(Transcript, AnonymousRecordsCarryNoSender) {
  Transcript t;
  EXPECT_THROW(t.send(Channel::AnonymousClassical, "x", std::string("V0001"), std::nullopt, {}),
               qelect::ProtocolViolation);
  EXPECT_THROW(t.send(Channel::AnonymousQuantum, "x", std::string("V0001"), std::nullopt, {}),
               qelect::ProtocolViolation);
  t.anonymous(Channel::AnonymousClassical, "vote.ballot", "counter", {{"ct", "4:a0"}});
  EXPECT_FALSE(t.records().back().from.has_value());
  EXPECT_FALSE(t.records().back().to_json().contains("from"));
}

TEST(Transcript, StampsContext) {
  Transcript t;
  t.set_trial(3);
  t.set_round(2);
  t.set_phase("Voting");
  t.broadcast("s", "counter", {{"k", 1}});
  const auto& r = t.records().back();
  EXPECT_EQ(r.trial, 3u);
  EXPECT_EQ(r.round, 2u);
  EXPECT_EQ(r.phase, "Voting");
  EXPECT_EQ(r.channel, Channel::PublicBroadcast);
}

TEST(Transcript, JsonlRoundTripIsByteStable) {
  Transcript t;
  t.send(Channel::Authenticated, "auth.request", std::string("V0001"), std::string("administrator"),
         {{"z", 1}, {"a", "x"}});
  t.local("aqkd.check", "V0001", {{"errors", 0}});
  t.anonymous(Channel::AnonymousQuantum, "aqkd.qubits", "counter", {{"sent", 12}});
  const auto text = t.to_jsonl();
  auto back = Transcript::from_jsonl(text);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.to_jsonl(), text);
  // keys sorted
  EXPECT_LT(text.find("\"a\""), text.find("\"z\""));
}

TEST(Transcript, ChannelNames) {
  for (auto c : {Channel::Authenticated, Channel::AnonymousClassical, Channel::AnonymousQuantum,
                 Channel::PublicBroadcast, Channel::Local})
    EXPECT_EQ(qelect::channel_from_string(qelect::to_string(c)), c);
  EXPECT_FALSE(qelect::channel_from_string("smoke-signal"));
}

TEST(Transcript, RejectsUnknownChannelOnLoad) {
  EXPECT_THROW((void)Transcript::from_jsonl(
                   R"({"channel":"smoke","payload":{},"phase":"Setup","round":0,"step":"x","trial":0})"),
               qelect::InvalidArgument);
}
