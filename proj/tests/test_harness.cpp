#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "oracles.hpp"
#include "qelect/harness.hpp"

using namespace qelect;
namespace fs = std::filesystem;

namespace {

Scenario quick(std::size_t voters, std::size_t trials) {
  Scenario sc;
  sc.election.voters = voters;
  sc.election.m = 1024;
  sc.trials = trials;
  sc.seed = 42;
  return sc;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("qelect_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string edit_jsonl(const std::string& text, std::string_view step, void (*edit)(nlohmann::json&)) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    if (j.at("step") == step) edit(j);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace

TEST(ScenarioJson, RoundTrip) {
  auto j = nlohmann::json::parse(R"({
    "s": 64, "m": 256, "N": 7, "candidates": ["X", "Y"],
    "channel": {"loss_prob": 0.05, "flip_prob": 0.01},
    "ecc_r": 3, "tolerance": 0.04, "seed": 9, "retry_cap": 2, "trials": 3,
    "adversary": {"kind": "replay-ballot", "params": {"withhold": 2}}
  })");
  auto sc = Scenario::from_json(j);
  EXPECT_EQ(sc.election.voters, 7u);
  EXPECT_EQ(sc.election.m, 256u);
  EXPECT_DOUBLE_EQ(sc.election.loss_prob, 0.05);
  EXPECT_DOUBLE_EQ(*sc.election.tolerance, 0.04);
  EXPECT_EQ(sc.election.adversary.kind, AdversaryKind::ReplayBallot);
  EXPECT_EQ(sc.election.adversary.withhold, 2u);
  EXPECT_EQ(sc.seed, 9u);
  auto again = Scenario::from_json(sc.to_json());
  EXPECT_EQ(again.to_json(), sc.to_json());
}

TEST(ScenarioJson, Rejections) {
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"voters": 3})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"trials": 0})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"channel": {"noise": 1}})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"adversary": {"kind": "wizard"}})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"m": "lots"})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse(R"({"fault": "gremlin"})")), InvalidArgument);
  EXPECT_THROW(Scenario::from_json(nlohmann::json::parse("[1]")), InvalidArgument);
}

TEST(RunScenario, HonestBaseline) {
  auto sc = quick(10, 3);
  auto rep = run_scenario(sc);
  EXPECT_EQ(rep.completed, 3u);
  ASSERT_EQ(rep.trials.size(), 3u);
  for (const auto& t : rep.trials) {
    EXPECT_TRUE(t.completed);
    EXPECT_TRUE(t.reason.empty());
  }
  EXPECT_DOUBLE_EQ(rep.check_error_rate(), 0.0);
  EXPECT_DOUBLE_EQ(rep.detection_rate(), 0.0);
  EXPECT_DOUBLE_EQ(rep.key_agreement_rate(), 1.0);
  EXPECT_EQ(rep.tables.size(), 3u);
}

TEST(RunScenario, InterceptResendStopsEveryKey) {
  auto sc = quick(3, 1);
  sc.election.adversary.kind = AdversaryKind::InterceptResend;
  sc.election.adversary.fraction = 1.0;
  auto rep = run_scenario(sc);
  EXPECT_EQ(rep.sessions.completed, 0u);
  EXPECT_EQ(rep.completed, 0u);
  EXPECT_EQ(rep.trials[0].reason, "voters-flagged");
  EXPECT_NEAR(rep.check_error_rate(), 0.25, 0.03);
  // The aborted trial still publishes an empty result and closes its transcript.
  EXPECT_TRUE(verify_transcript(rep.transcript).ok());
}

TEST(RunScenario, SameSeedSameBytes) {
  auto sc = quick(4, 2);
  sc.election.loss_prob = 0.05;
  sc.election.flip_prob = 0.01;
  auto a = run_scenario(sc), b = run_scenario(sc);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.transcript.to_jsonl(), b.transcript.to_jsonl());
  sc.seed = 43;
  auto c = run_scenario(sc);
  EXPECT_NE(a.transcript.to_jsonl(), c.transcript.to_jsonl());
}

TEST(DetectionEstimate, Bounds) {
  Rng rng(1);
  EXPECT_THROW(estimate_detection_rate(64, 1.0, 0.05, 99, rng), InvalidArgument);
  auto none = estimate_detection_rate(64, 0.0, 0.05, 200, rng);
  EXPECT_EQ(none.detected, 0u);
  auto full = estimate_detection_rate(64, 1.0, 0.05, 2000, rng);
  auto half = estimate_detection_rate(64, 0.5, 0.05, 2000, rng);
  EXPECT_GT(half.rate, none.rate);
  EXPECT_LT(half.rate, full.rate);
  const double exact = oracle::detection_probability(64, 0.05);
  EXPECT_NEAR(full.rate, exact, 4 * std::sqrt(exact * (1 - exact) / 2000) + 1e-3);
  EXPECT_LE(full.ci.low, full.rate);
  EXPECT_GE(full.ci.high, full.rate);
  EXPECT_NEAR(full.mean_check_error, 0.25, 0.01);
}

TEST(EmitOutputs, WritesThreeFiles) {
  auto dir = scratch("emit");
  auto rep = run_scenario(quick(3, 2));
  auto paths = emit_outputs(rep, dir);
  EXPECT_TRUE(fs::exists(paths.report));
  EXPECT_TRUE(fs::exists(paths.transcript));
  EXPECT_TRUE(fs::exists(paths.table3));
  EXPECT_EQ(read_file(paths.transcript), rep.transcript.to_jsonl());
  auto report = nlohmann::json::parse(read_file(paths.report));
  EXPECT_EQ(report.at("completed"), 2);
  EXPECT_FALSE(report.contains("wall_seconds"));
  auto tables = nlohmann::json::parse(read_file(paths.table3));
  ASSERT_EQ(tables.size(), 2u);
  EXPECT_EQ(tables[1].at("rows").size(), 3u);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
  fs::remove_all(dir);
}

TEST(EmitOutputs, FailureLeavesNoFiles) {
  auto base = scratch("emit_fail");
  fs::create_directories(base);
  {
    std::ofstream f(base / "plain");
    f << "x";
  }
  auto rep = run_scenario(quick(2, 1));
  EXPECT_THROW(emit_outputs(rep, base / "plain" / "sub"), InvalidArgument);

  // A directory squatting on the transcript name makes the second rename fail
  // after the report is already in place.
  auto dir = base / "out";
  fs::create_directories(dir / "transcript.jsonl" / "blocker");
  EXPECT_THROW(emit_outputs(rep, dir), InvalidArgument);
  EXPECT_FALSE(fs::exists(dir / "report.json"));
  EXPECT_FALSE(fs::exists(dir / "table3.json"));
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
  fs::remove_all(base);
}

TEST(VerifyTranscript, RecountsPublicRecords) {
  auto sc = quick(5, 2);
  sc.election.candidates = {"A", "B"};
  sc.election.choices = {0, 0, 1, 0, 1};
  auto rep = run_scenario(sc);
  auto v = verify_transcript(rep.transcript);
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.trials, 2u);
  EXPECT_EQ(v.tallies.at(0).at("A"), 3u);
  EXPECT_EQ(v.tallies.at(1).at("B"), 2u);

  // Re-reading the JSONL form gives the same verdict.
  auto reread = Transcript::from_jsonl(rep.transcript.to_jsonl());
  EXPECT_TRUE(verify_transcript(reread).ok());
}

TEST(VerifyTranscript, DetectsTampering) {
  auto rep = run_scenario(quick(4, 1));
  const auto text = rep.transcript.to_jsonl();

  auto bumped = edit_jsonl(text, "publish.tally", [](nlohmann::json& j) {
    auto& tally = j["payload"]["tally"];
    tally.begin().value() = tally.begin().value().get<std::size_t>() + 1;
  });
  EXPECT_FALSE(verify_transcript(Transcript::from_jsonl(bumped)).ok());

  auto duplicated = edit_jsonl(text, "publish.table3", [](nlohmann::json& j) {
    auto& rows = j["payload"]["rows"];
    rows.push_back(rows[0]);
  });
  EXPECT_FALSE(verify_transcript(Transcript::from_jsonl(duplicated)).ok());

  auto dropped = edit_jsonl(text, "publish.table3", [](nlohmann::json& j) { j["payload"]["rows"].erase(0); });
  EXPECT_FALSE(verify_transcript(Transcript::from_jsonl(dropped)).ok());
}

TEST(Privacy, AuditCleanAcrossAdversaries) {
  std::vector<AdversaryConfig> advs(6);
  advs[1].kind = AdversaryKind::InterceptResend;
  advs[1].fraction = 0.5;
  advs[2].kind = AdversaryKind::ReplayBallot;
  advs[2].withhold = 1;
  advs[3].kind = AdversaryKind::ForgeRandomBallot;
  advs[3].attempts = 50;
  advs[4].kind = AdversaryKind::ImpersonateVoter;
  advs[4].knowledge = Knowledge::Full;
  advs[5].kind = AdversaryKind::DishonestAbstain;
  advs[5].rounds_to_waste = 1;
  for (const auto& a : advs) {
    auto sc = quick(4, 2);
    sc.election.adversary = a;
    auto rep = run_scenario(sc);
    auto audit = audit_privacy(rep.transcript);
    EXPECT_EQ(audit.violations(), 0u) << to_string(a.kind);
  }
}

TEST(Privacy, AuditCatchesLeak) {
  auto rep = run_scenario(quick(2, 1));
  auto t = rep.transcript;
  t.anonymous(Channel::AnonymousClassical, "vote.ballot", std::string(party::kCounter), {{"note", "V0001"}});
  EXPECT_EQ(audit_privacy(t).anonymous_with_id, 1u);
}

TEST(Summary, Reasons) {
  ElectionResult r;
  r.published = false;
  EXPECT_EQ(summarize_trial(0, r).reason, "not-published");
  r.published = true;
  EXPECT_TRUE(summarize_trial(0, r).completed);
  r.irregularities = 1;
  EXPECT_FALSE(summarize_trial(0, r).completed);
}
