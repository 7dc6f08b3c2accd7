#pragma once

// Scenario runner, Monte-Carlo estimates, transcript audits and output files.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "qelect/adversaries.hpp"
#include "qelect/aqkd.hpp"
#include "qelect/ballot.hpp"
#include "qelect/election.hpp"
#include "qelect/errors.hpp"
#include "qelect/rng.hpp"
#include "qelect/stats.hpp"
#include "qelect/transcript.hpp"

namespace qelect {

/// Election configuration plus run controls.
struct Scenario {
  ElectionConfig election;
  std::uint64_t seed = 1;
  std::size_t trials = 1;
  std::string report_path;  // output directory; empty means no files

  void validate() const {
    if (trials == 0) throw InvalidArgument("trials must be at least 1");
    election.validate();
  }

  /// Accepts the structured config format; unknown keys are errors.
  static Scenario from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"s",         "m",         "N",      "candidates", "channel",
                                             "ecc_r",     "tolerance", "adversary", "seed",     "retry_cap",
                                             "trials",    "report_path", "fault",  "choices",    "test_scale"};
    if (!j.is_object()) throw InvalidArgument("scenario config must be a JSON object");
    for (const auto& [k, _] : j.items())
      if (!kKeys.contains(k)) throw InvalidArgument("unknown config key: " + k);

    Scenario sc;
    auto& e = sc.election;
    try {
      e.s = j.value("s", e.s);
      e.m = j.value("m", e.m);
      e.voters = j.value("N", e.voters);
      e.candidates = j.value("candidates", e.candidates);
      if (j.contains("channel")) {
        const auto& ch = j.at("channel");
        for (const auto& [k, _] : ch.items())
          if (k != "loss_prob" && k != "flip_prob") throw InvalidArgument("unknown channel key: " + k);
        e.loss_prob = ch.value("loss_prob", e.loss_prob);
        e.flip_prob = ch.value("flip_prob", e.flip_prob);
      }
      e.ecc_r = j.value("ecc_r", e.ecc_r);
      if (j.contains("tolerance") && !j.at("tolerance").is_null()) e.tolerance = j.at("tolerance").get<double>();
      e.retry_cap = j.value("retry_cap", e.retry_cap);
      e.choices = j.value("choices", e.choices);
      e.test_scale = j.value("test_scale", e.test_scale);
      if (j.contains("fault")) {
        const auto f = j.at("fault").get<std::string>();
        if (f == "none") e.fault = FaultInjection::None;
        else if (f == "counter-drops-ballot") e.fault = FaultInjection::CounterDropsBallot;
        else throw InvalidArgument("unknown fault: " + f);
      }
      if (j.contains("adversary")) e.adversary = adversary_from_json(j.at("adversary"));
      sc.seed = j.value("seed", sc.seed);
      sc.trials = j.value("trials", sc.trials);
      sc.report_path = j.value("report_path", sc.report_path);
    } catch (const nlohmann::json::exception& ex) {
      throw InvalidArgument(std::string("bad config value: ") + ex.what());
    }
    sc.validate();
    return sc;
  }

  static AdversaryConfig adversary_from_json(const nlohmann::json& j) {
    AdversaryConfig a;
    auto kind = adversary_from_string(j.at("kind").get<std::string>());
    if (!kind) throw InvalidArgument("unknown adversary kind: " + j.at("kind").get<std::string>());
    a.kind = *kind;
    const auto params = j.value("params", nlohmann::json::object());
    for (const auto& [k, _] : params.items()) {
      if (k != "fraction" && k != "knowledge" && k != "target" && k != "attempts" && k != "rounds_to_waste" &&
          k != "withhold")
        throw InvalidArgument("unknown adversary parameter: " + k);
    }
    a.fraction = params.value("fraction", a.fraction);
    if (params.contains("knowledge")) {
      auto kn = knowledge_from_string(params.at("knowledge").get<std::string>());
      if (!kn) throw InvalidArgument("unknown impersonation knowledge level");
      a.knowledge = *kn;
    }
    a.target = params.value("target", a.target);
    a.attempts = params.value("attempts", a.attempts);
    a.rounds_to_waste = params.value("rounds_to_waste", a.rounds_to_waste);
    a.withhold = params.value("withhold", a.withhold);
    return a;
  }

  nlohmann::json to_json() const {
    const auto& e = election;
    nlohmann::json j{{"s", e.s},
                     {"m", e.m},
                     {"N", e.voters},
                     {"candidates", e.candidates},
                     {"channel", {{"loss_prob", e.loss_prob}, {"flip_prob", e.flip_prob}}},
                     {"ecc_r", e.ecc_r},
                     {"tolerance", e.effective_tolerance()},
                     {"retry_cap", e.retry_cap},
                     {"seed", seed},
                     {"trials", trials},
                     {"fault", std::string(to_string(e.fault))},
                     {"test_scale", e.test_scale}};
    j["adversary"] = {{"kind", std::string(to_string(e.adversary.kind))},
                      {"params",
                       {{"fraction", e.adversary.fraction},
                        {"knowledge", std::string(to_string(e.adversary.knowledge))},
                        {"target", e.adversary.target},
                        {"attempts", e.adversary.attempts},
                        {"rounds_to_waste", e.adversary.rounds_to_waste},
                        {"withhold", e.adversary.withhold}}}};
    if (!e.choices.empty()) j["choices"] = e.choices;
    return j;
  }
};

struct TrialOutcome {
  std::size_t trial = 0;
  bool completed = false;
  std::string reason;  // empty when completed
  unsigned rounds = 0;
  std::map<std::string, std::size_t> tally;
  std::size_t irregularities = 0;
  std::vector<std::string> flagged;
  std::vector<std::string> missing;

  nlohmann::json to_json() const {
    nlohmann::json j{{"trial", trial},   {"outcome", completed ? "completed" : "aborted"},
                     {"rounds", rounds}, {"tally", tally},
                     {"irregularities", irregularities}, {"flagged", flagged},
                     {"missing", missing}};
    if (!completed) j["reason"] = reason;
    return j;
  }
};

struct RunReport {
  Scenario scenario;
  std::vector<TrialOutcome> trials;
  SessionStats sessions;
  BallotStats ballots;
  std::size_t completed = 0;
  Transcript transcript;
  std::vector<BallotTable> tables;  // public ballot list per trial
  double wall_seconds = 0.0;        // kept out of the report file so reruns stay byte-identical

  double check_error_rate() const {
    return sessions.decisive == 0 ? 0.0 : static_cast<double>(sessions.check_errors) / static_cast<double>(sessions.decisive);
  }
  double detection_rate() const {
    if (sessions.sessions == 0) return 0.0;
    std::size_t detected = 0;
    for (const auto& k : {"error-rate-exceeded", "undecidable"}) {
      auto it = sessions.outcomes.find(k);
      if (it != sessions.outcomes.end()) detected += it->second;
    }
    return static_cast<double>(detected) / static_cast<double>(sessions.sessions);
  }
  double key_agreement_rate() const {
    return sessions.completed == 0 ? 0.0
                                   : static_cast<double>(sessions.completed - sessions.key_mismatches) /
                                         static_cast<double>(sessions.completed);
  }
  double mean_sift_bits() const {
    return sessions.sessions == 0 ? 0.0 : static_cast<double>(sessions.sift_bits) / static_cast<double>(sessions.sessions);
  }

  nlohmann::json to_json() const {
    auto per_trial = nlohmann::json::array();
    for (const auto& t : trials) per_trial.push_back(t.to_json());
    return {{"scenario", scenario.to_json()},
            {"trials", per_trial},
            {"completed", completed},
            {"sessions", sessions.to_json()},
            {"ballots", ballots.to_json()},
            {"ballot_counts_reconcile", ballots.reconciles()},
            {"statistics",
             {{"check_error_rate", check_error_rate()},
              {"detection_rate", detection_rate()},
              {"key_agreement_rate", key_agreement_rate()},
              {"mean_sift_bits", mean_sift_bits()}}}};
  }
};

inline TrialOutcome summarize_trial(std::size_t trial, const ElectionResult& r) {
  TrialOutcome t;
  t.trial = trial;
  t.rounds = r.rounds;
  t.tally = r.tally;
  t.irregularities = r.irregularities;
  t.missing = r.missing_voters();
  for (const auto& v : r.voters)
    if (v.flagged) t.flagged.push_back(v.id);
  t.completed = r.completed();
  if (!r.published) t.reason = "not-published";
  else if (!t.flagged.empty()) t.reason = "voters-flagged";
  else if (!r.all_voted()) t.reason = "voters-missing";
  else if (r.irregularities > 0) t.reason = "inclusion-irregularity";
  else if (!r.tally_matches_cast()) t.reason = "tally-mismatch";
  return t;
}

/// Runs `trials` independent elections; trial t uses the stream derived
/// from (seed, t).
inline RunReport run_scenario(const Scenario& sc) {
  sc.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.scenario = sc;
  for (std::size_t t = 0; t < sc.trials; ++t) {
    Election election(sc.election, sc.seed, t);
    auto res = election.run();
    report.trials.push_back(summarize_trial(t, res));
    if (report.trials.back().completed) ++report.completed;
    report.sessions.merge(res.sessions);
    report.ballots.merge(res.ballots);
    report.tables.push_back(res.table3);
    report.transcript.append(election.transcript());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Detection rate

struct DetectionEstimate {
  std::size_t trials = 0;
  std::size_t detected = 0;
  double rate = 0.0;
  Interval ci;
  double mean_check_error = 0.0;  // mean of per-session rates over sessions with a decisive check
  std::size_t decisive_sessions = 0;
};

/// Share of stand-alone sessions that the user aborts at the check, under
/// intercept-resend on `fraction` of the qubits.
inline DetectionEstimate estimate_detection_rate(std::size_t m, double fraction, double tolerance, std::size_t trials,
                                                 Rng& rng) {
  if (trials < 100) throw InvalidArgument("detection estimate needs at least 100 trials");
  DetectionEstimate est;
  est.trials = trials;
  RunningStats rates;
  AqkdParams params{m, tolerance, EccConfig{}, 0};
  for (std::size_t i = 0; i < trials; ++i) {
    InterceptResend eve(fraction);
    QuantumChannelConfig channel{0.0, 0.0, fraction > 0.0 ? &eve : nullptr};
    auto res = run_aqkd_session(params, channel, rng);
    if (res.detected()) ++est.detected;
    if (res.check.decisive > 0) rates.add(res.check.error_rate());
  }
  est.rate = static_cast<double>(est.detected) / static_cast<double>(trials);
  est.ci = wilson_interval(est.detected, trials);
  est.mean_check_error = rates.mean();
  est.decisive_sessions = rates.count();
  return est;
}

// ---------------------------------------------------------------------------
// Transcript audits

struct PrivacyAudit {
  std::size_t anonymous_with_sender = 0;   // anonymous record naming a sender
  std::size_t anonymous_with_id = 0;       // anonymous record whose payload mentions a voter ID
  std::size_t admin_with_candidate = 0;    // administrator-visible record carrying a candidate string
  std::size_t premature_candidate = 0;     // candidate string outside the candidate announcement before publication

  std::size_t violations() const {
    return anonymous_with_sender + anonymous_with_id + admin_with_candidate + premature_candidate;
  }
};

namespace detail {

inline bool admin_visible(const Record& r) {
  const std::string admin(party::kAdministrator);
  if (r.channel == Channel::Authenticated) return r.from == admin || r.to == admin;
  if (r.channel == Channel::Local) return r.from == admin;
  return false;
}

inline bool mentions_any(const std::string& text, const std::vector<std::string>& needles) {
  for (const auto& n : needles)
    if (!n.empty() && text.find(n) != std::string::npos) return true;
  return false;
}

}  // namespace detail

/// Scans a transcript for data-flow leaks: sender identities on anonymous
/// channels, candidate strings in anything the administrator sees privately,
/// and candidate strings anywhere before the Published phase other than the
/// candidate announcement itself.
inline PrivacyAudit audit_privacy(const Transcript& t) {
  PrivacyAudit audit;
  std::map<std::size_t, std::vector<std::string>> ids, candidates;
  for (const auto& r : t.records()) {
    if (r.step == "setup.candidates")
      for (const auto& c : r.payload.at("candidates")) candidates[r.trial].push_back(c.at("value").get<std::string>());
    if (r.step == "auth.request") ids[r.trial].push_back(r.payload.at("id").get<std::string>());
  }
  for (const auto& r : t.records()) {
    const auto text = r.payload.dump();
    if (is_anonymous(r.channel)) {
      if (r.from) ++audit.anonymous_with_sender;
      if (detail::mentions_any(text, ids[r.trial])) ++audit.anonymous_with_id;
    }
    if (detail::admin_visible(r) && detail::mentions_any(text, candidates[r.trial])) ++audit.admin_with_candidate;
    if (r.phase != "Published" && r.step != "setup.candidates" && detail::mentions_any(text, candidates[r.trial]))
      ++audit.premature_candidate;
  }
  return audit;
}

struct VerifyReport {
  std::size_t trials = 0;
  std::vector<std::string> violations;
  std::map<std::size_t, std::map<std::string, std::size_t>> tallies;  // recomputed from the public list

  bool ok() const { return violations.empty(); }
};

/// Replays the public records of a transcript: recomputes each trial's tally
/// from the published ballot list and rechecks it against the published
/// tally, the candidate set and the final verification set. Also runs the
/// privacy audit.
inline VerifyReport verify_transcript(const Transcript& t) {
  VerifyReport rep;
  struct TrialView {
    std::optional<CandidateSet> candidates;
    std::optional<BallotTable> table;
    std::optional<std::map<std::string, std::size_t>> tally;
    std::optional<std::size_t> last_verification_size;
  };
  std::map<std::size_t, TrialView> views;
  for (const auto& r : t.records()) {
    if (r.channel != Channel::PublicBroadcast) continue;
    auto& v = views[r.trial];
    if (r.step == "setup.candidates") v.candidates = CandidateSet::from_json(r.payload);
    else if (r.step == "publish.table3") v.table = ballot_table_from_json(r.payload.at("rows"));
    else if (r.step == "publish.tally") v.tally = r.payload.at("tally").get<std::map<std::string, std::size_t>>();
    else if (r.step == "round.verification-set") v.last_verification_size = r.payload.at("remarks").size();
  }
  rep.trials = views.size();
  for (const auto& [trial, v] : views) {
    const auto tag = "trial " + std::to_string(trial) + ": ";
    if (!v.candidates) {
      rep.violations.push_back(tag + "no candidate announcement");
      continue;
    }
    if (!v.table || !v.tally) {
      rep.violations.push_back(tag + "results were never published");
      continue;
    }
    std::map<std::string, std::size_t> recount;
    for (const auto& e : v.candidates->entries()) recount[e.label] = 0;
    std::set<BitString> keys;
    for (const auto& row : *v.table) {
      auto label = v.candidates->label_of(row.vote);
      if (!label) rep.violations.push_back(tag + "published ballot is not a candidate string");
      else ++recount[*label];
      if (!keys.insert(row.key_left).second) rep.violations.push_back(tag + "duplicate K_L in published list");
    }
    rep.tallies[trial] = recount;
    if (recount != *v.tally) rep.violations.push_back(tag + "published tally differs from the ballot list");
    if (v.last_verification_size && *v.last_verification_size != v.table->size())
      rep.violations.push_back(tag + "ballot list size differs from the final verification set");
  }
  const auto audit = audit_privacy(t);
  if (audit.violations() > 0) rep.violations.push_back("privacy audit found " + std::to_string(audit.violations()) + " leaking records");
  return rep;
}

// ---------------------------------------------------------------------------
// Output files

struct OutputPaths {
  std::filesystem::path report;
  std::filesystem::path transcript;
  std::filesystem::path table3;
};

inline OutputPaths output_paths(const std::filesystem::path& dir) {
  return {dir / "report.json", dir / "transcript.jsonl", dir / "table3.json"};
}

/// Writes report.json, transcript.jsonl and table3.json into `dir`. Files
/// are staged and renamed; on any failure every staged or renamed file is
/// removed and InvalidArgument is thrown.
inline OutputPaths emit_outputs(const RunReport& report, const std::filesystem::path& dir) {
  const auto paths = output_paths(dir);
  auto tables = nlohmann::json::array();
  for (std::size_t t = 0; t < report.tables.size(); ++t) tables.push_back({{"trial", t}, {"rows", to_json(report.tables[t])}});

  const std::vector<std::pair<std::filesystem::path, std::string>> files{
      {paths.report, report.to_json().dump(2) + "\n"},
      {paths.transcript, report.transcript.to_jsonl()},
      {paths.table3, tables.dump(2) + "\n"},
  };
  std::vector<std::filesystem::path> written;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& p : written) std::filesystem::remove(p, ec);
  };

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir.string() + ": " + ec.message());
  for (const auto& [path, body] : files) {
    auto staged = path;
    staged += ".tmp";
    {
      std::ofstream out(staged, std::ios::binary | std::ios::trunc);
      if (out) {
        written.push_back(staged);
        out << body;
      }
      if (!out) {
        cleanup();
        throw InvalidArgument("cannot write " + staged.string());
      }
    }
  }
  for (const auto& [path, _] : files) {
    auto staged = path;
    staged += ".tmp";
    std::filesystem::rename(staged, path, ec);
    if (ec) {
      written.push_back(path);
      cleanup();
      throw InvalidArgument("cannot finalise " + path.string() + ": " + ec.message());
    }
    std::erase(written, staged);
    written.push_back(path);
  }
  return paths;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qelect
