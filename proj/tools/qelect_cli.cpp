// qelect: run, sweep, verify and demo front end for the election simulator.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qelect/qelect.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kViolation = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string adversary;
  std::string out;
  bool quiet = false;
};

json load_config(const Common& c) {
  json j = json::object();
  if (!c.config.empty()) {
    try {
      j = json::parse(qelect::read_file(c.config));
    } catch (const json::parse_error& e) {
      throw qelect::InvalidArgument("cannot parse " + c.config + ": " + e.what());
    }
  }
  if (c.seed) j["seed"] = *c.seed;
  if (c.trials) j["trials"] = *c.trials;
  if (!c.adversary.empty()) {
    if (!j.contains("adversary") || !j["adversary"].is_object()) j["adversary"] = json::object();
    j["adversary"]["kind"] = c.adversary;
  }
  if (!c.out.empty()) j["report_path"] = c.out;
  return j;
}

void print_summary(const qelect::RunReport& r, std::ostream& os) {
  const auto& sc = r.scenario;
  os << "trials " << sc.trials << ", completed " << r.completed << "\n";
  os << "sessions " << r.sessions.sessions << ", completed " << r.sessions.completed << "\n";
  for (const auto& [k, v] : r.sessions.outcomes) os << "  " << k << ": " << v << "\n";
  os << std::fixed << std::setprecision(4);
  os << "check error rate " << r.check_error_rate() << ", detection rate " << r.detection_rate()
     << ", key agreement " << r.key_agreement_rate() << ", mean sift bits " << r.mean_sift_bits() << "\n";
  os << "ballots received " << r.ballots.received << ", counted " << r.ballots.counted << "\n";
  for (const auto& [origin, outcomes] : r.ballots.by_origin)
    for (const auto& [k, v] : outcomes) os << "  " << origin << " / " << k << ": " << v << "\n";
  os.unsetf(std::ios::floatfield);
  for (const auto& t : r.trials) {
    if (t.completed) continue;
    os << "trial " << t.trial << " aborted: " << t.reason << "\n";
  }
}

int cmd_run(const Common& c) {
  auto sc = qelect::Scenario::from_json(load_config(c));
  auto report = qelect::run_scenario(sc);
  if (!c.quiet) print_summary(report, std::cout);
  if (!sc.report_path.empty()) {
    auto paths = qelect::emit_outputs(report, sc.report_path);
    if (!c.quiet) std::cout << "wrote " << paths.report.string() << ", " << paths.transcript.string() << ", "
                            << paths.table3.string() << "\n";
  }
  std::cerr << "wall time " << report.wall_seconds << " s\n";
  return kOk;
}

/// Where a sweepable parameter lives in the config object.
std::vector<std::string> param_path(const std::string& name) {
  if (name == "loss_prob" || name == "flip_prob") return {"channel", name};
  if (name == "fraction" || name == "attempts" || name == "withhold" || name == "rounds_to_waste" || name == "target")
    return {"adversary", "params", name};
  if (name == "s" || name == "m" || name == "N" || name == "ecc_r" || name == "tolerance" || name == "retry_cap" ||
      name == "trials" || name == "seed")
    return {name};
  throw qelect::InvalidArgument("parameter cannot be swept: " + name);
}

int cmd_sweep(const Common& c, const std::string& param, const std::vector<std::string>& values) {
  const auto base = load_config(c);
  const auto path = param_path(param);
  if (values.empty()) throw qelect::InvalidArgument("sweep needs at least one value");
  if (path.front() == "adversary" && !base.contains("adversary"))
    throw qelect::InvalidArgument("sweeping " + param + " needs an adversary");

  std::vector<qelect::Scenario> scenarios;
  for (const auto& v : values) {
    json value;
    try {
      value = json::parse(v);
    } catch (const json::parse_error&) {
      throw qelect::InvalidArgument("sweep value is not a number: " + v);
    }
    auto j = base;
    json* node = &j;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
    (*node)[path.back()] = value;
    j.erase("report_path");
    scenarios.push_back(qelect::Scenario::from_json(j));
  }

  auto rows = json::array();
  if (!c.quiet)
    std::cout << std::left << std::setw(12) << param << std::setw(12) << "completed" << std::setw(14) << "check_err"
              << std::setw(12) << "detection" << std::setw(12) << "agreement" << "sift\n";
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    auto r = qelect::run_scenario(scenarios[i]);
    rows.push_back({{"value", json::parse(values[i])},
                    {"trials", r.scenario.trials},
                    {"completed", r.completed},
                    {"check_error_rate", r.check_error_rate()},
                    {"detection_rate", r.detection_rate()},
                    {"key_agreement_rate", r.key_agreement_rate()},
                    {"mean_sift_bits", r.mean_sift_bits()}});
    if (!c.quiet)
      std::cout << std::left << std::setw(12) << values[i] << std::setw(12)
                << (std::to_string(r.completed) + "/" + std::to_string(r.scenario.trials)) << std::setw(14)
                << r.check_error_rate() << std::setw(12) << r.detection_rate() << std::setw(12)
                << r.key_agreement_rate() << r.mean_sift_bits() << "\n";
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const auto file = fs::path(c.out) / "sweep.json";
    std::ofstream os(file, std::ios::binary);
    os << json{{"parameter", param}, {"rows", rows}}.dump(2) << "\n";
    if (!os) throw qelect::InvalidArgument("cannot write " + file.string());
  }
  return kOk;
}

int cmd_verify(const Common& c, std::string target) {
  if (target.empty()) target = c.out;
  if (target.empty()) throw qelect::InvalidArgument("verify needs a transcript file or output directory");
  fs::path file = target;
  if (fs::is_directory(file)) file /= "transcript.jsonl";
  qelect::Transcript t;
  try {
    t = qelect::Transcript::from_jsonl(qelect::read_file(file));
  } catch (const json::exception& e) {
    throw qelect::InvalidArgument("malformed transcript " + file.string() + ": " + e.what());
  }
  auto rep = qelect::verify_transcript(t);

  // A standalone Table 3 next to the transcript must match the published one.
  const auto table_file = file.parent_path() / "table3.json";
  if (fs::exists(table_file)) {
    const auto tables = json::parse(qelect::read_file(table_file));
    for (const auto& entry : tables) {
      const auto trial = entry.at("trial").get<std::size_t>();
      auto standalone = qelect::ballot_table_from_json(entry.at("rows"));
      bool matched = false;
      for (const auto& r : t.records())
        if (r.trial == trial && r.step == "publish.table3")
          matched = qelect::ballot_table_from_json(r.payload.at("rows")) == standalone;
      if (!matched) rep.violations.push_back("trial " + std::to_string(trial) + ": table3.json differs from transcript");
    }
  }

  if (!c.quiet) {
    std::cout << "records " << t.size() << ", trials " << rep.trials << "\n";
    for (const auto& [trial, tally] : rep.tallies) {
      std::cout << "trial " << trial << " tally";
      for (const auto& [label, n] : tally) std::cout << " " << label << "=" << n;
      std::cout << "\n";
    }
  }
  for (const auto& v : rep.violations) std::cerr << "violation: " << v << "\n";
  if (!rep.ok()) return kViolation;
  if (!c.quiet) std::cout << "ok\n";
  return kOk;
}

int cmd_demo(const Common& c) {
  json j = load_config(c);
  if (!j.contains("N")) j["N"] = 5;
  j["trials"] = 1;
  auto sc = qelect::Scenario::from_json(j);
  qelect::Election e(sc.election, sc.seed);
  auto& out = std::cout;
  const bool say = !c.quiet;

  e.setup();
  if (say) {
    out << "Setup: " << sc.election.voters << " voters, candidate strings of " << sc.election.s << " bits\n";
    for (const auto& cand : e.candidates().entries()) out << "  " << cand.label << " = " << cand.value.to_hex() << "\n";
  }
  std::size_t last_records = 0;
  for (;;) {
    e.begin_round();
    if (say) out << "Round " << e.round() << "\n";
    for (const auto& v : e.voters())
      if (!v.voted && !v.flagged) (void)e.authenticate(v.id, v.credential.k);
    if (say) out << "  administrator verified " << e.table1().size() << " voters\n";
    e.run_key_distribution();
    if (say) {
      std::size_t sessions = 0, completed = 0;
      for (std::size_t i = last_records; i < e.transcript().size(); ++i) {
        const auto& r = e.transcript().records()[i];
        if (r.step == "aqkd.check") ++sessions;
        if (r.step == "aqkd.accept") ++completed;
      }
      out << "  anonymous key distribution: " << completed << " keys from " << sessions << " sessions\n";
    }
    e.begin_voting();
    std::size_t counted = 0, sent = 0;
    for (std::size_t i = 0; i < e.voters().size(); ++i) {
      const auto& v = e.voters()[i];
      if (v.voted || v.flagged || !v.key) continue;
      auto msg = e.cast_ballot(i, e.candidates().entries()[v.choice].label);
      ++sent;
      if (msg && e.receive_ballot(*msg).counted) ++counted;
    }
    if (say) out << "  counter accepted " << counted << " of " << sent << " anonymous ballots\n";
    auto rc = e.close_round();
    if (say) out << "  verification set has " << rc.verification_set.size() << " remarks, " << rc.failed.size()
                 << " voters retry\n";
    last_records = e.transcript().size();
    bool pending = false;
    for (const auto& v : e.voters()) pending = pending || (!v.voted && !v.flagged);
    if (!pending) break;
  }
  e.publish_results();
  for (std::size_t i = 0; i < e.voters().size(); ++i) (void)e.verify_inclusion(i);
  auto res = e.result();
  if (say) {
    out << "Published " << res.table3.size() << " ballots\n";
    for (const auto& [label, n] : res.tally) out << "  " << label << ": " << n << "\n";
    for (const auto& v : res.voters)
      out << "  " << v.id << " voted " << v.choice << ", inclusion " << qelect::to_string(v.inclusion) << "\n";
    out << (res.completed() ? "Election completed, tally matches the cast votes\n" : "Election did not complete\n");
  }
  if (!c.out.empty()) {
    qelect::RunReport report;
    report.scenario = sc;
    report.trials.push_back(qelect::summarize_trial(0, res));
    report.completed = report.trials.back().completed ? 1 : 0;
    report.sessions = res.sessions;
    report.ballots = res.ballots;
    report.tables.push_back(res.table3);
    report.transcript = e.transcript();
    qelect::emit_outputs(report, c.out);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anonymous quantum key distribution and election simulator"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config, "scenario config (JSON)");
  app.add_option("--seed", common.seed, "seed for every random draw");
  app.add_option("--trials", common.trials, "independent elections to run");
  app.add_option("--adversary", common.adversary,
                 "none, intercept-resend, impersonate-voter, replay-ballot, forge-random-ballot, "
                 "dishonest-abstain or eavesdrop-classical");
  app.add_option("--out", common.out, "output directory");
  app.add_flag("--quiet", common.quiet, "print nothing on success");

  auto* run = app.add_subcommand("run", "execute a scenario");
  auto* sweep = app.add_subcommand("sweep", "vary one parameter over a list of values");
  std::string param;
  std::vector<std::string> values;
  sweep->add_option("--param", param, "parameter name")->required();
  sweep->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
  auto* verify = app.add_subcommand("verify", "replay a transcript and recheck the public tables");
  std::string target;
  verify->add_option("transcript", target, "transcript.jsonl or an output directory");
  auto* demo = app.add_subcommand("demo", "small honest election with narration");

  // Global options are accepted after the verb too.
  for (auto* sub : {run, sweep, verify, demo}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(common);
    if (*sweep) return cmd_sweep(common, param, values);
    if (*verify) return cmd_verify(common, target);
    if (*demo) return cmd_demo(common);
  } catch (const qelect::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const qelect::ProtocolViolation& e) {
    std::cerr << "protocol violation: " << e.what() << "\n";
    return kViolation;
  }
  return kConfigError;
}
