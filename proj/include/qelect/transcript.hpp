#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qelect/errors.hpp"

namespace qelect {

enum class Channel {
  Authenticated,       // confidential and authenticated point-to-point
  AnonymousClassical,  // sender stripped, shuffled delivery
  AnonymousQuantum,
  PublicBroadcast,
  Local,  // a party's own decision or observation, not a message
};

inline std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::Authenticated: return "authenticated";
    case Channel::AnonymousClassical: return "anonymous-classical";
    case Channel::AnonymousQuantum: return "anonymous-quantum";
    case Channel::PublicBroadcast: return "public-broadcast";
    case Channel::Local: return "local";
  }
  return "?";
}

inline std::optional<Channel> channel_from_string(std::string_view s) {
  for (auto c : {Channel::Authenticated, Channel::AnonymousClassical, Channel::AnonymousQuantum,
                 Channel::PublicBroadcast, Channel::Local})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline bool is_anonymous(Channel c) { return c == Channel::AnonymousClassical || c == Channel::AnonymousQuantum; }

namespace party {
inline constexpr std::string_view kAdministrator = "administrator";
inline constexpr std::string_view kCounter = "counter";
inline constexpr std::string_view kAdversary = "adversary";
}  // namespace party

struct Record {
  std::size_t trial = 0;
  unsigned round = 0;
  std::string phase;
  std::string step;
  Channel channel = Channel::Local;
  std::optional<std::string> from;  // never set on anonymous channels
  std::optional<std::string> to;
  nlohmann::json payload = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["trial"] = trial;
    j["round"] = round;
    j["phase"] = phase;
    j["step"] = step;
    j["channel"] = std::string(to_string(channel));
    if (from) j["from"] = *from;
    if (to) j["to"] = *to;
    j["payload"] = payload;
    return j;
  }

  static Record from_json(const nlohmann::json& j) {
    Record r;
    r.trial = j.at("trial").get<std::size_t>();
    r.round = j.at("round").get<unsigned>();
    r.phase = j.at("phase").get<std::string>();
    r.step = j.at("step").get<std::string>();
    auto ch = channel_from_string(j.at("channel").get<std::string>());
    if (!ch) throw InvalidArgument("unknown channel in transcript record");
    r.channel = *ch;
    if (j.contains("from")) r.from = j.at("from").get<std::string>();
    if (j.contains("to")) r.to = j.at("to").get<std::string>();
    r.payload = j.value("payload", nlohmann::json::object());
    return r;
  }
};

/// Ordered log of every message and party decision in a run. Trial, round
/// and phase are ambient context stamped onto each appended record.
class Transcript {
 public:
  void set_trial(std::size_t t) { trial_ = t; }
  void set_round(unsigned r) { round_ = r; }
  void set_phase(std::string phase) { phase_ = std::move(phase); }
  unsigned round() const noexcept { return round_; }
  const std::string& phase() const noexcept { return phase_; }

  void send(Channel channel, std::string step, std::optional<std::string> from, std::optional<std::string> to,
            nlohmann::json payload) {
    if (is_anonymous(channel) && from) throw ProtocolViolation("anonymous channel record may not name a sender");
    Record r;
    r.trial = trial_;
    r.round = round_;
    r.phase = phase_;
    r.step = std::move(step);
    r.channel = channel;
    r.from = std::move(from);
    r.to = std::move(to);
    r.payload = std::move(payload);
    records_.push_back(std::move(r));
  }

  void anonymous(Channel channel, std::string step, std::string to, nlohmann::json payload) {
    send(channel, std::move(step), std::nullopt, std::move(to), std::move(payload));
  }

  void broadcast(std::string step, std::string from, nlohmann::json payload) {
    send(Channel::PublicBroadcast, std::move(step), std::move(from), std::nullopt, std::move(payload));
  }

  void local(std::string step, std::string who, nlohmann::json payload) {
    send(Channel::Local, std::move(step), std::move(who), std::nullopt, std::move(payload));
  }

  void append(const Transcript& other) { records_.insert(records_.end(), other.records_.begin(), other.records_.end()); }

  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// One JSON object per line; keys sorted, so output is byte-stable.
  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.to_json().dump();
      out += '\n';
    }
    return out;
  }

  static Transcript from_jsonl(std::string_view text) {
    Transcript t;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      auto line = text.substr(pos, nl - pos);
      if (!line.empty()) t.records_.push_back(Record::from_json(nlohmann::json::parse(line)));
      pos = nl + 1;
    }
    return t;
  }

 private:
  std::size_t trial_ = 0;
  unsigned round_ = 0;
  std::string phase_ = "Setup";
  std::vector<Record> records_;
};

}  // namespace qelect
