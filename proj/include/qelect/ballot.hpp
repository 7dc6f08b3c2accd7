#pragma once

// Ballot-side data: the published candidate strings, the counter's key table
// and the public ballot list.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qelect/bitstring.hpp"
#include "qelect/errors.hpp"
#include "qelect/otp.hpp"
#include "qelect/rng.hpp"

namespace qelect {

/// s-bit strings standing for candidates, published before authentication.
class CandidateSet {
 public:
  struct Entry {
    BitString value;
    std::string label;
  };

  /// Largest log2 probability that a uniform s-bit string lands in S.
  static constexpr double kNegligibleLog2 = -40.0;

  /// |S| / 2^s <= 2^-40.
  static bool negligible(std::size_t count, std::size_t s) {
    if (count == 0) return true;
    return std::log2(static_cast<double>(count)) - static_cast<double>(s) <= kNegligibleLog2;
  }

  /// Samples distinct strings without checking the negligibility gate.
  /// `resamples` counts collisions that forced a redraw.
  static CandidateSet generate(const std::vector<std::string>& labels, std::size_t s, Rng& rng,
                               std::size_t* resamples = nullptr) {
    if (s == 0) throw InvalidArgument("candidate bit length must be positive");
    if (s < 64 && labels.size() > (std::size_t{1} << s)) throw InvalidArgument("more candidates than s-bit strings");
    CandidateSet set;
    set.s_ = s;
    for (const auto& label : labels) {
      if (set.find(label)) throw InvalidArgument("duplicate candidate label: " + label);
      for (;;) {
        auto v = random_bits(s, rng);
        if (!set.label_of(v)) {
          set.index_.emplace(v, set.entries_.size());
          set.entries_.push_back({std::move(v), label});
          break;
        }
        if (resamples) ++*resamples;
      }
    }
    return set;
  }

  std::size_t bits() const noexcept { return s_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  bool contains(const BitString& v) const { return index_.contains(v); }

  const BitString* find(std::string_view label) const {
    for (const auto& e : entries_)
      if (e.label == label) return &e.value;
    return nullptr;
  }

  std::optional<std::string> label_of(const BitString& v) const {
    auto it = index_.find(v);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].label;
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& e : entries_) arr.push_back({{"label", e.label}, {"value", e.value.serialize()}});
    return {{"s", s_}, {"candidates", arr}};
  }

  static CandidateSet from_json(const nlohmann::json& j) {
    CandidateSet set;
    set.s_ = j.at("s").get<std::size_t>();
    for (const auto& e : j.at("candidates")) {
      auto v = BitString::parse(e.at("value").get<std::string>());
      set.index_.emplace(v, set.entries_.size());
      set.entries_.push_back({std::move(v), e.at("label").get<std::string>()});
    }
    return set;
  }

 private:
  std::size_t s_ = 0;
  std::vector<Entry> entries_;
  std::unordered_map<BitString, std::size_t> index_;
};

/// (K_L, E_{K_R}[v]) as sent on the anonymous channel.
struct BallotMessage {
  BitString key_left;
  BitString ciphertext;

  friend bool operator==(const BallotMessage&, const BallotMessage&) = default;

  nlohmann::json to_json() const { return {{"K_L", key_left.serialize()}, {"ct", ciphertext.serialize()}}; }
};

/// Builds a ballot from a 2s-bit key split into halves.
inline BallotMessage make_ballot(const BitString& key, const BitString& vote) {
  if (key.size() != 2 * vote.size()) throw InvalidArgument("ballot key must be twice the candidate length");
  const auto half = vote.size();
  return {key.prefix(half), otp_encrypt(key.slice(half, half), vote)};
}

enum class BallotRejection { UnknownKey, Replay, InvalidBallot, WrongPhase };

inline std::string_view to_string(BallotRejection r) {
  switch (r) {
    case BallotRejection::UnknownKey: return "unknown-key";
    case BallotRejection::Replay: return "replay";
    case BallotRejection::InvalidBallot: return "invalid-ballot";
    case BallotRejection::WrongPhase: return "wrong-phase";
  }
  return "?";
}

struct BallotDecision {
  bool counted = false;
  BallotRejection reason = BallotRejection::UnknownKey;
  BitString vote;  // set when counted
};

/// Counter's key table: (K_L', K_R', remark a) rows keyed by K_L'.
class KeyTable {
 public:
  struct Row {
    BitString left;
    BitString right;
    BitString remark;
    bool accepted = false;
    std::optional<BitString> vote;
  };

  /// False on a K_L' collision; the table is unchanged in that case.
  bool add(BitString left, BitString right, BitString remark) {
    if (index_.contains(left)) return false;
    index_.emplace(left, rows_.size());
    rows_.push_back({std::move(left), std::move(right), std::move(remark), false, std::nullopt});
    return true;
  }

  bool contains(const BitString& left) const { return index_.contains(left); }

  /// Key lookup, replay check, decrypt, membership check, in that order.
  BallotDecision receive(const BallotMessage& msg, const CandidateSet& candidates) {
    BallotDecision d;
    auto it = index_.find(msg.key_left);
    if (it == index_.end()) {
      d.reason = BallotRejection::UnknownKey;
      return d;
    }
    auto& row = rows_[it->second];
    if (row.accepted) {
      d.reason = BallotRejection::Replay;
      return d;
    }
    if (msg.ciphertext.size() != row.right.size()) {
      d.reason = BallotRejection::InvalidBallot;
      return d;
    }
    auto v = otp_decrypt(row.right, msg.ciphertext);
    if (!candidates.contains(v)) {
      d.reason = BallotRejection::InvalidBallot;
      return d;
    }
    row.accepted = true;
    row.vote = v;
    d.counted = true;
    d.vote = std::move(v);
    return d;
  }

  /// Deletes rows whose key was never accepted; returns how many.
  std::size_t purge_unaccepted() {
    std::vector<Row> kept;
    for (auto& r : rows_)
      if (r.accepted) kept.push_back(std::move(r));
    const auto removed = rows_.size() - kept.size();
    rows_ = std::move(kept);
    index_.clear();
    for (std::size_t i = 0; i < rows_.size(); ++i) index_.emplace(rows_[i].left, i);
    return removed;
  }

  /// Remarks of accepted rows, in table order.
  std::vector<BitString> accepted_remarks() const {
    std::vector<BitString> out;
    for (const auto& r : rows_)
      if (r.accepted) out.push_back(r.remark);
    return out;
  }

  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<Row> rows_;
  std::unordered_map<BitString, std::size_t> index_;
};

/// One row of the public ballot list.
struct BallotTableRow {
  BitString vote;
  BitString key_left;

  friend bool operator==(const BallotTableRow&, const BallotTableRow&) = default;
};

using BallotTable = std::vector<BallotTableRow>;

inline nlohmann::json to_json(const BallotTable& table) {
  auto arr = nlohmann::json::array();
  for (const auto& row : table) arr.push_back({{"v", row.vote.serialize()}, {"K_L", row.key_left.serialize()}});
  return arr;
}

inline BallotTable ballot_table_from_json(const nlohmann::json& arr) {
  BallotTable t;
  for (const auto& row : arr)
    t.push_back({BitString::parse(row.at("v").get<std::string>()), BitString::parse(row.at("K_L").get<std::string>())});
  return t;
}

}  // namespace qelect
