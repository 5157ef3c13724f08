// Copyright 2026 The shiftlink Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shiftlink/error.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

/// One shift-book entry. Topic is the log book (plant), document the 8-hour
/// shift the entry was written in.
struct Record {
  std::string record_id;
  std::string topic_id;
  std::string document_id;
  std::int64_t timestamp = 0;  // seconds since epoch, UTC
  std::string text;
  std::optional<std::string> fl_code;
  std::map<std::string, std::string> attributes;

  bool operator==(const Record&) const = default;
};

/// A time-ordered sequence of record ids narrating one story. Size one is a
/// singleton.
struct Chain {
  std::string chain_id;
  std::vector<std::string> record_ids;

  bool operator==(const Chain&) const = default;
};

inline std::string singleton_chain_id(const std::string& record_id) {
  return "singleton:" + record_id;
}

/// Canonical time order: timestamp, then record id.
inline bool time_before(const Record& a, const Record& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.record_id < b.record_id;
}

inline std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    const bool ws = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                    c == '\f' || c == '\v';
    if (ws) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// Records plus optional gold chains. Immutable once built; every accessor
// is const and safe to share between threads.
class Corpus {
 public:
  Corpus() = default;

  /// Validates and indexes. Chain members are stably re-sorted by
  /// timestamp (gold order breaks ties) and chains are ordered by their
  /// first member.
  static Corpus build(std::vector<Record> records,
                      std::optional<std::vector<Chain>> gold_chains) {
    Corpus c;
    static const std::int64_t kMaxTimestamp = days_from_civil(2100, 1, 1) * 86400;
    for (auto& r : records) {
      if (r.record_id.empty()) throw ValidationError("record with empty record_id");
      if (normalize_whitespace(r.text).empty()) {
        throw ValidationError("record '" + r.record_id + "' has empty text");
      }
      if (r.timestamp < 0 || r.timestamp >= kMaxTimestamp) {
        throw ValidationError("record '" + r.record_id +
                              "' has timestamp outside [1970, 2100)");
      }
      auto id = r.record_id;
      if (!c.records_.emplace(id, std::move(r)).second) {
        throw ValidationError("duplicate record_id '" + id + "'");
      }
    }
    for (const auto& [id, r] : c.records_) c.topics_[r.topic_id].push_back(id);
    for (auto& [topic, ids] : c.topics_) {
      std::sort(ids.begin(), ids.end(), [&](const auto& a, const auto& b) {
        return time_before(c.records_.at(a), c.records_.at(b));
      });
    }
    if (gold_chains) {
      c.has_gold_ = true;
      std::set<std::string> chain_ids;
      for (auto& chain : *gold_chains) {
        if (chain.record_ids.empty()) {
          throw ValidationError("chain '" + chain.chain_id + "' is empty");
        }
        if (!chain_ids.insert(chain.chain_id).second) {
          throw ValidationError("duplicate chain_id '" + chain.chain_id + "'");
        }
        std::string topic;
        for (const auto& id : chain.record_ids) {
          auto it = c.records_.find(id);
          if (it == c.records_.end()) {
            throw ValidationError("chain '" + chain.chain_id +
                                  "' references unknown record '" + id + "'");
          }
          if (topic.empty()) {
            topic = it->second.topic_id;
          } else if (topic != it->second.topic_id) {
            throw ValidationError("chain '" + chain.chain_id +
                                  "' spans topics '" + topic + "' and '" +
                                  it->second.topic_id + "'");
          }
          if (!c.chain_of_.emplace(id, chain.chain_id).second) {
            throw ValidationError("record '" + id + "' belongs to chains '" +
                                  c.chain_of_.at(id) + "' and '" +
                                  chain.chain_id + "'");
          }
        }
        std::stable_sort(chain.record_ids.begin(), chain.record_ids.end(),
                         [&](const auto& a, const auto& b) {
                           return c.records_.at(a).timestamp <
                                  c.records_.at(b).timestamp;
                         });
      }
      std::sort(gold_chains->begin(), gold_chains->end(),
                [&](const Chain& a, const Chain& b) {
                  const auto ta = c.records_.at(a.record_ids.front()).timestamp;
                  const auto tb = c.records_.at(b.record_ids.front()).timestamp;
                  if (ta != tb) return ta < tb;
                  return a.chain_id < b.chain_id;
                });
      c.gold_ = std::move(*gold_chains);
    }
    return c;
  }

  const std::map<std::string, Record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool contains(const std::string& id) const { return records_.count(id) > 0; }

  const Record& record(const std::string& id) const {
    auto it = records_.find(id);
    if (it == records_.end()) throw ValidationError("unknown record '" + id + "'");
    return it->second;
  }

  bool has_gold() const { return has_gold_; }

  /// Gold chains as given (explicit chains only, singletons may be present).
  const std::vector<Chain>& gold_chains() const { return gold_; }

  /// Gold chains plus one implicit singleton per uncovered record, ordered by
  /// first-member timestamp then chain id.
  std::vector<Chain> all_chains() const {
    std::vector<Chain> out = gold_;
    for (const auto& [id, r] : records_) {
      if (!chain_of_.count(id)) out.push_back({singleton_chain_id(id), {id}});
    }
    std::sort(out.begin(), out.end(), [&](const Chain& a, const Chain& b) {
      const auto ta = records_.at(a.record_ids.front()).timestamp;
      const auto tb = records_.at(b.record_ids.front()).timestamp;
      if (ta != tb) return ta < tb;
      return a.chain_id < b.chain_id;
    });
    return out;
  }

  /// topic id -> record ids in canonical time order.
  const std::map<std::string, std::vector<std::string>>& topics() const {
    return topics_;
  }

  std::vector<std::string> topic_ids() const {
    std::vector<std::string> ids;
    for (const auto& [t, _] : topics_) ids.push_back(t);
    return ids;
  }

  const std::vector<std::string>& topic_records(const std::string& topic) const {
    static const std::vector<std::string> kEmpty;
    auto it = topics_.find(topic);
    return it == topics_.end() ? kEmpty : it->second;
  }

  std::string topic_of_chain(const Chain& chain) const {
    return record(chain.record_ids.front()).topic_id;
  }

  /// Sub-corpus holding exactly the records of the named chains (implicit
  /// singleton ids included). Gold chains are carried over.
  Corpus subset(const std::vector<std::string>& chain_ids) const {
    std::map<std::string, const Chain*> by_id;
    const auto chains = all_chains();
    for (const auto& ch : chains) by_id[ch.chain_id] = &ch;
    std::vector<Record> recs;
    std::vector<Chain> gold;
    for (const auto& cid : chain_ids) {
      auto it = by_id.find(cid);
      if (it == by_id.end()) throw ValidationError("unknown chain '" + cid + "'");
      for (const auto& rid : it->second->record_ids) recs.push_back(records_.at(rid));
      if (it->second->chain_id.rfind("singleton:", 0) != 0) gold.push_back(*it->second);
    }
    return build(std::move(recs), has_gold_ ? std::optional(std::move(gold))
                                            : std::nullopt);
  }

  bool operator==(const Corpus& o) const {
    return records_ == o.records_ && gold_ == o.gold_ && has_gold_ == o.has_gold_;
  }

 private:
  std::map<std::string, Record> records_;
  std::map<std::string, std::vector<std::string>> topics_;
  std::vector<Chain> gold_;
  std::unordered_map<std::string, std::string> chain_of_;
  bool has_gold_ = false;
};

// --- file formats --------------------------------------------------------------

inline Record record_from_json(const nlohmann::json& j) {
  Record r;
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ValidationError(std::string("missing or non-string key '") + key + "'");
    }
    return j[key].get<std::string>();
  };
  r.record_id = str("record_id");
  r.topic_id = str("topic_id");
  r.document_id = str("document_id");
  r.text = str("text");
  if (!j.contains("timestamp")) throw ValidationError("missing key 'timestamp'");
  const auto& ts = j["timestamp"];
  if (ts.is_number_integer()) {
    r.timestamp = ts.get<std::int64_t>();
  } else if (ts.is_string()) {
    r.timestamp = parse_rfc3339(ts.get<std::string>());
  } else {
    throw ValidationError("timestamp must be an RFC 3339 string or integer");
  }
  if (j.contains("fl_code") && !j["fl_code"].is_null()) {
    if (!j["fl_code"].is_string()) throw ValidationError("fl_code must be a string or null");
    r.fl_code = j["fl_code"].get<std::string>();
  }
  if (j.contains("attributes")) {
    if (!j["attributes"].is_object()) throw ValidationError("attributes must be an object");
    for (const auto& [k, v] : j["attributes"].items()) {
      if (!v.is_string()) throw ValidationError("attribute '" + k + "' must be a string");
      r.attributes[k] = v.get<std::string>();
    }
  }
  return r;
}

inline nlohmann::ordered_json record_to_json(const Record& r) {
  nlohmann::ordered_json j;
  j["record_id"] = r.record_id;
  j["topic_id"] = r.topic_id;
  j["document_id"] = r.document_id;
  j["timestamp"] = r.timestamp;
  j["text"] = r.text;
  j["fl_code"] = r.fl_code ? nlohmann::ordered_json(*r.fl_code) : nullptr;
  if (!r.attributes.empty()) {
    nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.attributes) attrs[k] = v;
    j["attributes"] = std::move(attrs);
  }
  return j;
}

inline Chain chain_from_json(const nlohmann::json& j) {
  if (!j.contains("chain_id") || !j["chain_id"].is_string()) {
    throw ValidationError("missing or non-string key 'chain_id'");
  }
  if (!j.contains("record_ids") || !j["record_ids"].is_array()) {
    throw ValidationError("missing array 'record_ids'");
  }
  Chain c;
  c.chain_id = j["chain_id"].get<std::string>();
  for (const auto& id : j["record_ids"]) {
    if (!id.is_string()) throw ValidationError("record_ids must hold strings");
    c.record_ids.push_back(id.get<std::string>());
  }
  return c;
}

inline nlohmann::ordered_json chain_to_json(const Chain& c) {
  nlohmann::ordered_json j;
  j["chain_id"] = c.chain_id;
  j["record_ids"] = c.record_ids;
  return j;
}

// Applies `fn` to each non-blank JSONL line, prefixing errors with the line
// number.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn&& fn) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ", line " + std::to_string(lineno) +
                            ": malformed JSON: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ", line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline std::vector<Record> load_records(const std::string& path) {
  std::vector<Record> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(record_from_json(j)); });
  return out;
}

inline std::vector<Chain> load_chains(const std::string& path) {
  std::vector<Chain> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(chain_from_json(j)); });
  return out;
}

inline Corpus load_corpus(const std::string& records_path,
                          const std::optional<std::string>& chains_path = std::nullopt) {
  auto records = load_records(records_path);
  std::optional<std::vector<Chain>> chains;
  if (chains_path) chains = load_chains(*chains_path);
  return Corpus::build(std::move(records), std::move(chains));
}

inline std::string records_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& [topic, ids] : corpus.topics()) {
    for (const auto& id : ids) {
      out += record_to_json(corpus.record(id)).dump();
      out += '\n';
    }
  }
  return out;
}

inline std::string chains_to_jsonl(const std::vector<Chain>& chains) {
  std::string out;
  for (const auto& c : chains) {
    out += chain_to_json(c).dump();
    out += '\n';
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::string& records_path,
                        const std::optional<std::string>& chains_path = std::nullopt) {
  write_file(records_path, records_to_jsonl(corpus));
  if (chains_path) write_file(*chains_path, chains_to_jsonl(corpus.gold_chains()));
}

// --- time statistics ---------------------------------------------------------------

/// Quartiles (hours) of full-chain durations and of gaps between consecutive
/// chain members, over the non-singleton gold chains of one topic.
struct TimeStats {
  double full_chain_hours_q1 = 0, full_chain_hours_q2 = 0, full_chain_hours_q3 = 0;
  double between_records_hours_q1 = 0, between_records_hours_q2 = 0,
         between_records_hours_q3 = 0;
};

inline TimeStats compute_time_stats(const Corpus& corpus, const std::string& topic_id) {
  std::vector<double> durations;
  std::vector<double> gaps;
  for (const auto& chain : corpus.gold_chains()) {
    if (chain.record_ids.size() < 2) continue;
    if (corpus.topic_of_chain(chain) != topic_id) continue;
    const auto& ids = chain.record_ids;
    const double first = static_cast<double>(corpus.record(ids.front()).timestamp);
    const double last = static_cast<double>(corpus.record(ids.back()).timestamp);
    durations.push_back((last - first) / kSecondsPerHour);
    for (std::size_t i = 1; i < ids.size(); ++i) {
      gaps.push_back(static_cast<double>(corpus.record(ids[i]).timestamp -
                                         corpus.record(ids[i - 1]).timestamp) /
                     kSecondsPerHour);
    }
  }
  if (durations.empty()) {
    throw ValidationError("topic '" + topic_id + "': no chain statistics available");
  }
  TimeStats s;
  s.full_chain_hours_q1 = quantile_linear(durations, 0.25);
  s.full_chain_hours_q2 = quantile_linear(durations, 0.50);
  s.full_chain_hours_q3 = quantile_linear(durations, 0.75);
  s.between_records_hours_q1 = quantile_linear(gaps, 0.25);
  s.between_records_hours_q2 = quantile_linear(gaps, 0.50);
  s.between_records_hours_q3 = quantile_linear(gaps, 0.75);
  return s;
}

/// Window length for a topic: the larger of the topic's full-chain Q3 and
/// the mean of that quantity over all topics.
inline double window_size_for_topic(const TimeStats& topic_stats,
                                    std::span<const TimeStats> all_topic_stats) {
  if (all_topic_stats.empty()) throw ValidationError("no topic statistics");
  double sum = 0.0;
  for (const auto& s : all_topic_stats) sum += s.full_chain_hours_q3;
  const double mean = sum / static_cast<double>(all_topic_stats.size());
  return std::max(mean, topic_stats.full_chain_hours_q3);
}

// --- subtopic windows ----------------------------------------------------------------

/// A half-open time window [start, end) over one topic's records.
struct SubtopicWindow {
  std::string topic_id;
  std::size_t index = 0;  // position within the topic
  double start = 0;       // epoch seconds
  double end = 0;
  std::vector<std::string> record_ids;  // canonical time order

  std::string id() const { return topic_id + "#" + std::to_string(index); }
};

/// Overlapping sliding windows. The first window starts at the topic's first
/// record; each next one advances by stride_fraction * window_hours; the
/// sequence stops with the first window reaching past the last record.
/// Windows without records are dropped.
inline std::vector<SubtopicWindow> build_windows(const Corpus& corpus,
                                                 const std::string& topic_id,
                                                 double window_hours,
                                                 double stride_fraction) {
  if (!(window_hours > 0)) throw ConfigError("window_hours must be positive");
  if (!(stride_fraction > 0 && stride_fraction <= 1)) {
    throw ConfigError("stride_fraction must lie in (0, 1]");
  }
  const auto& ids = corpus.topic_records(topic_id);
  if (ids.empty()) throw ValidationError("topic '" + topic_id + "' is empty");
  const double width = window_hours * kSecondsPerHour;
  const double stride = stride_fraction * width;
  const double first = static_cast<double>(corpus.record(ids.front()).timestamp);
  const double last = static_cast<double>(corpus.record(ids.back()).timestamp);

  std::vector<SubtopicWindow> out;
  std::size_t lo = 0;  // first record not before the current window start
  for (std::size_t k = 0;; ++k) {
    const double start = first + static_cast<double>(k) * stride;
    const double end = start + width;
    while (lo < ids.size() &&
           static_cast<double>(corpus.record(ids[lo]).timestamp) < start) {
      ++lo;
    }
    SubtopicWindow w{topic_id, out.size(), start, end, {}};
    for (std::size_t i = lo; i < ids.size(); ++i) {
      if (static_cast<double>(corpus.record(ids[i]).timestamp) >= end) break;
      w.record_ids.push_back(ids[i]);
    }
    if (!w.record_ids.empty()) out.push_back(std::move(w));
    if (end > last) break;
  }
  return out;
}

// --- chronological split ----------------------------------------------------------------

struct SplitPolicy {
  std::size_t test_quota = 200;
};

struct DataSplit {
  std::vector<std::string> train, dev, test;
};

/// Per topic, chains (implicit singletons included) are ordered by start
/// time; the most recent go to test, the next to dev, the oldest to train.
inline DataSplit chronological_split(const Corpus& corpus, const SplitPolicy& policy = {}) {
  if (!corpus.has_gold()) throw ValidationError("chronological split needs gold chains");
  std::map<std::string, std::vector<Chain>> by_topic;
  for (auto& c : corpus.all_chains()) by_topic[corpus.topic_of_chain(c)].push_back(std::move(c));
  if (by_topic.empty()) throw ValidationError("no gold chains");
  DataSplit split;
  for (const auto& [topic, chains] : by_topic) {
    const std::size_t n = chains.size();
    std::size_t n_train = 0, n_dev = 0, n_test = 0;
    if (n <= policy.test_quota) {
      n_test = n;
    } else if (n < 3 * policy.test_quota) {
      n_test = n / 3;
      n_dev = n / 3;
      n_train = n - n_test - n_dev;
    } else {
      n_test = n / 10;
      n_dev = n / 10;
      n_train = n - n_test - n_dev;
    }
    // all_chains() is already in start-time order.
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? split.train : (i < n_train + n_dev ? split.dev : split.test);
      dst.push_back(chains[i].chain_id);
    }
  }
  return split;
}

inline std::string split_to_json(const DataSplit& s) {
  nlohmann::ordered_json j;
  j["train"] = s.train;
  j["dev"] = s.dev;
  j["test"] = s.test;
  return j.dump(2) + "\n";
}

inline DataSplit split_from_json(const std::string& text) {
  DataSplit s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.train = j.at("train").get<std::vector<std::string>>();
    s.dev = j.at("dev").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed split manifest: ") + e.what());
  }
  return s;
}

}  // namespace shiftlink
