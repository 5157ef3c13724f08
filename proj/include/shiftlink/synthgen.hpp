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

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "shiftlink/clustering.hpp"
#include "shiftlink/corpus.hpp"
#include "shiftlink/error.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

/// Parameters of the synthetic shift-log generator. Defaults follow the
/// aggregate statistics of real multi-plant shift books: 89% singletons,
/// 2.72 records per multi-record chain, between-record gap quartiles of
/// 2.0 / 21.0 / 111.7 hours.
struct SynthSpec {
  int n_topics = 1;
  int chains_per_topic = 1000;
  double singleton_fraction = 0.89;
  double mean_chain_size = 2.72;  // of multi-record chains
  int max_chain_size = 20;
  double gap_q1_hours = 2.0;
  double gap_q2_hours = 21.0;
  double gap_q3_hours = 111.7;
  double chains_per_day = 10.0;
  int vocabulary_size = 2000;
  int story_tokens = 5;
  int fl_depth = 4;
  double fl_missing_rate = 0.02;
  double signal_strength = 0.9;
  std::uint64_t seed = 42;
  std::int64_t start_epoch = 1672531200;  // 2023-01-01T00:00:00Z

  void validate() const {
    auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (n_topics < 1 || chains_per_topic < 1) throw ConfigError("need at least one topic and chain");
    if (!fraction(singleton_fraction) || !fraction(signal_strength) || !fraction(fl_missing_rate)) {
      throw ConfigError("fractions must lie in [0, 1]");
    }
    if (singleton_fraction >= 1.0) {
      throw ConfigError("singleton_fraction 1 leaves no multi-record chains to generate");
    }
    if (max_chain_size < 2 || !(mean_chain_size >= 2.0) || mean_chain_size > max_chain_size) {
      throw ConfigError("mean_chain_size must lie in [2, max_chain_size]");
    }
    if (!(gap_q1_hours > 0 && gap_q1_hours < gap_q2_hours && gap_q2_hours < gap_q3_hours)) {
      throw ConfigError("gap quartiles must be positive and increasing");
    }
    if (!(chains_per_day > 0)) throw ConfigError("chains_per_day must be positive");
    if (story_tokens < 1 || vocabulary_size < 4 * story_tokens) {
      throw ConfigError("vocabulary too small for the story length");
    }
    if (fl_depth < 2) throw ConfigError("fl_depth must be at least 2");
  }
};

inline nlohmann::ordered_json to_json(const SynthSpec& s) {
  return {{"n_topics", s.n_topics},
          {"chains_per_topic", s.chains_per_topic},
          {"singleton_fraction", s.singleton_fraction},
          {"mean_chain_size", s.mean_chain_size},
          {"max_chain_size", s.max_chain_size},
          {"gap_q1_hours", s.gap_q1_hours},
          {"gap_q2_hours", s.gap_q2_hours},
          {"gap_q3_hours", s.gap_q3_hours},
          {"chains_per_day", s.chains_per_day},
          {"vocabulary_size", s.vocabulary_size},
          {"story_tokens", s.story_tokens},
          {"fl_depth", s.fl_depth},
          {"fl_missing_rate", s.fl_missing_rate},
          {"signal_strength", s.signal_strength},
          {"seed", s.seed},
          {"start_epoch", s.start_epoch}};
}

inline SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.n_topics = j.value("n_topics", s.n_topics);
    s.chains_per_topic = j.value("chains_per_topic", s.chains_per_topic);
    s.singleton_fraction = j.value("singleton_fraction", s.singleton_fraction);
    s.mean_chain_size = j.value("mean_chain_size", s.mean_chain_size);
    s.max_chain_size = j.value("max_chain_size", s.max_chain_size);
    s.gap_q1_hours = j.value("gap_q1_hours", s.gap_q1_hours);
    s.gap_q2_hours = j.value("gap_q2_hours", s.gap_q2_hours);
    s.gap_q3_hours = j.value("gap_q3_hours", s.gap_q3_hours);
    s.chains_per_day = j.value("chains_per_day", s.chains_per_day);
    s.vocabulary_size = j.value("vocabulary_size", s.vocabulary_size);
    s.story_tokens = j.value("story_tokens", s.story_tokens);
    s.fl_depth = j.value("fl_depth", s.fl_depth);
    s.fl_missing_rate = j.value("fl_missing_rate", s.fl_missing_rate);
    s.signal_strength = j.value("signal_strength", s.signal_strength);
    s.seed = j.value("seed", s.seed);
    s.start_epoch = j.value("start_epoch", s.start_epoch);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace synth_detail {

constexpr double kZ75 = 0.6744897501960817;  // standard normal upper quartile

// Success probability of a geometric tail (size = 2 + failures, truncated
// at max_size) whose mean equals `mean`.
inline double solve_size_parameter(double mean, int max_size) {
  auto truncated_mean = [&](double p) {
    double num = 0, den = 0, w = 1;
    for (int k = 2; k <= max_size; ++k, w *= (1 - p)) {
      num += k * w;
      den += w;
    }
    return num / den;
  };
  double lo = 1e-9, hi = 1.0;  // mean decreases in p
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (truncated_mean(mid) > mean ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline constexpr std::array<const char*, 30> kSyllables = {
    "ka", "lo", "ven", "tur", "mi", "sa", "pe", "ro", "dri", "hal", "ber", "gen", "tak", "ul", "fo",
    "nis", "wel", "zu", "bra", "kor", "ste", "lin", "mar", "pol", "ze", "dus", "qua", "rix", "tem", "vor"};
inline constexpr std::array<const char*, 12> kEquipment = {
    "pumpe", "ventil", "motor", "lager", "dichtung", "filter",
    "kessel", "leitung", "sensor", "antrieb", "kupplung", "getriebe"};
inline constexpr std::array<const char*, 10> kActions = {
    "geprueft", "gewechselt", "undicht", "ausgefallen", "gereinigt",
    "nachgestellt", "gemeldet", "repariert", "blockiert", "ueberhitzt"};
inline constexpr std::array<const char*, 5> kUnits = {"bar", "grad", "prozent", "mm", "kw"};
inline constexpr std::array<const char*, 8> kEquipmentTypes = {"PU", "VE", "MO", "WT", "KO", "RE", "FI", "TA"};

inline std::vector<std::string> topic_vocabulary(int size, Random& rng) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < size) {
    const int n = 2 + static_cast<int>(rng.below(2));
    std::string w;
    for (int i = 0; i < n; ++i) w += kSyllables[rng.below(kSyllables.size())];
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

inline std::string fl_segment(int level, Random& rng) {
  char buf[16];
  switch (level) {
    case 1:
      std::snprintf(buf, sizeof buf, "U%02d", static_cast<int>(rng.below(20)));
      return buf;
    case 2:
      return kEquipmentTypes[rng.below(kEquipmentTypes.size())];
    case 3:
      std::snprintf(buf, sizeof buf, "%03d", 1 + static_cast<int>(rng.below(60)));
      return buf;
    default:
      std::snprintf(buf, sizeof buf, "M%d", static_cast<int>(rng.below(10)));
      return buf;
  }
}

inline std::string join_fl(const std::vector<std::string>& segs) {
  std::string s;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i) s += '-';
    s += segs[i];
  }
  return s;
}

}  // namespace synth_detail

/// Deterministic corpus with gold chains. Chain-mates share an FL code
/// (a sibling code otherwise) and story tokens, each kept with probability
/// signal_strength; singletons draw from the same topic vocabulary.
inline Corpus generate(const SynthSpec& spec) {
  spec.validate();
  using namespace synth_detail;
  const double size_p = solve_size_parameter(spec.mean_chain_size, spec.max_chain_size);
  const double sigma_lo = std::log(spec.gap_q2_hours / spec.gap_q1_hours) / kZ75;
  const double sigma_hi = std::log(spec.gap_q3_hours / spec.gap_q2_hours) / kZ75;
  const double span_seconds = spec.chains_per_topic / spec.chains_per_day * 86400.0;

  std::vector<Record> records;
  std::vector<Chain> chains;
  for (int t = 0; t < spec.n_topics; ++t) {
    char topic_buf[16];
    std::snprintf(topic_buf, sizeof topic_buf, "T%02d", t);
    const std::string topic = topic_buf;
    Random rng(derive_seed(spec.seed, "topic-" + topic));
    const auto vocab = topic_vocabulary(spec.vocabulary_size, rng);
    const std::string plant = "K" + std::string(1, static_cast<char>('A' + t % 26)) + std::to_string(t % 10);

    auto random_fl = [&]() {
      std::vector<std::string> segs{plant};
      for (int l = 1; l < spec.fl_depth; ++l) segs.push_back(fl_segment(l, rng));
      return segs;
    };
    auto record_text = [&](const std::vector<std::string>& story) {
      std::string text = kEquipment[rng.below(kEquipment.size())];
      for (const auto& tok : story) {
        text += ' ';
        text += rng.bernoulli(spec.signal_strength) ? tok : vocab[rng.below(vocab.size())];
      }
      text += ' ';
      text += kActions[rng.below(kActions.size())];
      text += ' ' + std::to_string(rng.below(200)) + ' ' + kUnits[rng.below(kUnits.size())];
      return text;
    };

    std::size_t record_counter = 0;
    for (int c = 0; c < spec.chains_per_topic; ++c) {
      int size = 1;
      if (!rng.bernoulli(spec.singleton_fraction)) {
        size = 2;
        while (size < spec.max_chain_size && !rng.bernoulli(size_p)) ++size;
      }
      std::vector<std::string> story;
      for (int k = 0; k < spec.story_tokens; ++k) story.push_back(vocab[rng.below(vocab.size())]);
      const auto fl = random_fl();
      double ts = rng.uniform() * span_seconds;
      char chain_buf[32];
      std::snprintf(chain_buf, sizeof chain_buf, "%s-c%05d", topic.c_str(), c);
      Chain chain{chain_buf, {}};
      for (int m = 0; m < size; ++m) {
        if (m > 0) {
          const double z = rng.normal();
          const double gap_h = spec.gap_q2_hours * std::exp(z * (z < 0 ? sigma_lo : sigma_hi));
          ts += gap_h * kSecondsPerHour;
        }
        Record r;
        char rid[32];
        std::snprintf(rid, sizeof rid, "%s-r%06zu", topic.c_str(), record_counter++);
        r.record_id = rid;
        r.topic_id = topic;
        r.timestamp = spec.start_epoch + static_cast<std::int64_t>(std::llround(ts));
        r.document_id = topic + "-shift-" + std::to_string((r.timestamp - spec.start_epoch) / (8 * 3600));
        r.text = record_text(story);
        if (!rng.bernoulli(spec.fl_missing_rate)) {
          auto segs = fl;
          if (size > 1 && !rng.bernoulli(spec.signal_strength)) {
            // Sibling code: same parent, different leaf.
            const auto leaf = segs.back();
            while (segs.back() == leaf) segs.back() = fl_segment(spec.fl_depth - 1, rng);
          }
          r.fl_code = join_fl(segs);
        }
        chain.record_ids.push_back(r.record_id);
        records.push_back(std::move(r));
      }
      if (size > 1) chains.push_back(std::move(chain));
    }
  }
  return Corpus::build(std::move(records), std::move(chains));
}

/// 1.0 for gold-adjacent forward pairs and 0.0 for every other inference
/// candidate of the window.
inline PairScores oracle_scores(const Corpus& corpus, const SubtopicWindow& window,
                                double max_gap_hours = std::numeric_limits<double>::infinity()) {
  std::set<std::pair<std::string, std::string>> adjacent;
  for (const auto& c : corpus.gold_chains())
    for (std::size_t i = 1; i < c.record_ids.size(); ++i)
      adjacent.emplace(c.record_ids[i - 1], c.record_ids[i]);
  PairScores out;
  for (const auto& pr : candidate_pairs_for_inference(corpus, window, max_gap_hours)) {
    out[pr] = adjacent.count(pr) ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace shiftlink
