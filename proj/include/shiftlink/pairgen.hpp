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
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shiftlink/corpus.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

enum class NegativeKind { kNone, kCrossChain, kReverseOrder, kNonAdjacent };

inline const char* to_string(NegativeKind k) {
  switch (k) {
    case NegativeKind::kCrossChain: return "cross_chain";
    case NegativeKind::kReverseOrder: return "reverse_order";
    case NegativeKind::kNonAdjacent: return "non_adjacent";
    case NegativeKind::kNone: break;
  }
  return "none";
}

/// Ordered pair (a, b). Positives are chain-adjacent with a before b.
struct LabeledPair {
  std::string a;
  std::string b;
  bool positive = false;
  NegativeKind kind = NegativeKind::kNone;

  bool operator==(const LabeledPair&) const = default;
};

struct SamplingConfig {
  std::size_t train_neg_ratio = 20;
  std::size_t dev_neg_ratio = 1;
  std::uint64_t seed = 0;
};

enum class SampleSplit { kTrain, kDev };

/// Gold chains restricted to the window's records; chains left empty are
/// dropped.
inline std::vector<Chain> clip_chains(const std::vector<Chain>& gold,
                                      const SubtopicWindow& window) {
  std::unordered_map<std::string, bool> inside;
  for (const auto& id : window.record_ids) inside[id] = true;
  std::vector<Chain> out;
  for (const auto& c : gold) {
    Chain clipped{c.chain_id, {}};
    for (const auto& id : c.record_ids)
      if (inside.count(id)) clipped.record_ids.push_back(id);
    if (!clipped.record_ids.empty()) out.push_back(std::move(clipped));
  }
  return out;
}

/// Every ordered pair of distinct window records, labeled. Positions within
/// a chain follow the stored gold order.
inline std::vector<LabeledPair> enumerate_labeled_pairs(const SubtopicWindow& window,
                                                        const std::vector<Chain>& gold) {
  struct Slot {
    std::size_t chain;
    std::size_t pos;
  };
  std::unordered_map<std::string, Slot> where;
  const auto clipped = clip_chains(gold, window);
  for (std::size_t c = 0; c < clipped.size(); ++c)
    for (std::size_t p = 0; p < clipped[c].record_ids.size(); ++p)
      where[clipped[c].record_ids[p]] = {c, p};

  const auto& ids = window.record_ids;
  std::vector<LabeledPair> out;
  out.reserve(ids.size() * (ids.size() > 0 ? ids.size() - 1 : 0));
  for (const auto& a : ids) {
    const auto wa = where.find(a);
    for (const auto& b : ids) {
      if (a == b) continue;
      const auto wb = where.find(b);
      LabeledPair lp{a, b, false, NegativeKind::kCrossChain};
      if (wa != where.end() && wb != where.end() && wa->second.chain == wb->second.chain) {
        const auto pa = wa->second.pos, pb = wb->second.pos;
        if (pb == pa + 1) {
          lp.positive = true;
          lp.kind = NegativeKind::kNone;
        } else {
          lp.kind = pb > pa ? NegativeKind::kNonAdjacent : NegativeKind::kReverseOrder;
        }
      }
      out.push_back(std::move(lp));
    }
  }
  return out;
}

/// Keeps all positives and a uniform sample (without replacement) of
/// ratio * positives negatives, preserving input order. `salt` decorrelates
/// windows that share one configured seed.
inline std::vector<LabeledPair> sample_pairs(const std::vector<LabeledPair>& pairs,
                                             const SamplingConfig& config, SampleSplit split,
                                             std::string_view salt = {}) {
  std::vector<std::size_t> neg;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].positive) {
      ++n_pos;
    } else {
      neg.push_back(i);
    }
  }
  const std::size_t ratio = split == SampleSplit::kTrain ? config.train_neg_ratio
                                                         : config.dev_neg_ratio;
  const std::size_t want = std::min(neg.size(), ratio * n_pos);
  std::vector<bool> keep(pairs.size(), false);
  Random rng(derive_seed(config.seed, salt));
  // Partial Fisher-Yates: the first `want` slots become the sample.
  for (std::size_t i = 0; i < want; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(neg.size() - i));
    std::swap(neg[i], neg[j]);
    keep[neg[i]] = true;
  }
  std::vector<LabeledPair> out;
  out.reserve(n_pos + want);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].positive || keep[i]) out.push_back(pairs[i]);
  return out;
}

/// Forward pairs (a earlier than b in canonical order) at most max_gap_hours
/// apart.
inline std::vector<std::pair<std::string, std::string>> candidate_pairs_for_inference(
    const Corpus& corpus, const SubtopicWindow& window, double max_gap_hours) {
  if (!(max_gap_hours > 0)) throw ConfigError("max_gap_hours must be positive");
  const double max_gap = max_gap_hours * kSecondsPerHour;
  const auto& ids = window.record_ids;
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto ti = static_cast<double>(corpus.record(ids[i]).timestamp);
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const auto tj = static_cast<double>(corpus.record(ids[j]).timestamp);
      if (tj - ti > max_gap) break;
      out.emplace_back(ids[i], ids[j]);
    }
  }
  return out;
}

inline std::string pairs_to_jsonl(const std::vector<LabeledPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["a"] = p.a;
    j["b"] = p.b;
    j["label"] = p.positive ? "positive" : "negative";
    j["kind"] = p.positive ? nullptr : nlohmann::ordered_json(to_string(p.kind));
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace shiftlink
