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
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "shiftlink/corpus.hpp"
#include "shiftlink/error.hpp"
#include "shiftlink/metrics.hpp"
#include "shiftlink/pairgen.hpp"

namespace shiftlink {

/// Directional pair scores keyed by (earlier, later) record id.
using PairScores = std::map<std::pair<std::string, std::string>, double>;

enum class ClusterAlgorithm { kTdfs, kHcSingle };

inline const char* to_string(ClusterAlgorithm a) {
  return a == ClusterAlgorithm::kTdfs ? "tdfs" : "hc_single";
}

inline ClusterAlgorithm cluster_algorithm_from_string(std::string_view s) {
  if (s == "tdfs") return ClusterAlgorithm::kTdfs;
  if (s == "hc_single") return ClusterAlgorithm::kHcSingle;
  throw ConfigError("unknown clustering algorithm '" + std::string(s) + "'");
}

struct ClusterParams {
  double score_threshold = 0.5;
  double max_gap_hours = std::numeric_limits<double>::infinity();
  ClusterAlgorithm algorithm = ClusterAlgorithm::kTdfs;
};

namespace detail {

struct IndexedScores {
  // successors[i] = (j, score) with j later than i in canonical order
  std::vector<std::vector<std::pair<std::size_t, double>>> successors;
};

inline IndexedScores index_scores(const PairScores& scores,
                                  const std::vector<std::string>& ordered_ids) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < ordered_ids.size(); ++i) pos[ordered_ids[i]] = i;
  IndexedScores out;
  out.successors.resize(ordered_ids.size());
  for (const auto& [key, s] : scores) {
    auto ia = pos.find(key.first), ib = pos.find(key.second);
    if (ia == pos.end() || ib == pos.end()) {
      throw ValidationError("score for (" + key.first + ", " + key.second +
                            ") refers to a record outside the window");
    }
    if (ia->second >= ib->second) {
      throw ValidationError("score map holds reverse pair (" + key.first + ", " +
                            key.second + ")");
    }
    out.successors[ia->second].emplace_back(ib->second, s);
  }
  return out;
}

inline Chain make_chain(std::vector<std::size_t> members,
                        const std::vector<std::string>& ordered_ids) {
  std::sort(members.begin(), members.end());
  Chain c;
  c.chain_id = "chain:" + ordered_ids[members.front()];
  for (auto m : members) c.record_ids.push_back(ordered_ids[m]);
  return c;
}

}  // namespace detail

/// Time-dependent depth-first clustering. Seeds are taken in time order; a
/// chain grows depth-first from every resolved member towards later,
/// unassigned records scoring at least the threshold and lying within the
/// gap limit. Candidates are visited by descending score, then time.
inline std::vector<Chain> tdfs_cluster(const PairScores& scores, const Corpus& corpus,
                                       const std::vector<std::string>& ordered_ids,
                                       const ClusterParams& params) {
  const auto idx = detail::index_scores(scores, ordered_ids);
  const double max_gap = params.max_gap_hours * kSecondsPerHour;
  std::vector<double> ts(ordered_ids.size());
  for (std::size_t i = 0; i < ordered_ids.size(); ++i)
    ts[i] = static_cast<double>(corpus.record(ordered_ids[i]).timestamp);

  std::vector<bool> assigned(ordered_ids.size(), false);
  std::vector<Chain> chains;
  for (std::size_t seed = 0; seed < ordered_ids.size(); ++seed) {
    if (assigned[seed]) continue;
    std::vector<std::size_t> members{seed};
    assigned[seed] = true;
    std::function<void(std::size_t)> expand = [&](std::size_t f) {
      std::vector<std::pair<std::size_t, double>> cand;
      for (const auto& [c, s] : idx.successors[f]) {
        if (s >= params.score_threshold && !assigned[c] && ts[c] - ts[f] <= max_gap) {
          cand.emplace_back(c, s);
        }
      }
      // Ordered positions already encode (timestamp, record_id).
      std::sort(cand.begin(), cand.end(), [](const auto& x, const auto& y) {
        if (x.second != y.second) return x.second > y.second;
        return x.first < y.first;
      });
      for (const auto& [c, _] : cand) {
        if (assigned[c]) continue;
        assigned[c] = true;
        members.push_back(c);
        expand(c);
      }
    };
    expand(seed);
    chains.push_back(detail::make_chain(std::move(members), ordered_ids));
  }
  return chains;
}

/// Connected components of the graph with an edge wherever score >= threshold.
inline std::vector<Chain> hc_single_cluster(const PairScores& scores, const Corpus& corpus,
                                            const std::vector<std::string>& ordered_ids,
                                            const ClusterParams& params) {
  (void)corpus;
  const auto idx = detail::index_scores(scores, ordered_ids);
  std::vector<std::size_t> parent(ordered_ids.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t a = 0; a < idx.successors.size(); ++a) {
    for (const auto& [b, s] : idx.successors[a]) {
      if (s < params.score_threshold) continue;
      const auto ra = find(a), rb = find(b);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  std::map<std::size_t, std::vector<std::size_t>> comps;
  for (std::size_t i = 0; i < ordered_ids.size(); ++i) comps[find(i)].push_back(i);
  std::vector<Chain> out;
  for (auto& [_, members] : comps) out.push_back(detail::make_chain(std::move(members), ordered_ids));
  return out;
}

inline std::vector<Chain> cluster(const PairScores& scores, const Corpus& corpus,
                                  const std::vector<std::string>& ordered_ids,
                                  const ClusterParams& params) {
  if (!(params.score_threshold > 0 && params.score_threshold < 1)) {
    throw ConfigError("score threshold must lie in (0, 1)");
  }
  if (!(params.max_gap_hours > 0)) throw ConfigError("max_gap_hours must be positive");
  return params.algorithm == ClusterAlgorithm::kTdfs
             ? tdfs_cluster(scores, corpus, ordered_ids, params)
             : hc_single_cluster(scores, corpus, ordered_ids, params);
}

/// Unions chains sharing a record until fixpoint. Output chains are
/// disjoint, time-ordered and sorted by their first member.
inline std::vector<Chain> merge_chains(const std::vector<Chain>& chains, const Corpus& corpus) {
  std::map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find = [&](const std::string& x) {
    std::string r = x;
    while (parent.at(r) != r) r = parent.at(r);
    for (std::string y = x; parent.at(y) != r;) {
      std::string next = parent.at(y);
      parent[y] = r;
      y = next;
    }
    return r;
  };
  auto earlier = [&](const std::string& a, const std::string& b) {
    return time_before(corpus.record(a), corpus.record(b));
  };
  for (const auto& c : chains)
    for (const auto& id : c.record_ids) parent.emplace(id, id);
  for (const auto& c : chains) {
    for (std::size_t i = 1; i < c.record_ids.size(); ++i) {
      auto ra = find(c.record_ids[0]), rb = find(c.record_ids[i]);
      if (ra == rb) continue;
      // The root is always the earliest member, which keeps output canonical.
      if (earlier(rb, ra)) std::swap(ra, rb);
      parent[rb] = ra;
    }
  }
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& [id, _] : parent) groups[find(id)].push_back(id);
  std::vector<Chain> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end(), earlier);
    out.push_back({"chain:" + members.front(), std::move(members)});
  }
  std::sort(out.begin(), out.end(), [&](const Chain& a, const Chain& b) {
    return earlier(a.record_ids.front(), b.record_ids.front());
  });
  return out;
}

// --- clustering threshold tuning --------------------------------------------------

/// Relative offsets applied to the preliminary threshold: -90%..-30% and
/// +30%..+100% in steps of 10 points. -100% would give a zero threshold.
inline std::vector<double> threshold_offsets() {
  std::vector<double> d;
  for (int k = -9; k <= -3; ++k) d.push_back(k / 10.0);
  for (int k = 3; k <= 10; ++k) d.push_back(k / 10.0);
  return d;
}

/// tau0 followed by tau0 * (1 + delta) for every offset, before clipping.
inline std::vector<double> threshold_grid(double tau0) {
  std::vector<double> g{tau0};
  for (double d : threshold_offsets()) g.push_back(tau0 * (1.0 + d));
  return g;
}

/// Grid values strictly inside (0, 1), ascending and de-duplicated.
inline std::vector<double> threshold_candidates(double tau0) {
  std::vector<double> out;
  for (double t : threshold_grid(tau0))
    if (t > 0.0 && t < 1.0) out.push_back(t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-12; }),
            out.end());
  return out;
}

/// Scores of one development window together with its clipped gold chains.
struct ScoredWindow {
  SubtopicWindow window;
  PairScores scores;
  std::vector<Chain> gold;
};

struct TuneResult {
  double threshold = 0;
  double v_measure = 0;
  std::vector<std::pair<double, double>> sweep;  // (tau, mean v-measure)
};

/// Picks the candidate threshold with the highest mean v-measure over the
/// windows that have gold links; ties go to the smaller threshold.
inline TuneResult tune_threshold(const std::vector<ScoredWindow>& dev, const Corpus& corpus,
                                 double tau0, ClusterParams params) {
  TuneResult best;
  best.v_measure = -1;
  bool any_defined = false;
  for (double tau : threshold_candidates(tau0)) {
    params.score_threshold = tau;
    double sum = 0;
    std::size_t n = 0;
    for (const auto& w : dev) {
      const auto pp = strip_singletons(w.gold, cluster(w.scores, corpus, w.window.record_ids, params));
      if (!pp.defined) continue;
      sum += v_measure(pp).v;
      ++n;
    }
    if (n == 0) continue;
    any_defined = true;
    const double mean = sum / static_cast<double>(n);
    best.sweep.emplace_back(tau, mean);
    if (mean > best.v_measure) {
      best.v_measure = mean;
      best.threshold = tau;
    }
  }
  if (!any_defined) throw ValidationError("threshold tuning: no development window has gold links");
  return best;
}

}  // namespace shiftlink
