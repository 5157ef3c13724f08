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
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "shiftlink/corpus.hpp"
#include "shiftlink/error.hpp"

namespace shiftlink {

// Coreference metrics over a gold and a system partition of the same
// mentions. All F1 values use the harmonic mean with 0/0 := 0.

struct Prf {
  double p = 0, r = 0, f1 = 0;
};

inline double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }
inline double safe_div(double a, double b) { return b != 0 ? a / b : 0.0; }

/// Gold and system partitions over a shared universe. `defined` is false when
/// the gold side has no non-singleton chains.
struct PartitionPair {
  std::vector<std::vector<std::string>> gold;
  std::vector<std::vector<std::string>> system;
  std::vector<std::string> universe;
  bool defined = true;
};

/// Drops gold singletons; the universe is what remains of gold. System
/// chains are restricted to the universe (emptied ones vanish) and uncovered
/// universe members are added as system singletons.
inline PartitionPair strip_singletons(const std::vector<Chain>& gold,
                                      const std::vector<Chain>& system) {
  PartitionPair out;
  std::set<std::string> universe;
  for (const auto& g : gold) {
    if (g.record_ids.size() < 2) continue;
    out.gold.push_back(g.record_ids);
    universe.insert(g.record_ids.begin(), g.record_ids.end());
  }
  out.universe.assign(universe.begin(), universe.end());
  out.defined = !out.gold.empty();
  std::set<std::string> covered;
  for (const auto& s : system) {
    std::vector<std::string> kept;
    for (const auto& id : s.record_ids)
      if (universe.count(id) && covered.insert(id).second) kept.push_back(id);
    if (!kept.empty()) out.system.push_back(std::move(kept));
  }
  for (const auto& id : out.universe)
    if (!covered.count(id)) out.system.push_back({id});
  return out;
}

namespace detail {

inline std::unordered_map<std::string, std::size_t> cluster_index(
    const std::vector<std::vector<std::string>>& clusters) {
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& id : clusters[c]) idx[id] = c;
  return idx;
}

// Sum over `keys` of (|k| - number of parts `other` splits k into); members
// absent from `other` each form their own part.
inline std::pair<double, double> muc_counts(const std::vector<std::vector<std::string>>& keys,
                                            const std::vector<std::vector<std::string>>& other) {
  const auto idx = cluster_index(other);
  double num = 0, den = 0;
  for (const auto& k : keys) {
    std::set<std::size_t> parts;
    std::size_t unaligned = 0;
    for (const auto& id : k) {
      auto it = idx.find(id);
      if (it == idx.end()) {
        ++unaligned;
      } else {
        parts.insert(it->second);
      }
    }
    num += static_cast<double>(k.size()) - static_cast<double>(parts.size() + unaligned);
    den += static_cast<double>(k.size()) - 1.0;
  }
  return {num, den};
}

}  // namespace detail

inline Prf muc(const PartitionPair& pp) {
  const auto [rn, rd] = detail::muc_counts(pp.gold, pp.system);
  const auto [pn, pd] = detail::muc_counts(pp.system, pp.gold);
  Prf m{safe_div(pn, pd), safe_div(rn, rd), 0};
  m.f1 = harmonic(m.p, m.r);
  return m;
}

inline Prf b_cubed(const PartitionPair& pp) {
  const auto gidx = detail::cluster_index(pp.gold);
  const auto sidx = detail::cluster_index(pp.system);
  double r = 0, p = 0;
  for (const auto& m : pp.universe) {
    const auto& g = pp.gold[gidx.at(m)];
    auto sit = sidx.find(m);
    if (sit == sidx.end()) {
      r += 1.0 / static_cast<double>(g.size());
      p += 1.0;
      continue;
    }
    const auto& s = pp.system[sit->second];
    const std::set<std::string> gs(g.begin(), g.end());
    double overlap = 0;
    for (const auto& id : s) overlap += gs.count(id);
    r += overlap / static_cast<double>(g.size());
    p += overlap / static_cast<double>(s.size());
  }
  const double n = static_cast<double>(pp.universe.size());
  Prf out{safe_div(p, n), safe_div(r, n), 0};
  out.f1 = harmonic(out.p, out.r);
  return out;
}

/// Maximum-weight assignment between rows and columns of `w` (Hungarian
/// method, O(n^2 m)). Returns for each row the assigned column or -1.
inline std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& w) {
  const std::size_t n_rows = w.size();
  const std::size_t n_cols = n_rows ? w[0].size() : 0;
  if (n_rows == 0 || n_cols == 0) return std::vector<int>(n_rows, -1);
  const bool transposed = n_rows > n_cols;
  const std::size_t n = transposed ? n_cols : n_rows;  // n <= m
  const std::size_t m = transposed ? n_rows : n_cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    return -(transposed ? w[j - 1][i - 1] : w[i - 1][j - 1]);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assign(n_rows, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) {
      assign[j - 1] = static_cast<int>(p[j] - 1);
    } else {
      assign[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return assign;
}

/// phi4(g, s) = 2 |g n s| / (|g| + |s|).
inline std::vector<std::vector<double>> phi4_matrix(const PartitionPair& pp) {
  const auto sidx = detail::cluster_index(pp.system);
  std::vector<std::vector<double>> w(pp.gold.size(), std::vector<double>(pp.system.size(), 0.0));
  for (std::size_t g = 0; g < pp.gold.size(); ++g) {
    for (const auto& id : pp.gold[g]) {
      auto it = sidx.find(id);
      if (it != sidx.end()) w[g][it->second] += 1.0;
    }
    for (std::size_t s = 0; s < pp.system.size(); ++s) {
      w[g][s] = 2.0 * w[g][s] /
                static_cast<double>(pp.gold[g].size() + pp.system[s].size());
    }
  }
  return w;
}

inline Prf ceaf_e(const PartitionPair& pp) {
  const auto w = phi4_matrix(pp);
  const auto assign = max_weight_assignment(w);
  double total = 0;
  for (std::size_t g = 0; g < assign.size(); ++g)
    if (assign[g] >= 0) total += w[g][static_cast<std::size_t>(assign[g])];
  Prf out{safe_div(total, static_cast<double>(pp.system.size())),
          safe_div(total, static_cast<double>(pp.gold.size())), 0};
  out.f1 = harmonic(out.p, out.r);
  return out;
}

struct VMeasure {
  double homogeneity = 0, completeness = 0, v = 0;
};

/// Entropy-based clustering scores (natural log).
inline VMeasure v_measure(const PartitionPair& pp) {
  const auto gidx = detail::cluster_index(pp.gold);
  const auto sidx = detail::cluster_index(pp.system);
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  std::map<std::size_t, double> gsum;
  std::map<std::size_t, double> ssum;
  std::size_t next_singleton = pp.system.size();
  for (const auto& m : pp.universe) {
    const std::size_t g = gidx.at(m);
    auto it = sidx.find(m);
    const std::size_t s = it == sidx.end() ? next_singleton++ : it->second;
    joint[{g, s}] += 1;
    gsum[g] += 1;
    ssum[s] += 1;
  }
  const double n = static_cast<double>(pp.universe.size());
  VMeasure out;
  if (n == 0) return out;
  auto entropy = [&](const std::map<std::size_t, double>& marg) {
    double h = 0;
    for (const auto& [_, c] : marg) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hg = entropy(gsum), hs = entropy(ssum);
  double hg_s = 0, hs_g = 0;
  for (const auto& [key, c] : joint) {
    hg_s -= (c / n) * std::log(c / ssum.at(key.second));
    hs_g -= (c / n) * std::log(c / gsum.at(key.first));
  }
  out.homogeneity = hg == 0 ? 1.0 : 1.0 - hg_s / hg;
  out.completeness = hs == 0 ? 1.0 : 1.0 - hs_g / hs;
  const double sum = out.homogeneity + out.completeness;
  out.v = sum == 0 ? 0.0 : 2 * out.homogeneity * out.completeness / sum;
  return out;
}

/// Predicts positive when score >= threshold.
inline Prf binary_prf(std::span<const double> scores, std::span<const int> labels,
                      double threshold) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ValidationError("binary_prf needs equally sized, non-empty inputs");
  }
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i]) ++tp;
    if (pred && !labels[i]) ++fp;
    if (!pred && labels[i]) ++fn;
  }
  Prf out{safe_div(tp, tp + fp), safe_div(tp, tp + fn), 0};
  out.f1 = harmonic(out.p, out.r);
  return out;
}

// --- reports --------------------------------------------------------------------

/// Coreference scores in percent, clustering scores as ratios.
struct ScoreReport {
  double muc_p = 0, muc_r = 0, muc_f1 = 0;
  double b3_p = 0, b3_r = 0, b3_f1 = 0;
  double ceafe_p = 0, ceafe_r = 0, ceafe_f1 = 0;
  double conll_f1 = 0;
  double homogeneity = 0, completeness = 0, v_measure = 0;
};

/// Returns nullopt when the pair is undefined (no gold links).
inline std::optional<ScoreReport> score(const PartitionPair& pp) {
  if (!pp.defined) return std::nullopt;
  const auto m = muc(pp), b = b_cubed(pp), c = ceaf_e(pp);
  const auto v = v_measure(pp);
  ScoreReport r;
  r.muc_p = 100 * m.p, r.muc_r = 100 * m.r, r.muc_f1 = 100 * m.f1;
  r.b3_p = 100 * b.p, r.b3_r = 100 * b.r, r.b3_f1 = 100 * b.f1;
  r.ceafe_p = 100 * c.p, r.ceafe_r = 100 * c.r, r.ceafe_f1 = 100 * c.f1;
  r.conll_f1 = (r.muc_f1 + r.b3_f1 + r.ceafe_f1) / 3.0;
  r.homogeneity = v.homogeneity, r.completeness = v.completeness, r.v_measure = v.v;
  return r;
}

struct AggregateReport {
  std::optional<ScoreReport> mean;  // nullopt when no input was defined
  std::size_t n_defined = 0;
  std::size_t excluded_count = 0;
};

/// Unweighted mean over defined reports; undefined ones are counted only.
inline AggregateReport aggregate(std::span<const std::optional<ScoreReport>> reports) {
  AggregateReport out;
  ScoreReport sum;
  for (const auto& r : reports) {
    if (!r) {
      ++out.excluded_count;
      continue;
    }
    ++out.n_defined;
    sum.muc_p += r->muc_p, sum.muc_r += r->muc_r, sum.muc_f1 += r->muc_f1;
    sum.b3_p += r->b3_p, sum.b3_r += r->b3_r, sum.b3_f1 += r->b3_f1;
    sum.ceafe_p += r->ceafe_p, sum.ceafe_r += r->ceafe_r, sum.ceafe_f1 += r->ceafe_f1;
    sum.homogeneity += r->homogeneity, sum.completeness += r->completeness;
    sum.v_measure += r->v_measure;
  }
  if (out.n_defined == 0) return out;
  const double n = static_cast<double>(out.n_defined);
  ScoreReport m;
  m.muc_p = sum.muc_p / n, m.muc_r = sum.muc_r / n, m.muc_f1 = sum.muc_f1 / n;
  m.b3_p = sum.b3_p / n, m.b3_r = sum.b3_r / n, m.b3_f1 = sum.b3_f1 / n;
  m.ceafe_p = sum.ceafe_p / n, m.ceafe_r = sum.ceafe_r / n, m.ceafe_f1 = sum.ceafe_f1 / n;
  m.conll_f1 = (m.muc_f1 + m.b3_f1 + m.ceafe_f1) / 3.0;
  m.homogeneity = sum.homogeneity / n, m.completeness = sum.completeness / n;
  m.v_measure = sum.v_measure / n;
  out.mean = m;
  return out;
}

inline nlohmann::ordered_json to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["muc"] = {{"p", r.muc_p}, {"r", r.muc_r}, {"f1", r.muc_f1}};
  j["b3"] = {{"p", r.b3_p}, {"r", r.b3_r}, {"f1", r.b3_f1}};
  j["ceafe"] = {{"p", r.ceafe_p}, {"r", r.ceafe_r}, {"f1", r.ceafe_f1}};
  j["conll_f1"] = r.conll_f1;
  j["homogeneity"] = r.homogeneity;
  j["completeness"] = r.completeness;
  j["v_measure"] = r.v_measure;
  return j;
}

inline nlohmann::ordered_json to_json(const std::optional<ScoreReport>& r) {
  return r ? to_json(*r) : nlohmann::ordered_json(nullptr);
}

}  // namespace shiftlink
