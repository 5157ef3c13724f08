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
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "shiftlink/error.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

// Functional-location (FL) codes identify machinery hierarchically; two
// codes are the more related the longer their common prefix.

struct FlConfig {
  int n_bins = 11;
  int embed_dim = 50;
};

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

/// Length of the common prefix divided by the longer code's length.
/// Missing or blank codes score 0.
inline double fl_similarity(const std::optional<std::string>& fi,
                            const std::optional<std::string>& fj) {
  if (!fi || !fj) return 0.0;
  const auto a = trim(*fi);
  const auto b = trim(*fj);
  if (a.empty() || b.empty()) return 0.0;
  const auto n = std::min(a.size(), b.size());
  std::size_t overlap = 0;
  while (overlap < n && a[overlap] == b[overlap]) ++overlap;
  return static_cast<double>(overlap) / static_cast<double>(std::max(a.size(), b.size()));
}

/// Nearest of n_bins equally spaced levels over [0, 1].
inline int fl_bin(double sim, int n_bins) {
  if (!(sim >= 0.0 && sim <= 1.0)) throw ValidationError("FL similarity outside [0, 1]");
  if (n_bins < 2) throw ConfigError("n_bins must be at least 2");
  const auto idx = static_cast<int>(std::floor(sim * (n_bins - 1) + 0.5));
  return std::min(idx, n_bins - 1);
}

/// Trainable bin embeddings, one row per bin.
struct FlEmbeddingTable {
  Eigen::MatrixXd table;  // n_bins x embed_dim

  static FlEmbeddingTable init(const FlConfig& cfg, std::uint64_t seed) {
    if (cfg.n_bins < 2) throw ConfigError("n_bins must be at least 2");
    if (cfg.embed_dim < 1) throw ConfigError("embed_dim must be positive");
    Random rng(derive_seed(seed, "fl_table"));
    FlEmbeddingTable t;
    t.table.resize(cfg.n_bins, cfg.embed_dim);
    for (int i = 0; i < cfg.n_bins; ++i)
      for (int j = 0; j < cfg.embed_dim; ++j) t.table(i, j) = rng.uniform(-0.1, 0.1);
    return t;
  }

  int n_bins() const { return static_cast<int>(table.rows()); }
  int embed_dim() const { return static_cast<int>(table.cols()); }

  int row_for(const std::optional<std::string>& fi,
              const std::optional<std::string>& fj) const {
    return fl_bin(fl_similarity(fi, fj), n_bins());
  }

  Eigen::VectorXd feature(const std::optional<std::string>& fi,
                          const std::optional<std::string>& fj) const {
    return table.row(row_for(fi, fj)).transpose();
  }
};

}  // namespace shiftlink
