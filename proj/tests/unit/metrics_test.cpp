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

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "shiftlink/metrics.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {
namespace {

using P = std::vector<std::vector<std::string>>;

PartitionPair pair_of(P gold, P system) {
  PartitionPair pp;
  for (const auto& g : gold) pp.universe.insert(pp.universe.end(), g.begin(), g.end());
  pp.gold = std::move(gold);
  pp.system = std::move(system);
  return pp;
}

constexpr double kTol = 1e-9;

TEST(StripSingletons, DropsGoldSingletonsAndRestrictsSystem) {
  const auto pp = strip_singletons({{"g1", {"A", "B"}}, {"g2", {"C"}}},
                                   {{"s1", {"A", "B"}}, {"s2", {"C"}}});
  ASSERT_TRUE(pp.defined);
  EXPECT_EQ(pp.gold, (P{{"A", "B"}}));
  EXPECT_EQ(pp.system, (P{{"A", "B"}}));
  EXPECT_EQ(pp.universe.size(), 2u);
}

TEST(StripSingletons, SystemMembersOutsideUniverseAreDropped) {
  const auto pp = strip_singletons({{"g", {"A", "B"}}}, {{"s", {"A", "B", "C"}}});
  EXPECT_EQ(pp.system, (P{{"A", "B"}}));
}

TEST(StripSingletons, AllGoldSingletonsIsUndefined) {
  const auto pp = strip_singletons({{"g1", {"A"}}, {"g2", {"B"}}}, {{"s", {"A", "B"}}});
  EXPECT_FALSE(pp.defined);
  EXPECT_FALSE(score(pp).has_value());
}

TEST(StripSingletons, ShrunkSystemChainsStayAsSingletons) {
  const auto pp = strip_singletons({{"g", {"A", "B"}}}, {{"s1", {"A", "X"}}, {"s2", {"B"}}});
  ASSERT_EQ(pp.system.size(), 2u);
  EXPECT_EQ(pp.system[0].size() + pp.system[1].size(), 2u);
}

TEST(Muc, Identity) {
  const auto m = muc(pair_of({{"A", "B", "C"}}, {{"A", "B", "C"}}));
  EXPECT_NEAR(m.p, 1, kTol);
  EXPECT_NEAR(m.r, 1, kTol);
  EXPECT_NEAR(m.f1, 1, kTol);
}

TEST(Muc, SplitChain) {
  const auto m = muc(pair_of({{"A", "B", "C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  EXPECT_NEAR(m.r, 2.0 / 3.0, kTol);
  EXPECT_NEAR(m.p, 1.0, kTol);
  EXPECT_NEAR(m.f1, 0.8, kTol);
}

TEST(Muc, AllSingletonSystemHasNoRecall) {
  const auto m = muc(pair_of({{"A", "B", "C"}}, {{"A"}, {"B"}, {"C"}}));
  EXPECT_NEAR(m.r, 0, kTol);
  EXPECT_NEAR(m.f1, 0, kTol);
}

TEST(BCubed, Identity) {
  const auto b = b_cubed(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  EXPECT_NEAR(b.f1, 1, kTol);
}

TEST(BCubed, SplitChain) {
  const auto b = b_cubed(pair_of({{"A", "B", "C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  EXPECT_NEAR(b.r, 0.5, kTol);
  EXPECT_NEAR(b.p, 1.0, kTol);
  EXPECT_NEAR(b.f1, 2.0 / 3.0, kTol);
}

TEST(BCubed, MergedChains) {
  const auto b = b_cubed(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B", "C", "D"}}));
  EXPECT_NEAR(b.p, 0.5, kTol);
  EXPECT_NEAR(b.r, 1.0, kTol);
}

TEST(CeafE, Identity) {
  const auto c = ceaf_e(pair_of({{"A", "B"}, {"C", "D"}}, {{"C", "D"}, {"A", "B"}}));
  EXPECT_NEAR(c.f1, 1, kTol);
}

TEST(CeafE, SplitChain) {
  const auto c = ceaf_e(pair_of({{"A", "B", "C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  EXPECT_NEAR(c.r, 2.0 / 3.0, kTol);
  EXPECT_NEAR(c.p, 1.0 / 3.0, kTol);
  EXPECT_NEAR(c.f1, 4.0 / 9.0, kTol);
}

TEST(CeafE, DisjointMembershipScoresZero) {
  const auto c = ceaf_e(pair_of({{"A", "B"}}, {{"C", "D"}}));
  EXPECT_NEAR(c.p, 0, kTol);
  EXPECT_NEAR(c.r, 0, kTol);
  EXPECT_NEAR(c.f1, 0, kTol);
}

TEST(CeafE, AssignmentMatchesBruteForceOnRandomInstances) {
  Random rng(20240611);
  for (int trial = 0; trial < 200; ++trial) {
    // Random gold and system partitions over the same mentions.
    const int n = 2 + static_cast<int>(rng.below(11));
    auto random_partition = [&](int max_chains) {
      const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_chains)));
      P out(static_cast<std::size_t>(k));
      for (int m = 0; m < n; ++m) out[rng.below(static_cast<std::uint64_t>(k))].push_back("m" + std::to_string(m));
      std::erase_if(out, [](const auto& c) { return c.empty(); });
      return out;
    };
    const auto gold = random_partition(6);
    const auto system = random_partition(6);
    const auto pp = pair_of(gold, system);
    const auto c = ceaf_e(pp);
    const double total = oracle::brute_force_ceaf_total(gold, system);
    ASSERT_NEAR(c.r, total / static_cast<double>(gold.size()), kTol) << "trial " << trial;
    ASSERT_NEAR(c.p, total / static_cast<double>(system.size()), kTol) << "trial " << trial;
  }
}

TEST(MaxWeightAssignment, HandlesRectangularMatrices) {
  const std::vector<std::vector<double>> w{{1, 0, 0}, {0, 0, 5}};
  const auto a = max_weight_assignment(w);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0], 0);
  EXPECT_EQ(a[1], 2);
  const std::vector<std::vector<double>> tall{{1}, {3}, {2}};
  const auto b = max_weight_assignment(tall);
  EXPECT_EQ(std::count(b.begin(), b.end(), 0), 1);
  EXPECT_EQ(b[1], 0);
}

TEST(VMeasure, Identity) {
  const auto v = v_measure(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  EXPECT_NEAR(v.homogeneity, 1, kTol);
  EXPECT_NEAR(v.completeness, 1, kTol);
  EXPECT_NEAR(v.v, 1, kTol);
}

TEST(VMeasure, OneClusterOverTwoGoldChains) {
  const auto v = v_measure(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B", "C", "D"}}));
  EXPECT_NEAR(v.homogeneity, 0, kTol);
  EXPECT_NEAR(v.completeness, 1, kTol);
  EXPECT_NEAR(v.v, 0, kTol);
}

TEST(VMeasure, AllSingletonsAgainstOneChain) {
  const auto v = v_measure(pair_of({{"A", "B", "C", "D"}}, {{"A"}, {"B"}, {"C"}, {"D"}}));
  EXPECT_NEAR(v.homogeneity, 1, kTol);
  EXPECT_NEAR(v.completeness, 0, kTol);
  EXPECT_NEAR(v.v, 0, kTol);
}

TEST(VMeasure, SwappingSidesSwapsHomogeneityAndCompleteness) {
  Random rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    P a(3), b(4);
    for (int m = 0; m < 9; ++m) {
      a[rng.below(3)].push_back("m" + std::to_string(m));
      b[rng.below(4)].push_back("m" + std::to_string(m));
    }
    std::erase_if(a, [](const auto& c) { return c.empty(); });
    std::erase_if(b, [](const auto& c) { return c.empty(); });
    const auto ab = v_measure(pair_of(a, b));
    const auto ba = v_measure(pair_of(b, a));
    EXPECT_NEAR(ab.homogeneity, ba.completeness, 1e-12);
    EXPECT_NEAR(ab.completeness, ba.homogeneity, 1e-12);
  }
}

TEST(VMeasure, HandFormulaOnMixedPartition) {
  // gold {A,B,C},{D,E}; system {A,B},{C,D,E}. Entropies by hand (natural log).
  const double n = 5;
  const double hg = -(3 / n) * std::log(3 / n) - (2 / n) * std::log(2 / n);
  const double hs = -(2 / n) * std::log(2 / n) - (3 / n) * std::log(3 / n);
  // H(gold|system): cluster {A,B} pure; cluster {C,D,E} has 1 of gold1, 2 of gold2.
  const double hg_s = -(1 / n) * std::log(1.0 / 3) - (2 / n) * std::log(2.0 / 3);
  // H(system|gold): gold {A,B,C} split 2/1; gold {D,E} pure.
  const double hs_g = -(2 / n) * std::log(2.0 / 3) - (1 / n) * std::log(1.0 / 3);
  const double h = 1 - hg_s / hg, c = 1 - hs_g / hs;
  const auto v = v_measure(pair_of({{"A", "B", "C"}, {"D", "E"}}, {{"A", "B"}, {"C", "D", "E"}}));
  EXPECT_NEAR(v.homogeneity, h, kTol);
  EXPECT_NEAR(v.completeness, c, kTol);
  EXPECT_NEAR(v.v, 2 * h * c / (h + c), kTol);
}

TEST(BinaryPrf, HandConfusionCounts) {
  const std::vector<double> s{0.9, 0.8, 0.2};
  const std::vector<int> y{1, 0, 0};
  const auto m = binary_prf(s, y, 0.5);
  EXPECT_NEAR(m.p, 0.5, kTol);
  EXPECT_NEAR(m.r, 1.0, kTol);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, kTol);
}

TEST(BinaryPrf, PerfectSeparationAndAllPositive) {
  const std::vector<double> s{0.9, 0.7, 0.2, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_NEAR(binary_prf(s, y, 0.5).f1, 1.0, kTol);
  const auto all = binary_prf(s, y, 0.0);
  EXPECT_NEAR(all.p, 0.5, kTol);
  EXPECT_NEAR(all.r, 1.0, kTol);
}

TEST(Score, ConllIsMeanOfThreeF1) {
  const auto r = score(pair_of({{"A", "B", "C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  ASSERT_TRUE(r);
  EXPECT_DOUBLE_EQ(r->conll_f1, (r->muc_f1 + r->b3_f1 + r->ceafe_f1) / 3.0);
  EXPECT_NEAR(r->muc_f1, 80.0, 1e-9);
}

TEST(Score, PermutingChainsAndMembersChangesNothing) {
  const auto a = score(pair_of({{"A", "B", "C"}, {"D", "E"}}, {{"A", "B"}, {"C", "D", "E"}}));
  const auto b = score(pair_of({{"E", "D"}, {"C", "A", "B"}}, {{"E", "C", "D"}, {"B", "A"}}));
  ASSERT_TRUE(a && b);
  EXPECT_NEAR(a->conll_f1, b->conll_f1, 1e-12);
  EXPECT_NEAR(a->v_measure, b->v_measure, 1e-12);
}

TEST(Score, PerfectOnlyWhenPartitionsAgree) {
  const auto same = score(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B"}, {"C", "D"}}));
  const auto diff = score(pair_of({{"A", "B"}, {"C", "D"}}, {{"A", "B"}, {"C"}, {"D"}}));
  EXPECT_DOUBLE_EQ(same->conll_f1, 100.0);
  EXPECT_LT(diff->conll_f1, 100.0);
  EXPECT_LT(diff->muc_f1, 100.0);
  EXPECT_LT(diff->b3_f1, 100.0);
  EXPECT_LT(diff->ceafe_f1, 100.0);
}

TEST(Aggregate, MeanExclusionAndSingleWindow) {
  ScoreReport a, b;
  a.muc_f1 = a.b3_f1 = a.ceafe_f1 = a.conll_f1 = 40;
  b.muc_f1 = b.b3_f1 = b.ceafe_f1 = b.conll_f1 = 60;
  const std::vector<std::optional<ScoreReport>> two{a, b};
  EXPECT_DOUBLE_EQ(aggregate(two).mean->conll_f1, 50.0);
  const std::vector<std::optional<ScoreReport>> one{a};
  EXPECT_DOUBLE_EQ(aggregate(one).mean->conll_f1, 40.0);
  const std::vector<std::optional<ScoreReport>> mixed{a, std::nullopt};
  const auto agg = aggregate(mixed);
  EXPECT_DOUBLE_EQ(agg.mean->conll_f1, 40.0);
  EXPECT_EQ(agg.excluded_count, 1u);
  EXPECT_EQ(agg.n_defined, 1u);
  const std::vector<std::optional<ScoreReport>> none{std::nullopt};
  EXPECT_FALSE(aggregate(none).mean.has_value());
}

}  // namespace
}  // namespace shiftlink
