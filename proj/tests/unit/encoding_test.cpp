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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "shiftlink/encoding.hpp"

namespace shiftlink {
namespace {

BuiltinEncoder builtin(int dim = 256) {
  EncoderConfig cfg;
  cfg.dim = dim;
  return BuiltinEncoder(cfg);
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Pumpe P-101: undicht!"), (std::vector<std::string>{"pumpe", "p", "101", "undicht"}));
  EXPECT_EQ(tokenize("  \t "), std::vector<std::string>{});
  EXPECT_EQ(tokenize("Ölstand ÜBERPRÜFT"), (std::vector<std::string>{"ölstand", "überprüft"}));
  EXPECT_EQ(tokenize("snake_case x"), (std::vector<std::string>{"snake_case", "x"}));
}

TEST(BuiltinTokens, RowsAreUnitNormAndRepeatable) {
  const auto m = builtin_token_vectors("pumpe ventil pumpe lager", 64);
  ASSERT_EQ(m.rows(), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) EXPECT_NEAR(m.row(r).norm(), 1.0, 1e-6);
  EXPECT_TRUE(m.row(0) == m.row(2));
  EXPECT_TRUE(builtin_token_vectors("pumpe", 64) == builtin_token_vectors("PUMPE", 64));
}

TEST(BuiltinTokens, GoldenCosineOfDistinctTokens) {
  const auto a = builtin_token_vector("pumpe", 256, 0);
  const auto b = builtin_token_vector("ventil", 256, 0);
  const double c = cosine(a, b);
  EXPECT_LT(c, 0.5);
  EXPECT_NEAR(c, -0.049887437999974665, 1e-12);
  EXPECT_NEAR(a[0], -0.084724983629261744, 1e-15);
}

TEST(BuiltinTokens, SeedChangesVectors) {
  EXPECT_FALSE(builtin_token_vector("pumpe", 32, 0) == builtin_token_vector("pumpe", 32, 1));
}

TEST(EncodePair, IdenticalTextsGiveIdenticalRows) {
  const auto enc = builtin();
  const auto e = enc.encode_pair("pumpe leckt an der dichtung", "pumpe leckt an der dichtung");
  EXPECT_TRUE(e.tokens_a == e.tokens_b);
  const auto again = enc.encode_pair("pumpe leckt an der dichtung", "pumpe leckt an der dichtung");
  EXPECT_TRUE(e.cls == again.cls);
  EXPECT_TRUE(e.tokens_a == again.tokens_a);
  EXPECT_FALSE(e.truncated_a);
}

TEST(EncodePair, TruncatesEachRecordToItsBudget) {
  std::string long_text;
  for (int i = 0; i < 600; ++i) long_text += "w" + std::to_string(i) + " ";
  const auto enc = builtin();
  const auto e = enc.encode_pair(long_text, "kurz");
  EXPECT_TRUE(e.truncated_a);
  EXPECT_FALSE(e.truncated_b);
  EXPECT_EQ(e.tokens_a.rows(), 254);
  EXPECT_EQ(e.tokens_b.rows(), 1);
  const auto s = enc.encode_single(long_text);
  EXPECT_TRUE(s.truncated);
  EXPECT_EQ(s.tokens.rows(), 510);
}

TEST(EncoderConfig, BudgetInvariant) {
  EncoderConfig cfg;
  EXPECT_EQ(cfg.budget(), 254);
  cfg.per_record_budget = 255;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.per_record_budget = 100;
  EXPECT_NO_THROW(cfg.validate());
  cfg.dim = 8;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EncoderConfig remote;
  remote.backend = EncoderBackend::kRemote;
  EXPECT_THROW(remote.validate(), ConfigError);
}

TEST(EncodeSingle, EmptyTextIsRejected) {
  const auto enc = builtin();
  EXPECT_THROW(enc.encode_single("  ... "), ValidationError);
  EXPECT_THROW(enc.encode_pair("ok", " "), ValidationError);
}

TEST(EncodeSingle, SingleTokenSummaryIsThatToken) {
  const auto enc = builtin(32);
  const auto s = enc.encode_single("ventil");
  EXPECT_TRUE(s.summary.isApprox(builtin_token_vector("ventil", 32, 0), 1e-12));
}

TEST(EncodeSingle, SummaryIgnoresWordOrder) {
  const auto enc = builtin();
  const auto a = enc.encode_single("pump leaking seal");
  const auto b = enc.encode_single("pump seal leaking");
  EXPECT_NEAR(cosine(a.summary, b.summary), 1.0, 1e-12);
}

TEST(ClsVector, IdenticalRecordsFollowFormula) {
  const auto t = builtin_token_vectors("pumpe undicht lager", 64);
  const Eigen::VectorXd m = t.colwise().mean().transpose();
  const Eigen::VectorXd expect = (2 * m + 2 * m.cwiseProduct(m)).normalized();
  EXPECT_TRUE(builtin_cls_vector(t, t).isApprox(expect, 1e-12));
}

TEST(ClsVector, DisjointBagsHaveSmallInteraction) {
  const auto a = builtin_token_vectors("pumpe lager motor filter", 256);
  const auto b = builtin_token_vectors("ventil kessel sensor antrieb", 256);
  const Eigen::VectorXd ma = a.colwise().mean().transpose();
  const Eigen::VectorXd mb = b.colwise().mean().transpose();
  EXPECT_LT(ma.cwiseProduct(mb).norm(), 0.05);
}

TEST(AttentionPool, SingleTokenAndZeroAttention) {
  TokenMatrix one(1, 3);
  one << 0.2, -0.4, 0.9;
  EXPECT_TRUE(attention_pool(one, Eigen::Vector3d(5, -1, 2)).isApprox(one.row(0).transpose()));
  const auto t = builtin_token_vectors("a b c d", 16);
  const Eigen::VectorXd mean = t.colwise().mean().transpose();
  EXPECT_TRUE(attention_pool(t, Eigen::VectorXd::Zero(16)).isApprox(mean, 1e-12));
}

TEST(AttentionPool, HandSoftmax) {
  TokenMatrix t(2, 2);
  t << 1, 0, 0, 1;
  const auto p = attention_pool(t, Eigen::Vector2d(10, 0));
  const double w = std::exp(10.0) / (std::exp(10.0) + 1.0);
  EXPECT_NEAR(p[0], w, 1e-12);
  EXPECT_NEAR(p[1], 1 - w, 1e-12);
  EXPECT_NEAR(p[0], 0.99995, 1e-5);
}

TEST(AttentionPool, StableForLargeScores) {
  TokenMatrix t(2, 2);
  t << 1, 0, 0, 1;
  const auto p = attention_pool(t, Eigen::Vector2d(1e4, 0));
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p[0], 1.0, 1e-12);
}

TEST(AttentionPool, OutputInsideColumnRange) {
  Random rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    TokenMatrix t(n, 8);
    Eigen::VectorXd a(8);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 8; ++j) t(i, j) = rng.uniform(-1, 1);
    for (int j = 0; j < 8; ++j) a[j] = rng.uniform(-3, 3);
    const auto p = attention_pool(t, a);
    for (int j = 0; j < 8; ++j) {
      ASSERT_GE(p[j], t.col(j).minCoeff() - 1e-12);
      ASSERT_LE(p[j], t.col(j).maxCoeff() + 1e-12);
    }
  }
}

TEST(AttentionPool, GradientMatchesFiniteDifferences) {
  Random rng(5);
  const auto t = builtin_token_vectors("pumpe ventil lager dichtung motor", 16);
  Eigen::VectorXd a(16), up(16);
  for (int j = 0; j < 16; ++j) {
    a[j] = rng.uniform(-2, 2);
    up[j] = rng.uniform(-1, 1);
  }
  const auto g = attention_pool_grad(t, a, up);
  const double h = 1e-4;
  Eigen::VectorXd fd(16);
  for (int j = 0; j < 16; ++j) {
    Eigen::VectorXd ap = a, am = a;
    ap[j] += h;
    am[j] -= h;
    fd[j] = (up.dot(attention_pool(t, ap)) - up.dot(attention_pool(t, am))) / (2 * h);
  }
  EXPECT_LT((g - fd).norm() / std::max(g.norm(), fd.norm()), 1e-4);
}

TEST(Fingerprint, NamesBackendDimAndSeed) {
  EncoderConfig cfg;
  cfg.dim = 32;
  cfg.seed = 7;
  const auto fp = BuiltinEncoder(cfg).fingerprint();
  EXPECT_EQ(fp.backend, "builtin");
  EXPECT_EQ(fp.dim, 32);
  EXPECT_NE(fp.model_id.find("builtin-hash-v1/"), std::string::npos);
  cfg.seed = 8;
  EXPECT_FALSE(fp == BuiltinEncoder(cfg).fingerprint());
}

}  // namespace
}  // namespace shiftlink
