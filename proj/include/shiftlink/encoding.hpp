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

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "shiftlink/corpus.hpp"
#include "shiftlink/error.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

using TokenMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class EncoderBackend { kBuiltin, kRemote };

inline std::string to_string(EncoderBackend b) {
  return b == EncoderBackend::kBuiltin ? "builtin" : "remote";
}

inline EncoderBackend encoder_backend_from_string(std::string_view s) {
  if (s == "builtin") return EncoderBackend::kBuiltin;
  if (s == "remote") return EncoderBackend::kRemote;
  throw ConfigError("unknown encoder backend '" + std::string(s) + "'");
}

struct EncoderConfig {
  EncoderBackend backend = EncoderBackend::kBuiltin;
  int dim = 256;
  int max_tokens = 512;
  int per_record_budget = 0;  // 0: floor((max_tokens - 3) / 2)
  std::uint64_t seed = 0;     // builtin hashing seed
  std::string remote_url;
  int timeout_ms = 30000;
  int max_in_flight = 4;
  int max_retries = 2;

  int budget() const {
    return per_record_budget > 0 ? per_record_budget : (max_tokens - 3) / 2;
  }

  // Single-record inputs only need [CLS] and one [SEP].
  int single_budget() const { return max_tokens - 2; }

  void validate() const {
    if (dim <= 0) throw ConfigError("encoder dim must be positive");
    if (max_tokens <= 3) throw ConfigError("max_tokens must exceed 3");
    if (budget() < 1) throw ConfigError("per-record budget must be positive");
    if (2 * budget() + 3 > max_tokens) {
      throw ConfigError("2 * per_record_budget + 3 exceeds max_tokens");
    }
    if (backend == EncoderBackend::kBuiltin && dim < 16) {
      throw ConfigError("builtin encoder needs dim >= 16");
    }
    if (backend == EncoderBackend::kRemote && remote_url.empty()) {
      throw ConfigError("remote encoder needs remote_url");
    }
  }
};

/// Joint encoding of "[CLS] a [SEP] b [SEP]". Special positions other than
/// [CLS] are not kept.
struct PairEncoding {
  Eigen::VectorXd cls;
  TokenMatrix tokens_a;
  TokenMatrix tokens_b;
  bool truncated_a = false;
  bool truncated_b = false;
};

struct SingleEncoding {
  Eigen::VectorXd summary;
  TokenMatrix tokens;
  bool truncated = false;
};

struct EncoderFingerprint {
  std::string backend;
  int dim = 0;
  std::string model_id;

  bool operator==(const EncoderFingerprint&) const = default;
};

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual PairEncoding encode_pair(std::string_view text_a, std::string_view text_b) const = 0;
  virtual SingleEncoding encode_single(std::string_view text) const = 0;
  virtual EncoderFingerprint fingerprint() const = 0;
  int dim() const { return fingerprint().dim; }
};

inline PairEncoding encode_pair(const Encoder& enc, const Record& a, const Record& b) {
  return enc.encode_pair(a.text, b.text);
}

inline SingleEncoding encode_single(const Encoder& enc, const Record& r) {
  return enc.encode_single(r.text);
}

// --- tokenization ------------------------------------------------------------

namespace detail {

inline bool decode_utf8(std::string_view s, std::size_t& i, char32_t& cp) {
  const auto c0 = static_cast<unsigned char>(s[i]);
  int len = c0 < 0x80 ? 1 : (c0 >> 5) == 0x6 ? 2 : (c0 >> 4) == 0xe ? 3 : (c0 >> 3) == 0x1e ? 4 : 0;
  if (len == 0 || i + len > s.size()) {
    ++i;
    return false;
  }
  cp = len == 1 ? c0 : len == 2 ? (c0 & 0x1f) : len == 3 ? (c0 & 0x0f) : (c0 & 0x07);
  for (int k = 1; k < len; ++k) {
    const auto c = static_cast<unsigned char>(s[i + k]);
    if ((c >> 6) != 0x2) {
      ++i;
      return false;
    }
    cp = (cp << 6) | (c & 0x3f);
  }
  i += len;
  return true;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

inline bool is_word_char(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') ||
           (cp >= 'A' && cp <= 'Z') || cp == '_';
  }
  // Latin-1 punctuation and symbols, general punctuation, CJK punctuation.
  if (cp >= 0x80 && cp <= 0xbf) return false;
  if (cp == 0xd7 || cp == 0xf7) return false;
  if (cp >= 0x2000 && cp <= 0x206f) return false;
  if (cp >= 0x3000 && cp <= 0x303f) return false;
  return true;
}

inline char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 32;
  return cp;
}

}  // namespace detail

/// Lowercased word tokens (maximal runs of letters, digits and underscore).
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  while (i < text.size()) {
    char32_t cp = 0;
    if (detail::decode_utf8(text, i, cp) && detail::is_word_char(cp)) {
      detail::append_utf8(cur, detail::to_lower(cp));
      continue;
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// --- builtin encoder -----------------------------------------------------------

/// Unit vector for one token: the token's 64-bit hash seeds a generator that
/// draws dim values uniformly from [-1, 1).
inline Eigen::VectorXd builtin_token_vector(std::string_view token, int dim,
                                            std::uint64_t seed = 0) {
  std::uint64_t state = fnv1a64(token) ^ splitmix64(seed);
  Eigen::VectorXd v(dim);
  for (int k = 0; k < dim; ++k) {
    v[k] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
  }
  return v / v.norm();
}

inline TokenMatrix builtin_token_vectors(const std::vector<std::string>& tokens, int dim,
                                         std::uint64_t seed = 0) {
  TokenMatrix m(static_cast<Eigen::Index>(tokens.size()), dim);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = builtin_token_vector(tokens[i], dim, seed).transpose();
  }
  return m;
}

inline TokenMatrix builtin_token_vectors(std::string_view text, int dim, std::uint64_t seed = 0) {
  if (dim < 16) throw ConfigError("builtin encoder needs dim >= 16");
  return builtin_token_vectors(tokenize(text), dim, seed);
}

/// normalize(mean_a + mean_b + 2 * mean_a o mean_b). The product term is
/// what makes the joint vector respond to lexical overlap.
inline Eigen::VectorXd builtin_cls_vector(const TokenMatrix& tokens_a, const TokenMatrix& tokens_b) {
  if (tokens_a.rows() == 0 || tokens_b.rows() == 0) {
    throw ValidationError("cls vector needs non-empty token matrices");
  }
  const Eigen::VectorXd ma = tokens_a.colwise().mean().transpose();
  const Eigen::VectorXd mb = tokens_b.colwise().mean().transpose();
  Eigen::VectorXd v = ma + mb + 2.0 * ma.cwiseProduct(mb);
  const double n = v.norm();
  return n > 0 ? Eigen::VectorXd(v / n) : v;
}

class BuiltinEncoder final : public Encoder {
 public:
  explicit BuiltinEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.backend = EncoderBackend::kBuiltin;
    cfg_.validate();
  }

  PairEncoding encode_pair(std::string_view text_a, std::string_view text_b) const override {
    PairEncoding e;
    e.tokens_a = encode_tokens(text_a, cfg_.budget(), e.truncated_a);
    e.tokens_b = encode_tokens(text_b, cfg_.budget(), e.truncated_b);
    e.cls = builtin_cls_vector(e.tokens_a, e.tokens_b);
    return e;
  }

  SingleEncoding encode_single(std::string_view text) const override {
    SingleEncoding e;
    e.tokens = encode_tokens(text, cfg_.single_budget(), e.truncated);
    Eigen::VectorXd mean = e.tokens.colwise().mean().transpose();
    const double n = mean.norm();
    e.summary = n > 0 ? Eigen::VectorXd(mean / n) : mean;
    return e;
  }

  EncoderFingerprint fingerprint() const override {
    return {"builtin", cfg_.dim, "builtin-hash-v1/" + hex64(cfg_.seed)};
  }

  const EncoderConfig& config() const { return cfg_; }

 private:
  TokenMatrix encode_tokens(std::string_view text, int budget, bool& truncated) const {
    auto toks = tokenize(text);
    if (toks.empty()) throw ValidationError("text has no tokens after normalization");
    truncated = static_cast<int>(toks.size()) > budget;
    if (truncated) toks.resize(static_cast<std::size_t>(budget));
    return builtin_token_vectors(toks, cfg_.dim, cfg_.seed);
  }

  EncoderConfig cfg_;
};

// --- attention pooling ---------------------------------------------------------

inline Eigen::VectorXd softmax(const Eigen::VectorXd& u) {
  const double mx = u.maxCoeff();
  Eigen::VectorXd e = (u.array() - mx).exp().matrix();
  return e / e.sum();
}

/// Weights softmax(tokens * attention) over the rows; returns the weighted
/// row mean.
inline Eigen::VectorXd attention_pool(const TokenMatrix& tokens,
                                      const Eigen::VectorXd& attention_vector) {
  if (tokens.rows() == 0) throw ValidationError("attention_pool over zero tokens");
  const Eigen::VectorXd alpha = softmax(tokens * attention_vector);
  return tokens.transpose() * alpha;
}

/// Gradient of <upstream, attention_pool(tokens, a)> with respect to a.
inline Eigen::VectorXd attention_pool_grad(const TokenMatrix& tokens,
                                           const Eigen::VectorXd& attention_vector,
                                           const Eigen::VectorXd& upstream) {
  const Eigen::VectorXd alpha = softmax(tokens * attention_vector);
  const Eigen::VectorXd s = tokens * upstream;
  const Eigen::VectorXd du = alpha.cwiseProduct((s.array() - alpha.dot(s)).matrix());
  return tokens.transpose() * du;
}

}  // namespace shiftlink
