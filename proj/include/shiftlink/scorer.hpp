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
#include <cstring>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "shiftlink/clustering.hpp"
#include "shiftlink/corpus.hpp"
#include "shiftlink/encoding.hpp"
#include "shiftlink/error.hpp"
#include "shiftlink/flsim.hpp"
#include "shiftlink/metrics.hpp"
#include "shiftlink/pairgen.hpp"
#include "shiftlink/util.hpp"

namespace shiftlink {

// Pair features by architecture:
//   cdcr: [cls, pool(a), pool(b), pool(a) o pool(b), fl?]  (joint encoding)
//   nli:  [cls, fl?]                                        (joint encoding)
//   sts:  [summary(a), summary(b), summary(a) o summary(b), fl?]
enum class ArchKind { kCdcr, kNli, kSts };

inline const char* to_string(ArchKind k) {
  switch (k) {
    case ArchKind::kCdcr: return "cdcr";
    case ArchKind::kNli: return "nli";
    case ArchKind::kSts: return "sts";
  }
  return "?";
}

inline ArchKind arch_kind_from_string(std::string_view s) {
  if (s == "cdcr") return ArchKind::kCdcr;
  if (s == "nli") return ArchKind::kNli;
  if (s == "sts") return ArchKind::kSts;
  throw ConfigError("unknown architecture '" + std::string(s) + "'");
}

struct ArchMode {
  ArchKind kind = ArchKind::kCdcr;
  bool use_fl = true;

  bool joint() const { return kind != ArchKind::kSts; }
  bool operator==(const ArchMode&) const = default;
};

inline int feature_width(ArchMode mode, int dim, int embed_dim) {
  const int text = mode.kind == ArchKind::kCdcr ? 4 * dim : mode.kind == ArchKind::kNli ? dim : 3 * dim;
  return text + (mode.use_fl ? embed_dim : 0);
}

struct TrainConfig {
  double learning_rate = 5e-5;
  double weight_decay = 0.1;
  double epsilon = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int epochs = 5;
  int batch_size = 32;
  int hidden1 = 1024;
  int hidden2 = 1024;
  FlConfig fl;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0) || !(weight_decay >= 0) || !(epsilon > 0) ||
        !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw ConfigError("invalid optimizer hyperparameters");
    }
    if (epochs < 1 || batch_size < 1 || hidden1 < 1 || hidden2 < 1) {
      throw ConfigError("epochs, batch_size and hidden widths must be positive");
    }
  }
};

/// Trainable parameters. Tensors not used by the architecture stay empty.
struct ScorerParams {
  Eigen::VectorXd attention;  // dim, cdcr only
  Eigen::MatrixXd fl_table;   // n_bins x embed_dim, use_fl only
  Eigen::MatrixXd w1;         // h1 x in
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // h2 x h1
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // 1 x h2
  Eigen::VectorXd b3;  // 1

  /// Named flat views over every non-empty tensor, in a fixed order.
  std::vector<std::pair<std::string, std::span<double>>> tensors() {
    std::vector<std::pair<std::string, std::span<double>>> out;
    auto add = [&](const char* name, double* data, Eigen::Index n) {
      if (n > 0) out.emplace_back(name, std::span<double>(data, static_cast<std::size_t>(n)));
    };
    add("attention", attention.data(), attention.size());
    add("fl_table", fl_table.data(), fl_table.size());
    add("w1", w1.data(), w1.size());
    add("b1", b1.data(), b1.size());
    add("w2", w2.data(), w2.size());
    add("b2", b2.data(), b2.size());
    add("w3", w3.data(), w3.size());
    add("b3", b3.data(), b3.size());
    return out;
  }

  std::vector<std::pair<std::string, std::span<const double>>> tensors() const {
    std::vector<std::pair<std::string, std::span<const double>>> out;
    for (auto& [n, s] : const_cast<ScorerParams*>(this)->tensors()) out.emplace_back(n, s);
    return out;
  }

  ScorerParams zeros_like() const {
    ScorerParams z;
    z.attention = Eigen::VectorXd::Zero(attention.size());
    z.fl_table = Eigen::MatrixXd::Zero(fl_table.rows(), fl_table.cols());
    z.w1 = Eigen::MatrixXd::Zero(w1.rows(), w1.cols());
    z.b1 = Eigen::VectorXd::Zero(b1.size());
    z.w2 = Eigen::MatrixXd::Zero(w2.rows(), w2.cols());
    z.b2 = Eigen::VectorXd::Zero(b2.size());
    z.w3 = Eigen::MatrixXd::Zero(w3.rows(), w3.cols());
    z.b3 = Eigen::VectorXd::Zero(b3.size());
    return z;
  }

  bool all_finite() const {
    for (const auto& [_, t] : tensors())
      for (double v : t)
        if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Encoded pair ready for feature assembly. Joint modes fill `pair`, sts
/// fills `single_a` / `single_b`. fl_bin is -1 when FL is unused.
struct PairInput {
  PairEncoding pair;
  SingleEncoding single_a;
  SingleEncoding single_b;
  int fl_bin = -1;
  double label = 0;
};

struct Forward {
  Eigen::MatrixXd x;   // in x B
  Eigen::MatrixXd z1;  // h1 x B
  Eigen::MatrixXd h1;
  Eigen::MatrixXd z2;
  Eigen::MatrixXd h2;
  Eigen::RowVectorXd z3;
  Eigen::RowVectorXd p;
  // Pooled mention vectors per sample (cdcr): needed for the product block.
  std::vector<Eigen::VectorXd> m_a, m_b;
};

constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy with predictions clamped to
/// [1e-7, 1 - 1e-7].
inline double bce_loss(std::span<const double> predictions, std::span<const double> labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw ValidationError("bce_loss needs equally sized, non-empty inputs");
  }
  double s = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], kProbClamp, 1.0 - kProbClamp);
    s -= labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(predictions.size());
}

/// Feedforward pair scorer: in -> h1 -> h2 -> 1, ReLU on hidden layers,
/// sigmoid output.
class PairScorer {
 public:
  PairScorer() = default;

  PairScorer(ArchMode mode, int dim, const TrainConfig& cfg) : mode_(mode), dim_(dim) {
    cfg.validate();
    embed_dim_ = mode.use_fl ? cfg.fl.embed_dim : 0;
    const int in = feature_width(mode, dim, embed_dim_);
    auto he = [&](Eigen::MatrixXd& w, int rows, int cols, const char* salt) {
      Random rng(derive_seed(cfg.seed, salt));
      const double sd = std::sqrt(2.0 / cols);
      w.resize(rows, cols);
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = sd * rng.normal();
    };
    he(params_.w1, cfg.hidden1, in, "w1");
    he(params_.w2, cfg.hidden2, cfg.hidden1, "w2");
    he(params_.w3, 1, cfg.hidden2, "w3");
    params_.b1 = Eigen::VectorXd::Zero(cfg.hidden1);
    params_.b2 = Eigen::VectorXd::Zero(cfg.hidden2);
    params_.b3 = Eigen::VectorXd::Zero(1);
    if (mode.kind == ArchKind::kCdcr) params_.attention = Eigen::VectorXd::Zero(dim);
    if (mode.use_fl) params_.fl_table = FlEmbeddingTable::init(cfg.fl, cfg.seed).table;
  }

  PairScorer(ArchMode mode, int dim, ScorerParams params)
      : mode_(mode), dim_(dim), params_(std::move(params)) {
    embed_dim_ = mode.use_fl ? static_cast<int>(params_.fl_table.cols()) : 0;
    check_shapes();
  }

  ArchMode mode() const { return mode_; }
  int dim() const { return dim_; }
  int input_width() const { return feature_width(mode_, dim_, embed_dim_); }
  int n_bins() const { return static_cast<int>(params_.fl_table.rows()); }
  const ScorerParams& params() const { return params_; }
  ScorerParams& params() { return params_; }

  void check_shapes() const {
    const int in = input_width();
    const auto& p = params_;
    const bool ok = p.w1.cols() == in && p.b1.size() == p.w1.rows() && p.w2.cols() == p.w1.rows() &&
                    p.b2.size() == p.w2.rows() && p.w3.rows() == 1 && p.w3.cols() == p.w2.rows() &&
                    p.b3.size() == 1 &&
                    (mode_.kind == ArchKind::kCdcr ? p.attention.size() == dim_ : p.attention.size() == 0) &&
                    (mode_.use_fl ? p.fl_table.rows() >= 2 : p.fl_table.size() == 0);
    if (!ok) throw ValidationError("scorer parameter shapes do not match the architecture");
  }

  /// Builds the model input for one record pair (encodes through `enc`).
  PairInput make_input(const Encoder& enc, const Record& a, const Record& b, double label = 0) const {
    PairInput in;
    if (mode_.joint()) {
      in.pair = encode_pair(enc, a, b);
    } else {
      in.single_a = encode_single(enc, a);
      in.single_b = encode_single(enc, b);
    }
    if (mode_.use_fl) in.fl_bin = fl_bin(fl_similarity(a.fl_code, b.fl_code), n_bins());
    in.label = label;
    return in;
  }

  /// Feature vector for one input (also returns pooled vectors in cdcr mode).
  Eigen::VectorXd features(const PairInput& in, Eigen::VectorXd* m_a = nullptr,
                           Eigen::VectorXd* m_b = nullptr) const {
    Eigen::VectorXd x(input_width());
    Eigen::Index off = 0;
    auto put = [&](const Eigen::VectorXd& v) {
      if (v.size() != dim_) throw ValidationError("encoding width does not match scorer dim");
      x.segment(off, dim_) = v;
      off += dim_;
    };
    switch (mode_.kind) {
      case ArchKind::kCdcr: {
        Eigen::VectorXd a = attention_pool(in.pair.tokens_a, params_.attention);
        Eigen::VectorXd b = attention_pool(in.pair.tokens_b, params_.attention);
        put(in.pair.cls);
        put(a);
        put(b);
        put(a.cwiseProduct(b));
        if (m_a) *m_a = std::move(a);
        if (m_b) *m_b = std::move(b);
        break;
      }
      case ArchKind::kNli:
        put(in.pair.cls);
        break;
      case ArchKind::kSts:
        put(in.single_a.summary);
        put(in.single_b.summary);
        put(in.single_a.summary.cwiseProduct(in.single_b.summary));
        break;
    }
    if (mode_.use_fl) {
      if (in.fl_bin < 0 || in.fl_bin >= n_bins()) throw ValidationError("FL bin out of range");
      x.segment(off, embed_dim_) = params_.fl_table.row(in.fl_bin).transpose();
    }
    return x;
  }

  Forward forward(std::span<const PairInput* const> batch) const {
    Forward f;
    const auto n = static_cast<Eigen::Index>(batch.size());
    f.x.resize(input_width(), n);
    if (mode_.kind == ArchKind::kCdcr) {
      f.m_a.resize(batch.size());
      f.m_b.resize(batch.size());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      f.x.col(i) = mode_.kind == ArchKind::kCdcr ? features(*batch[k], &f.m_a[k], &f.m_b[k])
                                                 : features(*batch[k]);
    }
    f.z1 = (params_.w1 * f.x).colwise() + params_.b1;
    f.h1 = f.z1.cwiseMax(0.0);
    f.z2 = (params_.w2 * f.h1).colwise() + params_.b2;
    f.h2 = f.z2.cwiseMax(0.0);
    f.z3 = (params_.w3 * f.h2).array() + params_.b3[0];
    f.p = (1.0 / (1.0 + (-f.z3.array()).exp())).matrix();
    if (!f.p.allFinite() || !f.h2.allFinite()) {
      throw DivergenceError("non-finite activations in the pair scorer");
    }
    return f;
  }

  /// Probabilities for a set of inputs, evaluated in chunks.
  std::vector<double> predict(std::span<const PairInput> inputs, std::size_t chunk = 256) const {
    std::vector<double> out;
    out.reserve(inputs.size());
    std::vector<const PairInput*> ptrs;
    for (std::size_t s = 0; s < inputs.size(); s += chunk) {
      ptrs.clear();
      for (std::size_t i = s; i < std::min(inputs.size(), s + chunk); ++i) ptrs.push_back(&inputs[i]);
      const auto f = forward(ptrs);
      for (Eigen::Index i = 0; i < f.p.size(); ++i) out.push_back(f.p[i]);
    }
    return out;
  }

  double predict_one(const PairInput& in) const {
    const PairInput* p = &in;
    return forward(std::span<const PairInput* const>(&p, 1)).p[0];
  }

  /// Mean BCE over the batch and its exact gradient with respect to every
  /// trainable tensor. Encodings are constants.
  double loss_and_grad(std::span<const PairInput* const> batch, ScorerParams& grad) const {
    const auto f = forward(batch);
    const auto n = static_cast<Eigen::Index>(batch.size());
    std::vector<double> preds(batch.size()), labels(batch.size());
    Eigen::RowVectorXd dz3(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      preds[k] = f.p[i];
      labels[k] = batch[k]->label;
      const bool clamped = f.p[i] < kProbClamp || f.p[i] > 1.0 - kProbClamp;
      dz3[i] = clamped ? 0.0 : (f.p[i] - labels[k]) / static_cast<double>(n);
    }
    const double loss = bce_loss(preds, labels);
    if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");

    grad = params_.zeros_like();
    grad.w3 = dz3 * f.h2.transpose();
    grad.b3[0] = dz3.sum();
    const Eigen::MatrixXd dz2 =
        ((params_.w3.transpose() * dz3).array() * (f.z2.array() > 0).cast<double>()).matrix();
    grad.w2 = dz2 * f.h1.transpose();
    grad.b2 = dz2.rowwise().sum();
    const Eigen::MatrixXd dz1 =
        ((params_.w2.transpose() * dz2).array() * (f.z1.array() > 0).cast<double>()).matrix();
    grad.w1 = dz1 * f.x.transpose();
    grad.b1 = dz1.rowwise().sum();

    // Only the pooled blocks and the FL block reach trainable tensors.
    const bool cdcr = mode_.kind == ArchKind::kCdcr;
    if (!cdcr && !mode_.use_fl) return loss;
    const Eigen::Index text_width = input_width() - embed_dim_;
    const Eigen::Index from = cdcr ? dim_ : text_width;
    const Eigen::MatrixXd dx = params_.w1.middleCols(from, input_width() - from).transpose() * dz1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (cdcr) {
        const auto g_a = dx.col(i).segment(0, dim_);
        const auto g_b = dx.col(i).segment(dim_, dim_);
        const auto g_ab = dx.col(i).segment(2 * dim_, dim_);
        const Eigen::VectorXd up_a = g_a + g_ab.cwiseProduct(f.m_b[k]);
        const Eigen::VectorXd up_b = g_b + g_ab.cwiseProduct(f.m_a[k]);
        grad.attention += attention_pool_grad(batch[k]->pair.tokens_a, params_.attention, up_a);
        grad.attention += attention_pool_grad(batch[k]->pair.tokens_b, params_.attention, up_b);
      }
      if (mode_.use_fl) {
        grad.fl_table.row(batch[k]->fl_bin) +=
            dx.col(i).segment(text_width - from, embed_dim_).transpose();
      }
    }
    return loss;
  }

  double loss(std::span<const PairInput> inputs) const {
    const auto p = predict(inputs);
    std::vector<double> y;
    y.reserve(inputs.size());
    for (const auto& in : inputs) y.push_back(in.label);
    return bce_loss(p, y);
  }

 private:
  ArchMode mode_;
  int dim_ = 0;
  int embed_dim_ = 0;
  ScorerParams params_;
};

// --- optimizer -----------------------------------------------------------------------

/// Adam with decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
class AdamW {
 public:
  AdamW(const ScorerParams& like, const TrainConfig& cfg)
      : cfg_(cfg), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ScorerParams& params, const ScorerParams& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto ps = params.tensors();
    const auto gs = grad.tensors();
    auto ms = m_.tensors();
    auto vs = v_.tensors();
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto p = ps[k].second;
      const auto g = gs[k].second;
      auto m = ms[k].second;
      auto v = vs[k].second;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.epsilon) + cfg_.weight_decay * p[i]);
      }
    }
  }

 private:
  TrainConfig cfg_;
  ScorerParams m_, v_;
  std::int64_t t_ = 0;
};

// --- threshold selection ------------------------------------------------------------

/// Cut point (predict positive when score >= cut) maximizing binary F1 over
/// all distinct scores; ties go to the lowest cut.
inline double select_threshold(std::span<const double> scores, std::span<const int> labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw ValidationError("select_threshold needs equally sized, non-empty inputs");
  }
  std::size_t total_pos = 0;
  for (int y : labels) total_pos += y != 0;
  if (total_pos == 0 || total_pos == labels.size()) {
    throw ValidationError("select_threshold needs both classes in the development pairs");
  }
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double best_f1 = -1, best_cut = scores[order.front()];
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double cut = scores[order[i]];
    while (i < order.size() && scores[order[i]] == cut) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    const double p = tp / (tp + fp);
    const double r = tp / static_cast<double>(total_pos);
    const double f1 = harmonic(p, r);
    if (f1 >= best_f1) {  // descending sweep: ">=" keeps the lowest cut on ties
      best_f1 = f1;
      best_cut = cut;
    }
  }
  return best_cut;
}

// --- checkpoints ----------------------------------------------------------------------

struct Checkpoint {
  PairScorer scorer;
  EncoderFingerprint encoder;
  double dev_loss = 0;
  int epoch = 0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  void require_encoder(const EncoderFingerprint& fp) const {
    if (!(fp == encoder)) {
      throw ConfigError("checkpoint was trained with encoder " + encoder.backend + "/" +
                        encoder.model_id + " (dim " + std::to_string(encoder.dim) +
                        ") but " + fp.backend + "/" + fp.model_id + " (dim " +
                        std::to_string(fp.dim) + ") is configured");
    }
  }
};

inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'C', 'K', 'P', 'T', '\0', '\1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: 8-byte magic, u32 version, u64 header length, JSON header
/// (architecture, encoder fingerprint, training metadata and the tensor
/// table), then the tensors as little-endian float64, column-major.
inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto& params = ck.scorer.params();
  nlohmann::ordered_json h;
  h["format"] = "shiftlink-checkpoint";
  h["version"] = kCheckpointVersion;
  h["arch"] = {{"kind", to_string(ck.scorer.mode().kind)}, {"use_fl", ck.scorer.mode().use_fl},
               {"dim", ck.scorer.dim()}};
  h["encoder"] = {{"backend", ck.encoder.backend}, {"dim", ck.encoder.dim},
                  {"model_id", ck.encoder.model_id}};
  h["dev_loss"] = ck.dev_loss;
  h["epoch"] = ck.epoch;
  h["metadata"] = ck.metadata;
  auto shape_of = [&](const std::string& name) -> std::pair<Eigen::Index, Eigen::Index> {
    if (name == "attention") return {params.attention.size(), 1};
    if (name == "fl_table") return {params.fl_table.rows(), params.fl_table.cols()};
    if (name == "w1") return {params.w1.rows(), params.w1.cols()};
    if (name == "b1") return {params.b1.size(), 1};
    if (name == "w2") return {params.w2.rows(), params.w2.cols()};
    if (name == "b2") return {params.b2.size(), 1};
    if (name == "w3") return {params.w3.rows(), params.w3.cols()};
    return {params.b3.size(), 1};
  };
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  const auto tensors = params.tensors();
  for (const auto& [name, data] : tensors) {
    const auto [r, c] = shape_of(name);
    table.push_back({{"name", name}, {"shape", {r, c}}, {"offset", offset}, {"count", data.size()}});
    offset += data.size();
  }
  h["tensors"] = table;
  const std::string header = h.dump();

  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  auto put_le = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put_le(kCheckpointVersion, 4);
  put_le(header.size(), 8);
  out += header;
  out.reserve(out.size() + offset * 8);
  for (const auto& [_, data] : tensors) {
    for (double d : data) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      put_le(bits, 8);
    }
  }
  return out;
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  auto bad = [](const std::string& why) -> ValidationError {
    return ValidationError("invalid checkpoint: " + why);
  };
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) throw bad("bad magic");
  auto get_le = [&](std::size_t pos, int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    return v;
  };
  const auto version = get_le(8, 4);
  if (version != kCheckpointVersion) throw bad("unsupported version " + std::to_string(version));
  const auto hlen = get_le(12, 8);
  if (20 + hlen > bytes.size()) throw bad("truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(20, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
  const std::size_t data_start = 20 + hlen;
  try {
    ArchMode mode{arch_kind_from_string(h.at("arch").at("kind").get<std::string>()),
                  h.at("arch").at("use_fl").get<bool>()};
    const int dim = h.at("arch").at("dim").get<int>();
    ScorerParams p;
    for (const auto& t : h.at("tensors")) {
      const auto name = t.at("name").get<std::string>();
      const auto r = t.at("shape")[0].get<Eigen::Index>();
      const auto c = t.at("shape")[1].get<Eigen::Index>();
      const auto off = t.at("offset").get<std::uint64_t>();
      const auto count = t.at("count").get<std::uint64_t>();
      if (static_cast<std::uint64_t>(r * c) != count) throw bad("shape/count mismatch for " + name);
      if (data_start + (off + count) * 8 > bytes.size()) throw bad("truncated tensor " + name);
      Eigen::MatrixXd m(r, c);
      for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t bits = get_le(data_start + (off + i) * 8, 8);
        std::memcpy(m.data() + i, &bits, 8);
      }
      if (name == "attention") p.attention = m.col(0);
      else if (name == "fl_table") p.fl_table = m;
      else if (name == "w1") p.w1 = m;
      else if (name == "b1") p.b1 = m.col(0);
      else if (name == "w2") p.w2 = m;
      else if (name == "b2") p.b2 = m.col(0);
      else if (name == "w3") p.w3 = m;
      else if (name == "b3") p.b3 = m.col(0);
      else throw bad("unknown tensor " + name);
    }
    if (!p.all_finite()) throw bad("non-finite parameters");
    Checkpoint ck{PairScorer(mode, dim, std::move(p)), {}, 0, 0, {}};
    ck.encoder = {h.at("encoder").at("backend").get<std::string>(), h.at("encoder").at("dim").get<int>(),
                  h.at("encoder").at("model_id").get<std::string>()};
    ck.dev_loss = h.at("dev_loss").get<double>();
    ck.epoch = h.at("epoch").get<int>();
    ck.metadata = nlohmann::ordered_json::parse(h.at("metadata").dump());
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw bad(e.what());
  }
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file(path));
}

// --- training -------------------------------------------------------------------------

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // full pass over the training sample after the epoch
  double dev_loss = 0;
  double dev_f1 = 0;         // at the F1-best threshold
  double dev_threshold = 0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochLog> log;
};

/// Trains on window-grouped inputs. Each epoch shuffles the window order and
/// the pairs inside each window, then walks fixed-size batches. The returned
/// checkpoint is the epoch with the lowest development loss.
inline TrainResult train(const std::vector<std::vector<PairInput>>& train_windows,
                         const std::vector<PairInput>& dev, PairScorer scorer,
                         const EncoderFingerprint& encoder, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  std::vector<const PairInput*> all_train;
  for (const auto& w : train_windows)
    for (const auto& in : w) all_train.push_back(&in);
  if (all_train.empty()) throw ValidationError("training sample is empty");
  if (dev.empty()) throw ValidationError("development sample is empty");
  std::vector<int> dev_labels;
  for (const auto& d : dev) dev_labels.push_back(d.label > 0.5);

  AdamW opt(scorer.params(), cfg);
  TrainResult result;
  ScorerParams grad;
  std::optional<ScorerParams> best_params;
  double best_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Random rng(derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
    std::vector<std::size_t> order(train_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<const PairInput*> stream;
    for (auto w : order) {
      std::vector<const PairInput*> local;
      for (const auto& in : train_windows[w]) local.push_back(&in);
      rng.shuffle(local);
      stream.insert(stream.end(), local.begin(), local.end());
    }
    for (std::size_t s = 0; s < stream.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
      const auto e = std::min(stream.size(), s + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const PairInput* const> batch(stream.data() + s, e - s);
      try {
        scorer.loss_and_grad(batch, grad);
      } catch (const DivergenceError& err) {
        throw DivergenceError(std::string(err.what()) + " (epoch " + std::to_string(epoch) +
                              ", batch starting at " + std::to_string(s) + ")");
      }
      opt.step(scorer.params(), grad);
    }
    if (!scorer.params().all_finite()) {
      throw DivergenceError("parameters became non-finite in epoch " + std::to_string(epoch));
    }

    EpochLog log;
    log.epoch = epoch;
    {
      double sum = 0;
      for (std::size_t s = 0; s < all_train.size(); s += 256) {
        const auto e = std::min(all_train.size(), s + 256);
        const auto f = scorer.forward(std::span<const PairInput* const>(all_train.data() + s, e - s));
        std::vector<double> p(f.p.data(), f.p.data() + f.p.size()), y;
        for (std::size_t i = s; i < e; ++i) y.push_back(all_train[i]->label);
        sum += bce_loss(p, y) * static_cast<double>(e - s);
      }
      log.train_loss = sum / static_cast<double>(all_train.size());
    }
    const auto dev_pred = scorer.predict(dev);
    std::vector<double> dev_y(dev_labels.begin(), dev_labels.end());
    log.dev_loss = bce_loss(dev_pred, dev_y);
    if (!std::isfinite(log.dev_loss) || !std::isfinite(log.train_loss)) {
      throw DivergenceError("non-finite loss after epoch " + std::to_string(epoch));
    }
    bool both = false;
    for (int y : dev_labels) both |= y != dev_labels.front();
    if (both) {
      log.dev_threshold = select_threshold(dev_pred, dev_labels);
      log.dev_f1 = binary_prf(dev_pred, dev_labels, log.dev_threshold).f1;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.dev_loss < best_loss) {
      best_loss = log.dev_loss;
      best_params = scorer.params();
      result.best.epoch = epoch;
      result.best.dev_loss = log.dev_loss;
    }
  }
  result.best.scorer = PairScorer(scorer.mode(), scorer.dim(), std::move(*best_params));
  result.best.encoder = encoder;
  return result;
}

/// Scores every inference candidate of a window (forward pairs within the
/// gap limit).
inline PairScores score_matrix(const Checkpoint& ck, const Encoder& enc, const Corpus& corpus,
                               const SubtopicWindow& window, double max_gap_hours) {
  ck.require_encoder(enc.fingerprint());
  const auto cands = candidate_pairs_for_inference(corpus, window, max_gap_hours);
  PairScores out;
  std::vector<PairInput> inputs;
  const std::size_t chunk = 256;
  for (std::size_t s = 0; s < cands.size(); s += chunk) {
    const auto e = std::min(cands.size(), s + chunk);
    inputs.clear();
    for (std::size_t i = s; i < e; ++i) {
      try {
        inputs.push_back(ck.scorer.make_input(enc, corpus.record(cands[i].first),
                                              corpus.record(cands[i].second)));
      } catch (const RemoteError& err) {
        throw RemoteError("encoding pair (" + cands[i].first + ", " + cands[i].second +
                              "): " + err.what(),
                          err.retryable());
      }
    }
    const auto p = ck.scorer.predict(inputs);
    for (std::size_t i = s; i < e; ++i) out[cands[i]] = p[i - s];
  }
  return out;
}

}  // namespace shiftlink
