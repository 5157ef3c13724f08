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

#include <chrono>
#include <cmath>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro that
// collides with Eigen parameter names.
#include <Eigen/Dense>
#include <httplib.h>
#include <json.hpp>

#include "shiftlink/encoding.hpp"
#include "shiftlink/error.hpp"

namespace shiftlink {

// Wire format shared with the encoder service:
//   POST /v1/encode-pair   {text_a, text_b, max_tokens}
//     -> {dim, cls, tokens_a, tokens_b, truncated_a, truncated_b, model_id}
//   POST /v1/encode-single {text, max_tokens}
//     -> {dim, summary, tokens, model_id}

namespace wire {

inline nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json matrix_to_json(const TokenMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, int dim, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw RemoteError(std::string("response field '") + what + "' does not have dim entries", false);
  }
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw RemoteError(std::string("non-numeric entry in '") + what + "'", false);
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw RemoteError(std::string("non-finite entry in '") + what + "'", false);
  }
  return v;
}

inline TokenMatrix matrix_from_json(const nlohmann::json& j, int dim, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw RemoteError(std::string("response field '") + what + "' must be a non-empty array", false);
  }
  TokenMatrix m(static_cast<Eigen::Index>(j.size()), dim);
  for (std::size_t r = 0; r < j.size(); ++r) {
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r], dim, what).transpose();
  }
  return m;
}

inline int check_dim(const nlohmann::json& j, int expected_dim) {
  if (!j.contains("dim") || !j["dim"].is_number_integer()) {
    throw RemoteError("response lacks integer 'dim'", false);
  }
  const int dim = j["dim"].get<int>();
  if (dim != expected_dim) {
    throw RemoteError("remote encoder dim " + std::to_string(dim) +
                          " does not match configured dim " + std::to_string(expected_dim),
                      false);
  }
  return dim;
}

inline nlohmann::json pair_request(std::string_view a, std::string_view b, int max_tokens) {
  return {{"text_a", a}, {"text_b", b}, {"max_tokens", max_tokens}};
}

inline nlohmann::json single_request(std::string_view text, int max_tokens) {
  return {{"text", text}, {"max_tokens", max_tokens}};
}

inline nlohmann::json pair_response(const PairEncoding& e, const std::string& model_id) {
  return {{"dim", e.cls.size()},
          {"cls", vector_to_json(e.cls)},
          {"tokens_a", matrix_to_json(e.tokens_a)},
          {"tokens_b", matrix_to_json(e.tokens_b)},
          {"truncated_a", e.truncated_a},
          {"truncated_b", e.truncated_b},
          {"model_id", model_id}};
}

inline nlohmann::json single_response(const SingleEncoding& e, const std::string& model_id) {
  return {{"dim", e.summary.size()},
          {"summary", vector_to_json(e.summary)},
          {"tokens", matrix_to_json(e.tokens)},
          {"model_id", model_id}};
}

inline PairEncoding parse_pair_response(const nlohmann::json& j, int expected_dim) {
  const int dim = check_dim(j, expected_dim);
  PairEncoding e;
  e.cls = vector_from_json(j.value("cls", nlohmann::json()), dim, "cls");
  e.tokens_a = matrix_from_json(j.value("tokens_a", nlohmann::json()), dim, "tokens_a");
  e.tokens_b = matrix_from_json(j.value("tokens_b", nlohmann::json()), dim, "tokens_b");
  e.truncated_a = j.value("truncated_a", false);
  e.truncated_b = j.value("truncated_b", false);
  return e;
}

inline SingleEncoding parse_single_response(const nlohmann::json& j, int expected_dim) {
  const int dim = check_dim(j, expected_dim);
  SingleEncoding e;
  e.summary = vector_from_json(j.value("summary", nlohmann::json()), dim, "summary");
  e.tokens = matrix_from_json(j.value("tokens", nlohmann::json()), dim, "tokens");
  return e;
}

}  // namespace wire

/// HTTP client for the encoder service. Thread-safe; at most
/// config.max_in_flight requests are outstanding at any time.
class RemoteEncoder final : public Encoder {
 public:
  explicit RemoteEncoder(EncoderConfig cfg)
      : cfg_(std::move(cfg)), slots_(std::max(1, cfg_.max_in_flight)) {
    cfg_.backend = EncoderBackend::kRemote;
    cfg_.validate();
  }

  PairEncoding encode_pair(std::string_view a, std::string_view b) const override {
    if (normalize_whitespace(a).empty() || normalize_whitespace(b).empty()) {
      throw ValidationError("cannot encode empty text");
    }
    const auto j = post("/v1/encode-pair", wire::pair_request(a, b, cfg_.max_tokens));
    auto e = wire::parse_pair_response(j, cfg_.dim);
    remember_model(j);
    return e;
  }

  SingleEncoding encode_single(std::string_view text) const override {
    if (normalize_whitespace(text).empty()) throw ValidationError("cannot encode empty text");
    const auto j = post("/v1/encode-single", wire::single_request(text, cfg_.max_tokens));
    auto e = wire::parse_single_response(j, cfg_.dim);
    remember_model(j);
    return e;
  }

  /// The model id is learned from the health endpoint the first time it is
  /// needed.
  EncoderFingerprint fingerprint() const override {
    std::lock_guard lock(model_mu_);
    if (model_id_.empty()) {
      fetch_health_locked();
    }
    return {"remote", cfg_.dim, model_id_};
  }

 private:
  void fetch_health_locked() const {
    httplib::Client cli(cfg_.remote_url);
    set_timeouts(cli);
    auto res = cli.Get("/v1/health");
    if (!res) throw RemoteError("encoder service unreachable at " + cfg_.remote_url, true);
    if (res->status != 200) {
      throw RemoteError("health check returned HTTP " + std::to_string(res->status),
                        res->status >= 500);
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      wire::check_dim(j, cfg_.dim);
      model_id_ = j.at("model_id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw RemoteError(std::string("malformed health response: ") + e.what(), false);
    }
  }

  void remember_model(const nlohmann::json& j) const {
    if (!j.contains("model_id") || !j["model_id"].is_string()) return;
    std::lock_guard lock(model_mu_);
    if (model_id_.empty()) model_id_ = j["model_id"].get<std::string>();
  }

  void set_timeouts(httplib::Client& cli) const {
    const auto t = std::chrono::milliseconds(cfg_.timeout_ms);
    cli.set_connection_timeout(t);
    cli.set_read_timeout(t);
    cli.set_write_timeout(t);
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    struct Slot {
      std::counting_semaphore<>& s;
      explicit Slot(std::counting_semaphore<>& sem) : s(sem) { s.acquire(); }
      ~Slot() { s.release(); }
    } slot(slots_);

    const std::string payload = body.dump();
    for (int attempt = 0;; ++attempt) {
      try {
        return post_once(path, payload);
      } catch (const RemoteError& e) {
        if (!e.retryable() || attempt >= cfg_.max_retries) throw;
      }
    }
  }

  nlohmann::json post_once(const std::string& path, const std::string& payload) const {
    httplib::Client cli(cfg_.remote_url);
    set_timeouts(cli);
    auto res = cli.Post(path, payload, "application/json");
    if (!res) {
      throw RemoteError("encoder service unreachable at " + cfg_.remote_url + path + " (" +
                            httplib::to_string(res.error()) + ")",
                        true);
    }
    if (res->status != 200) {
      throw RemoteError(path + " returned HTTP " + std::to_string(res->status),
                        res->status >= 500);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw RemoteError(path + ": malformed response: " + e.what(), false);
    }
  }

  EncoderConfig cfg_;
  mutable std::counting_semaphore<> slots_;
  mutable std::mutex model_mu_;
  mutable std::string model_id_;
};

inline std::unique_ptr<Encoder> make_encoder(const EncoderConfig& cfg) {
  if (cfg.backend == EncoderBackend::kRemote) return std::make_unique<RemoteEncoder>(cfg);
  return std::make_unique<BuiltinEncoder>(cfg);
}

}  // namespace shiftlink
