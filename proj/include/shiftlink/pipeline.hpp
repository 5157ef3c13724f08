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
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "shiftlink/clustering.hpp"
#include "shiftlink/corpus.hpp"
#include "shiftlink/encoding.hpp"
#include "shiftlink/metrics.hpp"
#include "shiftlink/pairgen.hpp"
#include "shiftlink/remote_encoder.hpp"
#include "shiftlink/scorer.hpp"

namespace shiftlink {

inline constexpr const char* kVersion = "0.3.0";

// --- configuration ---------------------------------------------------------------

struct RunConfig {
  std::uint64_t seed = 0;
  bool has_seed = false;
  struct Paths {
    std::string records, chains, splits, checkpoint, tuning, predictions, report;
  } paths;
  EncoderConfig encoder;
  ArchMode arch;
  TrainConfig train;
  SamplingConfig sampling;
  SplitPolicy split;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kTdfs;
  double stride_fraction = 0.5;
  std::optional<double> max_gap_hours;  // unset: per-topic between-records Q3
  std::optional<double> window_hours;   // unset: per-topic rule
  int jobs = 1;

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
      if (!j.contains("seed") || !j["seed"].is_number_unsigned()) {
        throw ConfigError("config needs a non-negative integer 'seed'");
      }
      c.seed = j["seed"].get<std::uint64_t>();
      c.has_seed = true;
      const auto paths = j.value("paths", nlohmann::json::object());
      c.paths.records = paths.value("records", "");
      c.paths.chains = paths.value("chains", "");
      c.paths.splits = paths.value("splits", "");
      c.paths.checkpoint = paths.value("checkpoint", "");
      c.paths.tuning = paths.value("tuning", "");
      c.paths.predictions = paths.value("predictions", "");
      c.paths.report = paths.value("report", "");
      const auto enc = j.value("encoder", nlohmann::json::object());
      c.encoder.backend = encoder_backend_from_string(enc.value("backend", "builtin"));
      c.encoder.dim = enc.value("dim", c.encoder.dim);
      c.encoder.max_tokens = enc.value("max_tokens", c.encoder.max_tokens);
      c.encoder.per_record_budget = enc.value("per_record_budget", 0);
      c.encoder.seed = enc.value("seed", std::uint64_t{0});
      c.encoder.remote_url = enc.value("remote_url", "");
      c.encoder.timeout_ms = enc.value("timeout_ms", c.encoder.timeout_ms);
      c.encoder.max_in_flight = enc.value("max_in_flight", c.encoder.max_in_flight);
      c.encoder.max_retries = enc.value("max_retries", c.encoder.max_retries);
      const auto arch = j.value("arch", nlohmann::json::object());
      c.arch.kind = arch_kind_from_string(arch.value("kind", "cdcr"));
      c.arch.use_fl = arch.value("use_fl", true);
      const auto tr = j.value("train", nlohmann::json::object());
      c.train.learning_rate = tr.value("learning_rate", c.train.learning_rate);
      c.train.weight_decay = tr.value("weight_decay", c.train.weight_decay);
      c.train.epsilon = tr.value("epsilon", c.train.epsilon);
      c.train.beta1 = tr.value("beta1", c.train.beta1);
      c.train.beta2 = tr.value("beta2", c.train.beta2);
      c.train.epochs = tr.value("epochs", c.train.epochs);
      c.train.batch_size = tr.value("batch_size", c.train.batch_size);
      c.train.hidden1 = tr.value("hidden1", c.train.hidden1);
      c.train.hidden2 = tr.value("hidden2", c.train.hidden2);
      c.train.fl.n_bins = tr.value("fl_bins", c.train.fl.n_bins);
      c.train.fl.embed_dim = tr.value("fl_embed_dim", c.train.fl.embed_dim);
      c.train.seed = derive_seed(c.seed, "train");
      const auto sm = j.value("sampling", nlohmann::json::object());
      c.sampling.train_neg_ratio = sm.value("train_neg_ratio", c.sampling.train_neg_ratio);
      c.sampling.dev_neg_ratio = sm.value("dev_neg_ratio", c.sampling.dev_neg_ratio);
      c.sampling.seed = derive_seed(c.seed, "sampling");
      const auto sp = j.value("split", nlohmann::json::object());
      c.split.test_quota = sp.value("test_quota", c.split.test_quota);
      const auto cl = j.value("clustering", nlohmann::json::object());
      c.algorithm = cluster_algorithm_from_string(cl.value("algorithm", "tdfs"));
      c.stride_fraction = cl.value("stride_fraction", c.stride_fraction);
      if (cl.contains("max_gap_hours") && !cl["max_gap_hours"].is_null()) {
        c.max_gap_hours = cl["max_gap_hours"].get<double>();
      }
      if (cl.contains("window_hours") && !cl["window_hours"].is_null()) {
        c.window_hours = cl["window_hours"].get<double>();
      }
      c.jobs = j.value("jobs", 1);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid run config: ") + e.what());
    }
    c.encoder.validate();
    c.train.validate();
    if (c.sampling.train_neg_ratio < 1 || c.sampling.dev_neg_ratio < 1) {
      throw ConfigError("sampling ratios must be at least 1");
    }
    if (!(c.stride_fraction > 0 && c.stride_fraction <= 1)) {
      throw ConfigError("stride_fraction must lie in (0, 1]");
    }
    if (c.jobs < 1) throw ConfigError("jobs must be positive");
    return c;
  }
};

/// Applies "a.b.c=value" overrides to a JSON config. Values are parsed as
/// JSON when possible, otherwise taken as strings.
inline void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const auto key = assignment.substr(0, eq);
  const auto raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    if (!(*node)[part].is_object()) (*node)[part] = nlohmann::json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

// --- per-topic geometry --------------------------------------------------------------

struct TopicGeometry {
  double window_hours = 0;
  double max_gap_hours = 0;
};

/// Window size and link gap limit per topic. Topics without chain
/// statistics use `fallback` (mean over topics).
struct Geometry {
  std::map<std::string, TopicGeometry> topics;
  TopicGeometry fallback;

  const TopicGeometry& for_topic(const std::string& topic) const {
    auto it = topics.find(topic);
    return it == topics.end() ? fallback : it->second;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["fallback"] = {{"window_hours", fallback.window_hours}, {"max_gap_hours", fallback.max_gap_hours}};
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [k, g] : topics) t[k] = {{"window_hours", g.window_hours}, {"max_gap_hours", g.max_gap_hours}};
    j["topics"] = t;
    return j;
  }

  static Geometry from_json(const nlohmann::json& j) {
    Geometry g;
    g.fallback = {j.at("fallback").at("window_hours").get<double>(),
                  j.at("fallback").at("max_gap_hours").get<double>()};
    for (const auto& [k, v] : j.at("topics").items()) {
      g.topics[k] = {v.at("window_hours").get<double>(), v.at("max_gap_hours").get<double>()};
    }
    return g;
  }
};

inline Geometry compute_geometry(const Corpus& gold_corpus, const RunConfig& cfg) {
  std::map<std::string, TimeStats> stats;
  for (const auto& topic : gold_corpus.topic_ids()) {
    try {
      stats[topic] = compute_time_stats(gold_corpus, topic);
    } catch (const ValidationError&) {
      // topic without multi-record chains: falls back below
    }
  }
  if (stats.empty()) throw ValidationError("no topic has chain statistics");
  std::vector<TimeStats> all;
  double gap_sum = 0;
  for (const auto& [_, s] : stats) {
    all.push_back(s);
    gap_sum += s.between_records_hours_q3;
  }
  Geometry g;
  double window_sum = 0;
  for (const auto& s : all) window_sum += s.full_chain_hours_q3;
  g.fallback.window_hours = window_sum / static_cast<double>(all.size());
  g.fallback.max_gap_hours = gap_sum / static_cast<double>(all.size());
  for (const auto& [topic, s] : stats) {
    g.topics[topic] = {window_size_for_topic(s, all), s.between_records_hours_q3};
  }
  auto fix = [&](TopicGeometry& t) {
    if (cfg.window_hours) t.window_hours = *cfg.window_hours;
    if (cfg.max_gap_hours) t.max_gap_hours = *cfg.max_gap_hours;
    // Degenerate statistics (all chains within one second) still need a
    // positive window.
    t.window_hours = std::max(t.window_hours, 1.0 / 3600.0);
    t.max_gap_hours = std::max(t.max_gap_hours, 1.0 / 3600.0);
  };
  fix(g.fallback);
  for (auto& [_, t] : g.topics) fix(t);
  return g;
}

inline std::vector<SubtopicWindow> corpus_windows(const Corpus& corpus, const Geometry& geo,
                                                  double stride_fraction) {
  std::vector<SubtopicWindow> out;
  for (const auto& topic : corpus.topic_ids()) {
    auto ws = build_windows(corpus, topic, geo.for_topic(topic).window_hours, stride_fraction);
    out.insert(out.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be
/// written to per-index slots so the outcome does not depend on `jobs`.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// --- data preparation -------------------------------------------------------------------

struct SplitCorpora {
  Corpus train, dev, test;
};

inline SplitCorpora split_corpora(const Corpus& corpus, const DataSplit& split) {
  return {corpus.subset(split.train), corpus.subset(split.dev), corpus.subset(split.test)};
}

/// Sampled labeled pairs of every window of `corpus`, grouped per window.
inline std::vector<std::vector<LabeledPair>> sampled_window_pairs(const Corpus& corpus,
                                                                  const Geometry& geo,
                                                                  const RunConfig& cfg,
                                                                  SampleSplit which) {
  std::vector<std::vector<LabeledPair>> out;
  if (corpus.size() == 0) return out;
  const std::string tag = which == SampleSplit::kTrain ? "train:" : "dev:";
  for (const auto& w : corpus_windows(corpus, geo, cfg.stride_fraction)) {
    const auto all = enumerate_labeled_pairs(w, corpus.gold_chains());
    auto sampled = sample_pairs(all, cfg.sampling, which, tag + w.id());
    bool any_pos = false;
    for (const auto& p : sampled) any_pos |= p.positive;
    if (any_pos) out.push_back(std::move(sampled));
  }
  return out;
}

inline std::vector<PairInput> encode_pairs(const PairScorer& scorer, const Encoder& enc,
                                           const Corpus& corpus, const std::vector<LabeledPair>& pairs,
                                           int jobs) {
  std::vector<PairInput> out(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) {
    out[i] = scorer.make_input(enc, corpus.record(pairs[i].a), corpus.record(pairs[i].b),
                               pairs[i].positive ? 1.0 : 0.0);
  });
  return out;
}

inline std::vector<PairInput> dev_inputs(const PairScorer& scorer, const Encoder& enc,
                                         const Corpus& dev, const Geometry& geo,
                                         const RunConfig& cfg) {
  std::vector<LabeledPair> flat;
  for (auto& w : sampled_window_pairs(dev, geo, cfg, SampleSplit::kDev))
    flat.insert(flat.end(), w.begin(), w.end());
  return encode_pairs(scorer, enc, dev, flat, cfg.jobs);
}

// --- train -------------------------------------------------------------------------------

inline TrainResult run_train(const RunConfig& cfg, const Corpus& corpus, const DataSplit& split,
                             const Encoder& enc,
                             const std::function<void(const EpochLog&)>& on_epoch = {}) {
  const auto geo = compute_geometry(corpus, cfg);
  const auto parts = split_corpora(corpus, split);
  if (parts.train.size() == 0 || parts.dev.size() == 0) {
    throw ValidationError("training needs non-empty train and dev splits");
  }
  PairScorer scorer(cfg.arch, enc.dim(), cfg.train);
  std::vector<std::vector<PairInput>> train_inputs;
  for (const auto& w : sampled_window_pairs(parts.train, geo, cfg, SampleSplit::kTrain)) {
    train_inputs.push_back(encode_pairs(scorer, enc, parts.train, w, cfg.jobs));
  }
  const auto dev = dev_inputs(scorer, enc, parts.dev, geo, cfg);
  auto result = train(train_inputs, dev, std::move(scorer), enc.fingerprint(), cfg.train, on_epoch);
  nlohmann::ordered_json meta;
  meta["seed"] = cfg.seed;
  meta["learning_rate"] = cfg.train.learning_rate;
  meta["weight_decay"] = cfg.train.weight_decay;
  meta["epsilon"] = cfg.train.epsilon;
  meta["epochs"] = cfg.train.epochs;
  meta["batch_size"] = cfg.train.batch_size;
  meta["train_neg_ratio"] = cfg.sampling.train_neg_ratio;
  meta["dev_neg_ratio"] = cfg.sampling.dev_neg_ratio;
  std::size_t n_train = 0;
  for (const auto& w : train_inputs) n_train += w.size();
  meta["train_pairs"] = n_train;
  meta["dev_pairs"] = dev.size();
  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (const auto& e : result.log) {
    log.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev_loss", e.dev_loss},
                   {"dev_f1", e.dev_f1}, {"dev_threshold", e.dev_threshold}});
  }
  meta["log"] = log;
  result.best.metadata = meta;
  return result;
}

// --- tune --------------------------------------------------------------------------------

struct TuneReport {
  double tau0 = 0;
  double dev_f1 = 0;
  double threshold = 0;
  double v_measure = 0;
  std::vector<std::pair<double, double>> sweep;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kTdfs;
  double stride_fraction = 0.5;
  Geometry geometry;

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["tau0"] = tau0;
    j["dev_f1"] = dev_f1;
    j["threshold"] = threshold;
    j["v_measure"] = v_measure;
    nlohmann::ordered_json s = nlohmann::ordered_json::array();
    for (const auto& [t, v] : sweep) s.push_back({{"threshold", t}, {"v_measure", v}});
    j["sweep"] = s;
    j["algorithm"] = to_string(algorithm);
    j["stride_fraction"] = stride_fraction;
    j["geometry"] = geometry.to_json();
    return j.dump(2) + "\n";
  }

  static TuneReport from_json(const std::string& text) {
    TuneReport r;
    try {
      const auto j = nlohmann::json::parse(text);
      r.tau0 = j.at("tau0").get<double>();
      r.dev_f1 = j.at("dev_f1").get<double>();
      r.threshold = j.at("threshold").get<double>();
      r.v_measure = j.at("v_measure").get<double>();
      for (const auto& e : j.at("sweep")) r.sweep.emplace_back(e.at("threshold"), e.at("v_measure"));
      r.algorithm = cluster_algorithm_from_string(j.at("algorithm").get<std::string>());
      r.stride_fraction = j.at("stride_fraction").get<double>();
      r.geometry = Geometry::from_json(j.at("geometry"));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("malformed tuning report: ") + e.what());
    }
    return r;
  }
};

inline std::vector<PairScores> score_windows(const Checkpoint& ck, const Encoder& enc,
                                             const Corpus& corpus,
                                             const std::vector<SubtopicWindow>& windows,
                                             const Geometry& geo, int jobs) {
  std::vector<PairScores> out(windows.size());
  parallel_for(windows.size(), jobs, [&](std::size_t i) {
    out[i] = score_matrix(ck, enc, corpus, windows[i], geo.for_topic(windows[i].topic_id).max_gap_hours);
  });
  return out;
}

inline TuneReport run_tune(const RunConfig& cfg, const Corpus& corpus, const DataSplit& split,
                           const Checkpoint& ck, const Encoder& enc) {
  ck.require_encoder(enc.fingerprint());
  TuneReport rep;
  rep.geometry = compute_geometry(corpus, cfg);
  rep.algorithm = cfg.algorithm;
  rep.stride_fraction = cfg.stride_fraction;
  const auto dev = corpus.subset(split.dev);
  const auto inputs = dev_inputs(ck.scorer, enc, dev, rep.geometry, cfg);
  const auto pred = ck.scorer.predict(inputs);
  std::vector<int> labels;
  for (const auto& in : inputs) labels.push_back(in.label > 0.5);
  rep.tau0 = select_threshold(pred, labels);
  rep.dev_f1 = binary_prf(pred, labels, rep.tau0).f1;

  const auto windows = corpus_windows(dev, rep.geometry, cfg.stride_fraction);
  const auto scores = score_windows(ck, enc, dev, windows, rep.geometry, cfg.jobs);
  std::vector<ScoredWindow> scored;
  const auto gold = dev.all_chains();
  for (std::size_t i = 0; i < windows.size(); ++i) {
    scored.push_back({windows[i], scores[i], clip_chains(gold, windows[i])});
  }
  ClusterParams params;
  params.algorithm = cfg.algorithm;
  // Gap limits are already baked into the per-window score maps.
  const auto tuned = tune_threshold(scored, dev, rep.tau0, params);
  rep.threshold = tuned.threshold;
  rep.v_measure = tuned.v_measure;
  rep.sweep = tuned.sweep;
  return rep;
}

// --- link --------------------------------------------------------------------------------

struct LinkedChain {
  Chain chain;
  std::vector<std::string> window_ids;
  std::vector<std::optional<double>> link_scores;  // consecutive members
};

struct LinkOutput {
  std::vector<LinkedChain> chains;

  std::vector<Chain> plain() const {
    std::vector<Chain> out;
    for (const auto& c : chains) out.push_back(c.chain);
    return out;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& c : chains) {
      auto j = chain_to_json(c.chain);
      nlohmann::ordered_json scores = nlohmann::ordered_json::array();
      for (const auto& s : c.link_scores) scores.push_back(s ? nlohmann::ordered_json(*s) : nullptr);
      j["provenance"] = {{"window_ids", c.window_ids}, {"link_scores", scores}};
      out += j.dump();
      out += '\n';
    }
    return out;
  }
};

/// Windows -> pair scores -> clustering per window -> merge across windows.
inline LinkOutput run_link(const RunConfig& cfg, const Corpus& corpus, const Checkpoint& ck,
                           const Encoder& enc, const TuneReport& tuning) {
  LinkOutput out;
  if (corpus.size() == 0) return out;
  const auto windows = corpus_windows(corpus, tuning.geometry, tuning.stride_fraction);
  const auto scores = score_windows(ck, enc, corpus, windows, tuning.geometry, cfg.jobs);
  ClusterParams params;
  params.algorithm = tuning.algorithm;
  params.score_threshold = tuning.threshold;
  std::vector<std::vector<Chain>> per_window(windows.size());
  parallel_for(windows.size(), cfg.jobs, [&](std::size_t i) {
    per_window[i] = cluster(scores[i], corpus, windows[i].record_ids, params);
  });
  std::vector<Chain> all;
  std::map<std::string, std::set<std::string>> windows_of_record;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (const auto& c : per_window[i]) {
      all.push_back(c);
      for (const auto& id : c.record_ids) windows_of_record[id].insert(windows[i].id());
    }
  }
  for (auto& merged : merge_chains(all, corpus)) {
    LinkedChain lc;
    std::set<std::string> wids;
    for (const auto& id : merged.record_ids) wids.insert(windows_of_record[id].begin(), windows_of_record[id].end());
    lc.window_ids.assign(wids.begin(), wids.end());
    for (std::size_t k = 1; k < merged.record_ids.size(); ++k) {
      const std::pair key{merged.record_ids[k - 1], merged.record_ids[k]};
      std::optional<double> best;
      for (const auto& s : scores) {
        auto it = s.find(key);
        if (it != s.end() && (!best || it->second > *best)) best = it->second;
      }
      lc.link_scores.push_back(best);
    }
    lc.chain = std::move(merged);
    out.chains.push_back(std::move(lc));
  }
  return out;
}

// --- evaluate ----------------------------------------------------------------------------

struct EvalMetadata {
  std::string checkpoint_id;
  double threshold = 0;
  double stride_fraction = 0.5;
};

struct EvalReport {
  nlohmann::ordered_json json;
  std::optional<ScoreReport> corpus_level;
  std::size_t defined_windows = 0;

  std::string dump() const { return json.dump(2) + "\n"; }
};

/// Scores predicted chains against gold per window (gold singletons
/// stripped), averages windows per topic and topics for the corpus.
inline EvalReport run_evaluate(const Corpus& gold, const std::vector<Chain>& predicted,
                               const Geometry& geo, const EvalMetadata& meta) {
  EvalReport rep;
  nlohmann::ordered_json windows_json = nlohmann::ordered_json::array();
  nlohmann::ordered_json topics_json = nlohmann::ordered_json::object();
  std::vector<std::optional<ScoreReport>> topic_means;
  const auto gold_chains = gold.all_chains();
  for (const auto& topic : gold.topic_ids()) {
    std::vector<std::optional<ScoreReport>> reports;
    for (const auto& w : build_windows(gold, topic, geo.for_topic(topic).window_hours, meta.stride_fraction)) {
      const auto pp = strip_singletons(clip_chains(gold_chains, w), clip_chains(predicted, w));
      reports.push_back(score(pp));
      windows_json.push_back({{"window_id", w.id()},
                              {"start", format_rfc3339(static_cast<std::int64_t>(w.start))},
                              {"records", w.record_ids.size()},
                              {"report", to_json(reports.back())}});
    }
    const auto agg = aggregate(reports);
    rep.defined_windows += agg.n_defined;
    topic_means.push_back(agg.mean);
    const auto& g = geo.for_topic(topic);
    topics_json[topic] = {{"report", to_json(agg.mean)},
                          {"windows", agg.n_defined},
                          {"excluded_windows", agg.excluded_count},
                          {"window_hours", g.window_hours},
                          {"max_gap_hours", g.max_gap_hours}};
  }
  const auto corpus_agg = aggregate(topic_means);
  rep.corpus_level = corpus_agg.mean;
  rep.json["metadata"] = {{"checkpoint_id", meta.checkpoint_id},
                          {"threshold", meta.threshold},
                          {"stride_fraction", meta.stride_fraction},
                          {"geometry", geo.to_json()}};
  rep.json["corpus"] = to_json(rep.corpus_level);
  rep.json["topics"] = topics_json;
  rep.json["windows"] = windows_json;
  return rep;
}

inline std::string checkpoint_id(const std::string& checkpoint_bytes) {
  return hex64(fnv1a64(checkpoint_bytes));
}

/// Written beside every command output.
inline std::string manifest_json(const std::string& command, const nlohmann::json& config,
                                 const std::vector<std::string>& outputs) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = hex64(fnv1a64(config.dump()));
  j["outputs"] = outputs;
  const auto now = std::chrono::system_clock::now();
  j["created_at"] = format_rfc3339(
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
  return j.dump(2) + "\n";
}

}  // namespace shiftlink
