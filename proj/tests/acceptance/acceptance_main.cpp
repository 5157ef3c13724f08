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

// Acceptance gate. Every criterion prints one PASS/FAIL line with its
// runtime; the process exits non-zero if any criterion fails.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "shiftlink/clustering.hpp"
#include "shiftlink/corpus.hpp"
#include "shiftlink/encoding.hpp"
#include "shiftlink/flsim.hpp"
#include "shiftlink/metrics.hpp"
#include "shiftlink/pipeline.hpp"
#include "shiftlink/scorer.hpp"
#include "shiftlink/synthgen.hpp"

namespace fs = std::filesystem;
using namespace shiftlink;

namespace {

/// Collects failed expectations for one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++n_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ |= !ok;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want << " +- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  void note(const std::string& text) { notes_.push_back(text); }

  bool failed() const { return failed_; }
  std::size_t count() const { return n_; }
  const std::vector<std::string>& failures() const { return failures_; }
  const std::vector<std::string>& notes() const { return notes_; }

 private:
  bool failed_ = false;
  std::size_t n_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

using Partition = std::vector<std::vector<std::string>>;

PartitionPair pair_of(Partition gold, Partition system) {
  PartitionPair pp;
  for (const auto& g : gold) pp.universe.insert(pp.universe.end(), g.begin(), g.end());
  pp.gold = std::move(gold);
  pp.system = std::move(system);
  return pp;
}

// --- 1 ---------------------------------------------------------------------------

void metric_oracles(Check& c, const fs::path&) {
  constexpr double tol = 1e-9;
  const Partition abcd{{"A", "B", "C", "D"}}, ab_cd{{"A", "B"}, {"C", "D"}};
  const Partition singles{{"A"}, {"B"}, {"C"}, {"D"}};

  auto m = muc(pair_of(abcd, abcd));
  c.near(m.f1, 1, tol, "muc identity");
  m = muc(pair_of(abcd, ab_cd));
  c.near(m.r, 2.0 / 3.0, tol, "muc split r");
  c.near(m.p, 1, tol, "muc split p");
  c.near(m.f1, 0.8, tol, "muc split f1");
  m = muc(pair_of(abcd, singles));
  c.near(m.r, 0, tol, "muc singletons r");
  c.near(m.f1, 0, tol, "muc singletons f1");

  auto b = b_cubed(pair_of(ab_cd, ab_cd));
  c.near(b.p + b.r + b.f1, 3, tol, "b3 identity");
  b = b_cubed(pair_of(abcd, ab_cd));
  c.near(b.r, 0.5, tol, "b3 split r");
  c.near(b.p, 1, tol, "b3 split p");
  c.near(b.f1, 2.0 / 3.0, tol, "b3 split f1");
  b = b_cubed(pair_of(ab_cd, abcd));
  c.near(b.p, 0.5, tol, "b3 merged p");
  c.near(b.r, 1, tol, "b3 merged r");

  auto e = ceaf_e(pair_of(ab_cd, ab_cd));
  c.near(e.p + e.r + e.f1, 3, tol, "ceafe identity");
  e = ceaf_e(pair_of(abcd, ab_cd));
  c.near(e.r, 2.0 / 3.0, tol, "ceafe split r");
  c.near(e.p, 1.0 / 3.0, tol, "ceafe split p");
  c.near(e.f1, 4.0 / 9.0, tol, "ceafe split f1");
  e = ceaf_e(pair_of({{"A", "B"}}, {{"C", "D"}}));
  c.near(e.p + e.r + e.f1, 0, tol, "ceafe disjoint");

  auto v = v_measure(pair_of(ab_cd, ab_cd));
  c.near(v.homogeneity + v.completeness + v.v, 3, tol, "v identity");
  v = v_measure(pair_of(ab_cd, abcd));
  c.near(v.homogeneity, 0, tol, "v one cluster h");
  c.near(v.completeness, 1, tol, "v one cluster c");
  c.near(v.v, 0, tol, "v one cluster v");
  v = v_measure(pair_of(abcd, singles));
  c.near(v.homogeneity, 1, tol, "v singletons h");
  c.near(v.completeness, 0, tol, "v singletons c");
  c.near(v.v, 0, tol, "v singletons v");

  Random rng(20240611);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(11));
    auto random_partition = [&]() {
      const auto k = 1 + rng.below(6);
      Partition out(k);
      for (int i = 0; i < n; ++i) out[rng.below(k)].push_back("m" + std::to_string(i));
      std::erase_if(out, [](const auto& x) { return x.empty(); });
      return out;
    };
    const auto gold = random_partition();
    const auto sys = random_partition();
    const auto got = ceaf_e(pair_of(gold, sys));
    const double total = oracle::brute_force_ceaf_total(gold, sys);
    c.near(got.r, total / static_cast<double>(gold.size()), tol, "ceafe brute force r, trial " + std::to_string(trial));
    c.near(got.p, total / static_cast<double>(sys.size()), tol, "ceafe brute force p, trial " + std::to_string(trial));
  }
  c.note("200 random CEAF_e instances");
}

// --- 2 ---------------------------------------------------------------------------

void conll_identity(Check& c, const fs::path&) {
  for (std::uint64_t seed : {1, 2, 3}) {
    SynthSpec s;
    s.n_topics = 2;
    s.chains_per_topic = 400;
    s.seed = seed;
    const auto corpus = generate(s);
    RunConfig cfg;
    const auto geo = compute_geometry(corpus, cfg);
    const auto rep = run_evaluate(corpus, corpus.all_chains(), geo, {"gold", 0.5, 0.5});
    c.expect(rep.corpus_level.has_value(), "gold corpus has defined windows");
    if (rep.corpus_level) {
      c.expect(rep.corpus_level->conll_f1 == 100.0, "evaluate(gold, gold) = 100, seed " + std::to_string(seed));
    }
  }
  Random rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Partition gold(3), sys(4);
    for (int i = 0; i < 10; ++i) {
      gold[rng.below(3)].push_back("m" + std::to_string(i));
      sys[rng.below(4)].push_back("m" + std::to_string(i));
    }
    std::erase_if(gold, [](const auto& x) { return x.size() < 2; });
    std::erase_if(sys, [](const auto& x) { return x.empty(); });
    if (gold.empty()) continue;
    std::vector<Chain> g, s;
    for (const auto& x : gold) g.push_back({"g" + std::to_string(g.size()), x});
    for (const auto& x : sys) s.push_back({"s" + std::to_string(s.size()), x});
    const auto r = score(strip_singletons(g, s));
    c.expect(r && r->conll_f1 == (r->muc_f1 + r->b3_f1 + r->ceafe_f1) / 3.0, "conll is the mean of the three F1");
  }
}

// --- 3 ---------------------------------------------------------------------------

void gradient_check(Check& c, const fs::path&) {
  double worst = 0;
  for (auto kind : {ArchKind::kCdcr, ArchKind::kNli, ArchKind::kSts}) {
    for (bool fl : {true, false}) {
      const auto gc = oracle::make_gradcheck_case({kind, fl});
      const std::string mode = std::string(to_string(kind)) + (fl ? "+fl" : "");
      const auto errors = oracle::gradcheck(gc.scorer, gc.batch, 1e-4);
      c.expect(gc.batch.size() == 5, "five-pair batch");
      c.expect(errors.size() >= 6, mode + ": all tensors checked");
      for (const auto& e : errors) {
        worst = std::max(worst, e.rel_error);
        c.expect(e.rel_error < 1e-4, mode + " " + e.name + " rel error " + fmt("%.3g", e.rel_error));
      }
    }
  }
  c.note("worst rel. error " + fmt("%.2g", worst));
}

// --- 4 ---------------------------------------------------------------------------

void feature_unit_suite(Check& c, const fs::path&) {
  c.expect(feature_width({ArchKind::kCdcr, true}, 256, 50) == 1074, "cdcr dim 256 + FL width 1074");
  c.expect(feature_width({ArchKind::kNli, false}, 256, 50) == 256, "nli dim 256 width 256");
  c.expect(fl_similarity(std::string("K1A-PU-001"), std::string("K1A-PU-001")) == 1.0, "identical FL -> 1.0");
  c.expect(fl_similarity(std::string("ABC123"), std::string("ABCXYZ")) == 0.5, "ABC123/ABCXYZ -> 0.5");
  c.expect(fl_similarity(std::nullopt, std::string("ABC")) == 0.0, "missing FL -> 0.0");
  c.expect(fl_bin(0.0, 11) == 0, "bin(0.0) = 0");
  c.expect(fl_bin(1.0, 11) == 10, "bin(1.0) = 10");
  c.expect(fl_bin(0.5, 11) == 5, "bin(0.5) = 5");
  c.expect(fl_bin(fl_similarity(std::string("ABC123"), std::string("ABCXYZ")), 11) == 5, "ABC123/ABCXYZ -> row 5");

  // Assembled feature vectors have the declared width and the FL row.
  TrainConfig tc;
  tc.hidden1 = 4;
  tc.hidden2 = 4;
  EncoderConfig ec;
  const BuiltinEncoder enc(ec);
  const PairScorer scorer({ArchKind::kCdcr, true}, 256, tc);
  Record a, b;
  a.record_id = "a", a.topic_id = "T", a.text = "pumpe leck", a.fl_code = "ABC123";
  b.record_id = "b", b.topic_id = "T", b.text = "pumpe dicht", b.fl_code = "ABCXYZ";
  const auto x = scorer.features(scorer.make_input(enc, a, b));
  c.expect(x.size() == 1074, "assembled cdcr feature has 1074 entries");
  c.expect(x.tail(50) == scorer.params().fl_table.row(5).transpose(), "FL block is table row 5");
}

// --- 5 ---------------------------------------------------------------------------

void oracle_clustering(Check& c, const fs::path&) {
  SynthSpec s;
  s.n_topics = 2;
  s.chains_per_topic = 600;
  s.seed = 123;
  const auto corpus = generate(s);
  c.note(std::to_string(corpus.all_chains().size()) + " chains");
  c.expect(corpus.all_chains().size() >= 500, "at least 500 chains");
  RunConfig cfg;
  const auto geo = compute_geometry(corpus, cfg);
  for (auto algo : {ClusterAlgorithm::kTdfs, ClusterAlgorithm::kHcSingle}) {
    const std::string name = to_string(algo);
    // Whole topic as one window, then the windowed pipeline with merging.
    std::vector<Chain> whole;
    for (const auto& topic : corpus.topic_ids()) {
      SubtopicWindow w;
      w.topic_id = topic;
      w.record_ids = corpus.topic_records(topic);
      const auto ch = cluster(oracle_scores(corpus, w), corpus, w.record_ids, {0.5, INFINITY, algo});
      whole.insert(whole.end(), ch.begin(), ch.end());
    }
    auto r = score(strip_singletons(corpus.all_chains(), whole));
    c.expect(r && r->conll_f1 == 100.0, name + " whole-topic conll 100");
    std::set<std::set<std::string>> got, want;
    for (const auto& ch : whole)
      if (ch.record_ids.size() > 1) got.emplace(ch.record_ids.begin(), ch.record_ids.end());
    for (const auto& ch : corpus.gold_chains()) want.emplace(ch.record_ids.begin(), ch.record_ids.end());
    c.expect(got == want, name + " reproduces gold chains exactly");

    std::vector<Chain> windowed;
    for (const auto& w : corpus_windows(corpus, geo, 0.5)) {
      const auto ch = cluster(oracle_scores(corpus, w), corpus, w.record_ids, {0.5, INFINITY, algo});
      windowed.insert(windowed.end(), ch.begin(), ch.end());
    }
    const auto rep = run_evaluate(corpus, merge_chains(windowed, corpus), geo, {"oracle", 0.5, 0.5});
    c.expect(rep.corpus_level && rep.corpus_level->conll_f1 == 100.0, name + " windowed evaluation conll 100");
  }

  // tDFS invariants on random scores.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Random rng(derive_seed(seed, "acceptance-tdfs"));
    SynthSpec rs;
    rs.chains_per_topic = 60 + static_cast<int>(rng.below(60));
    rs.seed = seed;
    const auto rc = generate(rs);
    const double gap = 5 + rng.uniform() * 100;
    const double tau = 0.2 + rng.uniform() * 0.6;
    SubtopicWindow w;
    w.topic_id = "T00";
    w.record_ids = rc.topic_records("T00");
    PairScores scores;
    for (const auto& pr : candidate_pairs_for_inference(rc, w, INFINITY)) scores[pr] = rng.uniform();
    const auto chains = cluster(scores, rc, w.record_ids, {tau, gap, ClusterAlgorithm::kTdfs});
    std::size_t members = 0;
    for (const auto& ch : chains) {
      members += ch.record_ids.size();
      for (std::size_t i = 1; i < ch.record_ids.size(); ++i) {
        const auto& prev = rc.record(ch.record_ids[i - 1]);
        const auto& cur = rc.record(ch.record_ids[i]);
        c.expect(!time_before(cur, prev), "chain members in time order");
        c.expect(static_cast<double>(cur.timestamp - prev.timestamp) <= gap * kSecondsPerHour,
                 "consecutive members within the gap limit, seed " + std::to_string(seed));
        bool reached = false;
        for (std::size_t j = 0; j < i && !reached; ++j) {
          auto it = scores.find({ch.record_ids[j], ch.record_ids[i]});
          const auto dt = static_cast<double>(cur.timestamp - rc.record(ch.record_ids[j]).timestamp);
          reached = it != scores.end() && it->second >= tau && dt <= gap * kSecondsPerHour;
        }
        c.expect(reached, "member joined through a forward link above threshold, seed " + std::to_string(seed));
      }
    }
    c.expect(members == w.record_ids.size(), "tDFS assigns every record once");
  }
  c.note("50 random corpora");
}

// --- 6 and 8 ---------------------------------------------------------------------

struct RunFiles {
  std::string checkpoint, predictions, report;
  double dev_f1 = 0, test_conll = 0, tau = 0;
};

nlohmann::json e2e_config(bool use_fl) {
  auto j = nlohmann::json::parse(R"({
    "seed": 7,
    "encoder": {"backend": "builtin", "dim": 256},
    "arch": {"kind": "cdcr"},
    "train": {"epochs": 5}
  })");
  j["arch"]["use_fl"] = use_fl;
  return j;
}

Corpus e2e_corpus() {
  SynthSpec s;
  s.chains_per_topic = 1000;
  s.signal_strength = 0.9;
  s.seed = 42;
  return generate(s);
}

RunFiles run_pipeline(const Corpus& corpus, const nlohmann::json& config, const fs::path& dir) {
  const auto cfg = RunConfig::from_json(config);
  const BuiltinEncoder enc(cfg.encoder);
  const auto split = chronological_split(corpus, cfg.split);
  const auto trained = run_train(cfg, corpus, split, enc);
  const auto tuning = run_tune(cfg, corpus, split, trained.best, enc);
  const auto test = corpus.subset(split.test);
  const auto linked = run_link(cfg, test, trained.best, enc, tuning);
  const auto ck_bytes = serialize_checkpoint(trained.best);
  const auto report =
      run_evaluate(test, linked.plain(), tuning.geometry, {checkpoint_id(ck_bytes), tuning.threshold, cfg.stride_fraction});
  fs::create_directories(dir);
  RunFiles f{(dir / "model.ckpt").string(), (dir / "predictions.jsonl").string(), (dir / "report.json").string()};
  write_file(f.checkpoint, ck_bytes);
  write_file(f.predictions, linked.to_jsonl());
  write_file(f.report, report.dump());
  f.dev_f1 = tuning.dev_f1;
  f.test_conll = report.corpus_level ? report.corpus_level->conll_f1 : 0.0;
  f.tau = tuning.threshold;
  return f;
}

void learnability(Check& c, const fs::path& work) {
  const auto corpus = e2e_corpus();
  c.expect(corpus.all_chains().size() == 1000, "1000 chains");
  const auto on = run_pipeline(corpus, e2e_config(true), work / "e2e_fl");
  const auto off = run_pipeline(corpus, e2e_config(false), work / "e2e_nofl");
  c.expect(on.dev_f1 >= 0.90, "dev pair F1 " + fmt("%.4f", on.dev_f1) + " >= 0.90");
  c.expect(on.test_conll >= 85.0, "test CoNLL " + fmt("%.2f", on.test_conll) + " >= 85");
  c.expect(on.test_conll >= off.test_conll, "FL-on CoNLL >= FL-off CoNLL");
  c.note("dev F1 " + fmt("%.3f", on.dev_f1) + ", tau " + fmt("%.4f", on.tau) + ", test CoNLL FL " +
         fmt("%.2f", on.test_conll) + " vs no-FL " + fmt("%.2f", off.test_conll));
}

void determinism(Check& c, const fs::path& work) {
  const auto corpus = e2e_corpus();
  auto config = e2e_config(true);
  config["train"]["epochs"] = 2;
  const auto a = run_pipeline(corpus, config, work / "det_a");
  const auto b = run_pipeline(corpus, config, work / "det_b");
  c.expect(read_file(a.checkpoint) == read_file(b.checkpoint), "checkpoint files identical");
  c.expect(read_file(a.predictions) == read_file(b.predictions), "prediction files identical");
  c.expect(read_file(a.report) == read_file(b.report), "report files identical");
  c.note("2-epoch runs, 3 files compared");
}

// --- 7 ---------------------------------------------------------------------------

void protocol(Check& c, const fs::path&) {
  for (double tau0 : {0.05, 0.2, 0.5, 0.8}) {
    const auto grid = threshold_grid(tau0);
    c.expect(grid.size() == 16, "grid has 15 + 1 values");
    c.expect(grid.front() == tau0, "grid contains tau0");
    std::set<int> pct;
    for (std::size_t i = 1; i < grid.size(); ++i) pct.insert(static_cast<int>(std::lround(100 * (grid[i] / tau0 - 1))));
    const std::set<int> want{-90, -80, -70, -60, -50, -40, -30, 30, 40, 50, 60, 70, 80, 90, 100};
    c.expect(pct == want, "offsets are -90..-30 and +30..+100 percent");
    for (double t : threshold_candidates(tau0)) c.expect(t > 0 && t < 1, "candidates clipped to (0, 1)");
  }
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SynthSpec s;
    s.n_topics = 2;
    s.chains_per_topic = 100 + static_cast<int>(seed) * 40;
    s.seed = seed;
    const auto corpus = generate(s);
    RunConfig cfg;
    cfg.stride_fraction = 0.25 + 0.05 * static_cast<double>(seed % 10);
    const auto geo = compute_geometry(corpus, cfg);
    std::set<std::string> covered;
    for (const auto& w : corpus_windows(corpus, geo, cfg.stride_fraction))
      for (const auto& id : w.record_ids) covered.insert(id);
    c.expect(covered.size() == corpus.size(), "windows cover every record, seed " + std::to_string(seed));

    const auto split = chronological_split(corpus);
    std::map<std::string, std::pair<std::string, std::int64_t>> info;
    for (const auto& ch : corpus.all_chains())
      info[ch.chain_id] = {corpus.topic_of_chain(ch), corpus.record(ch.record_ids.front()).timestamp};
    c.expect(split.train.size() + split.dev.size() + split.test.size() == info.size(), "split covers every chain");
    auto ordered = [&](const std::vector<std::string>& early, const std::vector<std::string>& late) {
      std::map<std::string, std::int64_t> latest, earliest;
      for (const auto& id : early) {
        auto& v = latest.try_emplace(info[id].first, INT64_MIN).first->second;
        v = std::max(v, info[id].second);
      }
      for (const auto& id : late) {
        auto& v = earliest.try_emplace(info[id].first, INT64_MAX).first->second;
        v = std::min(v, info[id].second);
      }
      for (const auto& [topic, t] : latest)
        if (earliest.count(topic) && t > earliest[topic]) return false;
      return true;
    };
    c.expect(ordered(split.train, split.dev) && ordered(split.dev, split.test) && ordered(split.train, split.test),
             "split is chronological, seed " + std::to_string(seed));
  }
  c.note("20 random corpora");
}

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void(Check&, const fs::path&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shiftlink acceptance criteria"};
  std::string workdir = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--workdir", workdir, "scratch directory for run artifacts");
  app.add_option("--only", only, "run only the named criteria (e.g. gradcheck)");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<Criterion> criteria{
      {"metric-oracles", 10, metric_oracles},
      {"conll-identity", 5, conll_identity},
      {"gradcheck", 30, gradient_check},
      {"feature-units", 1, feature_unit_suite},
      {"oracle-clustering", 60, oracle_clustering},
      {"learnability", 900, learnability},
      {"protocol", 30, protocol},
      {"determinism", 900, determinism},
  };

  int failed = 0;
  for (const auto& cr : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), cr.name) == only.end()) continue;
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.run(check, fs::path(workdir));
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < cr.budget_seconds;
    const bool pass = !check.failed() && in_time;
    failed += !pass;
    std::string extra;
    for (const auto& n : check.notes()) extra += "; " + n;
    std::printf("%s  %-18s %8.2fs / %.0fs  %zu checks%s\n", pass ? "PASS" : "FAIL", cr.name.c_str(), secs,
                cr.budget_seconds, check.count(), extra.c_str());
    for (const auto& f : check.failures()) std::printf("      - %s\n", f.c_str());
    if (!in_time) std::printf("      - over the time budget\n");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
  return failed == 0 ? 0 : 1;
}
