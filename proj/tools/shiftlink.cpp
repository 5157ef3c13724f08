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

// Command-line front end: gen-synth, split, train, tune, link, evaluate.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shiftlink/pipeline.hpp"
#include "shiftlink/synthgen.hpp"

namespace sl = shiftlink;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "run configuration (JSON)")->required();
  cmd->add_option("--set", c.overrides, "override a config key, e.g. --set train.epochs=3");
  cmd->add_option("-j,--jobs", c.jobs, "worker threads (overrides config)");
}

nlohmann::json load_config_json(const Common& c) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(sl::read_file(c.config_path));
  } catch (const nlohmann::json::exception& e) {
    throw sl::ConfigError("cannot parse " + c.config_path + ": " + e.what());
  }
  for (const auto& o : c.overrides) sl::apply_override(j, o);
  if (c.jobs > 0) j["jobs"] = c.jobs;
  return j;
}

const std::string& need(const std::string& path, const char* key) {
  if (path.empty()) throw sl::ConfigError(std::string("config is missing paths.") + key);
  return path;
}

void write_with_manifest(const std::string& path, const std::string& data, const std::string& cmd,
                         const nlohmann::json& cfg) {
  sl::write_file(path, data);
  sl::write_file(path + ".manifest.json", sl::manifest_json(cmd, cfg, {path}));
}

sl::Corpus load_gold(const sl::RunConfig& cfg) {
  return sl::load_corpus(need(cfg.paths.records, "records"), need(cfg.paths.chains, "chains"));
}

sl::DataSplit load_split(const sl::RunConfig& cfg) {
  return sl::split_from_json(sl::read_file(need(cfg.paths.splits, "splits")));
}

sl::Corpus restrict(const sl::Corpus& corpus, const sl::RunConfig& cfg, const std::string& which) {
  if (which.empty() || which == "all") return corpus;
  const auto split = load_split(cfg);
  if (which == "train") return corpus.subset(split.train);
  if (which == "dev") return corpus.subset(split.dev);
  if (which == "test") return corpus.subset(split.test);
  throw sl::ConfigError("unknown split '" + which + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shiftlink: link shift-book records into event chains"};
  app.require_subcommand(1);
  app.set_version_flag("--version", sl::kVersion);

  std::string spec_path, out_dir;
  std::optional<std::uint64_t> synth_seed;
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic corpus with gold chains");
  gen->add_option("--spec", spec_path, "generator spec (JSON); defaults are used for missing keys");
  gen->add_option("--seed", synth_seed, "override the spec seed");
  gen->add_option("-o,--out-dir", out_dir, "output directory")->required();

  Common c_split, c_train, c_tune, c_link, c_eval;
  auto* split = app.add_subcommand("split", "chronological train/dev/test split by chain");
  add_common(split, c_split);
  auto* trn = app.add_subcommand("train", "train the pair scorer");
  add_common(trn, c_train);
  auto* tune = app.add_subcommand("tune", "pick the clustering threshold on dev");
  add_common(tune, c_tune);
  std::string link_split, link_input;
  auto* link = app.add_subcommand("link", "predict event chains");
  add_common(link, c_link);
  link->add_option("--split", link_split, "restrict the gold corpus to train, dev or test");
  link->add_option("--input", link_input, "records to link (JSONL); defaults to paths.records");
  std::string eval_split, eval_pred;
  auto* eval = app.add_subcommand("evaluate", "score predicted chains against gold");
  add_common(eval, c_eval);
  eval->add_option("--split", eval_split, "restrict gold to train, dev or test");
  eval->add_option("--predictions", eval_pred, "predicted chains (defaults to paths.predictions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      sl::SynthSpec spec;
      if (!spec_path.empty()) {
        try {
          spec = sl::synth_spec_from_json(nlohmann::json::parse(sl::read_file(spec_path)));
        } catch (const nlohmann::json::exception& e) {
          throw sl::ConfigError("cannot parse " + spec_path + ": " + e.what());
        }
      }
      if (synth_seed) spec.seed = *synth_seed;
      const auto corpus = sl::generate(spec);
      std::filesystem::create_directories(out_dir);
      const auto rec = out_dir + "/records.jsonl", ch = out_dir + "/chains.jsonl";
      sl::save_corpus(corpus, rec, ch);
      const auto spec_json = sl::to_json(spec);
      sl::write_file(out_dir + "/spec.json", spec_json.dump(2) + "\n");
      sl::write_file(out_dir + "/manifest.json", sl::manifest_json("gen-synth", spec_json, {rec, ch}));
      std::cout << "generated " << corpus.size() << " records, " << corpus.gold_chains().size()
                << " gold chains in " << out_dir << "\n";
      return 0;
    }

    if (split->parsed()) {
      const auto j = load_config_json(c_split);
      const auto cfg = sl::RunConfig::from_json(j);
      const auto corpus = load_gold(cfg);
      const auto s = sl::chronological_split(corpus, cfg.split);
      write_with_manifest(need(cfg.paths.splits, "splits"), sl::split_to_json(s), "split", j);
      std::cout << "split: " << s.train.size() << " train, " << s.dev.size() << " dev, "
                << s.test.size() << " test chains\n";
      return 0;
    }

    if (trn->parsed()) {
      const auto j = load_config_json(c_train);
      const auto cfg = sl::RunConfig::from_json(j);
      const auto corpus = load_gold(cfg);
      const auto enc = sl::make_encoder(cfg.encoder);
      auto result = sl::run_train(cfg, corpus, load_split(cfg), *enc, [](const sl::EpochLog& e) {
        std::printf("epoch %d  train_loss %.5f  dev_loss %.5f  dev_f1 %.4f  threshold %.4f\n", e.epoch,
                    e.train_loss, e.dev_loss, e.dev_f1, e.dev_threshold);
        std::fflush(stdout);
      });
      const auto& path = need(cfg.paths.checkpoint, "checkpoint");
      write_with_manifest(path, sl::serialize_checkpoint(result.best), "train", j);
      std::cout << "best epoch " << result.best.epoch << " (dev loss " << result.best.dev_loss
                << ") saved to " << path << "\n";
      return 0;
    }

    if (tune->parsed()) {
      const auto j = load_config_json(c_tune);
      const auto cfg = sl::RunConfig::from_json(j);
      const auto corpus = load_gold(cfg);
      const auto enc = sl::make_encoder(cfg.encoder);
      const auto ck = sl::load_checkpoint(need(cfg.paths.checkpoint, "checkpoint"));
      const auto rep = sl::run_tune(cfg, corpus, load_split(cfg), ck, *enc);
      write_with_manifest(need(cfg.paths.tuning, "tuning"), rep.to_json(), "tune", j);
      std::printf("tau0 %.4f (dev F1 %.4f)  tuned threshold %.4f (v-measure %.4f)\n", rep.tau0,
                  rep.dev_f1, rep.threshold, rep.v_measure);
      return 0;
    }

    if (link->parsed()) {
      const auto j = load_config_json(c_link);
      const auto cfg = sl::RunConfig::from_json(j);
      sl::Corpus corpus;
      if (!link_input.empty()) {
        corpus = sl::load_corpus(link_input, std::nullopt);
      } else if (!link_split.empty()) {
        corpus = restrict(load_gold(cfg), cfg, link_split);
      } else {
        corpus = sl::load_corpus(need(cfg.paths.records, "records"), std::nullopt);
      }
      const auto enc = sl::make_encoder(cfg.encoder);
      const auto ck = sl::load_checkpoint(need(cfg.paths.checkpoint, "checkpoint"));
      const auto tuning = sl::TuneReport::from_json(sl::read_file(need(cfg.paths.tuning, "tuning")));
      const auto out = sl::run_link(cfg, corpus, ck, *enc, tuning);
      write_with_manifest(need(cfg.paths.predictions, "predictions"), out.to_jsonl(), "link", j);
      std::cout << "linked " << corpus.size() << " records into " << out.chains.size() << " chains\n";
      return 0;
    }

    if (eval->parsed()) {
      const auto j = load_config_json(c_eval);
      const auto cfg = sl::RunConfig::from_json(j);
      const auto full = load_gold(cfg);
      const auto gold = restrict(full, cfg, eval_split);
      const auto predicted =
          sl::load_chains(eval_pred.empty() ? need(cfg.paths.predictions, "predictions") : eval_pred);
      sl::EvalMetadata meta;
      sl::Geometry geo;
      if (!cfg.paths.tuning.empty()) {
        const auto tuning = sl::TuneReport::from_json(sl::read_file(cfg.paths.tuning));
        geo = tuning.geometry;
        meta.threshold = tuning.threshold;
        meta.stride_fraction = tuning.stride_fraction;
      } else {
        geo = sl::compute_geometry(full, cfg);
        meta.stride_fraction = cfg.stride_fraction;
      }
      if (!cfg.paths.checkpoint.empty()) {
        meta.checkpoint_id = sl::checkpoint_id(sl::read_file(cfg.paths.checkpoint));
      }
      const auto rep = sl::run_evaluate(gold, predicted, geo, meta);
      if (!rep.corpus_level) {
        throw sl::ValidationError("no window has a gold link; nothing to evaluate");
      }
      if (!cfg.paths.report.empty()) write_with_manifest(cfg.paths.report, rep.dump(), "evaluate", j);
      const auto& r = *rep.corpus_level;
      std::printf("MUC %.2f  B3 %.2f  CEAFe %.2f  CoNLL %.2f  V %.4f  (%zu windows)\n", r.muc_f1,
                  r.b3_f1, r.ceafe_f1, r.conll_f1, r.v_measure, rep.defined_windows);
      return 0;
    }
  } catch (const sl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
