// Copyright 2026 The Roofer Authors.
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

// roofer: knowledge selection, training, evaluation and prediction.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad configuration or usage.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roofer/cli.hpp"

namespace {

struct Overrides {
  std::string config, kb, data, out, seed, expansion, selection, segmentation, fusion, fusion_depth, fusion_lr_mult,
      cached_kb;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "key = value config file");
  cmd->add_option("--kb", o.kb, "knowledge base TSV (kb.path)");
  cmd->add_option("--data", o.data, "dataset JSONL (data.path)");
  cmd->add_option("--out", o.out, "output directory (out.dir)");
  cmd->add_option("--seed", o.seed, "train.seed");
  cmd->add_option("--expansion", o.expansion, "kb.expansion: exp0|exp1|exp2");
  cmd->add_option("--selection", o.selection, "kb.selection: no_tail|has_tail");
  cmd->add_option("--segmentation", o.segmentation, "model.segmentation: type1|type2");
  cmd->add_option("--fusion", o.fusion, "model.fusion: linear|recurrent|te");
  cmd->add_option("--fusion-depth", o.fusion_depth, "model.fusion_depth");
  cmd->add_option("--fusion-lr-mult", o.fusion_lr_mult, "train.fusion_lr_mult");
  cmd->add_option("--cached-kb", o.cached_kb, "model.cached_kb: true|false");
  cmd->add_option("--set", o.sets, "extra key=value override (repeatable)");
}

roofer::RunConfig build_config(const Overrides& o) {
  roofer::RunConfig cfg;
  if (!o.config.empty()) cfg.merge_file(o.config);
  const std::pair<const std::string*, const char*> flags[] = {
      {&o.kb, "kb.path"},
      {&o.data, "data.path"},
      {&o.out, "out.dir"},
      {&o.seed, "train.seed"},
      {&o.expansion, "kb.expansion"},
      {&o.selection, "kb.selection"},
      {&o.segmentation, "model.segmentation"},
      {&o.fusion, "model.fusion"},
      {&o.fusion_depth, "model.fusion_depth"},
      {&o.fusion_lr_mult, "train.fusion_lr_mult"},
      {&o.cached_kb, "model.cached_kb"},
  };
  for (const auto& [value, key] : flags)
    if (!value->empty()) cfg.set(key, *value);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw roofer::InvalidConfig("--set expects key=value, got '" + s + "'");
    cfg.set(std::string(roofer::detail::trim(s.substr(0, eq))), std::string(roofer::detail::trim(s.substr(eq + 1))));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roofer: knowledge-augmented dual-encoder training"};
  app.require_subcommand(1);
  Overrides o;

  auto* kb_select = app.add_subcommand("kb-select", "report selected triples and verbalized knowledge per paragraph");
  add_common(kb_select, o);
  std::string paragraphs;
  bool sweep = false;
  kb_select->add_option("--paragraphs", paragraphs, "one paragraph per line")->required();
  kb_select->add_flag("--sweep", sweep, "report all six selection/expansion formats");

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, vocabulary and loss log");
  add_common(train, o);

  std::string checkpoint, vocab, input, output;
  auto* eval = app.add_subcommand("eval", "score a checkpoint on a labeled dataset");
  add_common(eval, o);
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval->add_option("--vocab", vocab, "vocabulary file (default: next to the checkpoint)");

  auto* predict = app.add_subcommand("predict", "write predictions for an unlabeled dataset");
  add_common(predict, o);
  predict->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  predict->add_option("--vocab", vocab, "vocabulary file (default: next to the checkpoint)");
  predict->add_option("--input", input, "dataset JSONL")->required();
  predict->add_option("--output", output, "predictions TSV (default: <out>/predictions.tsv)");

  CLI11_PARSE(app, argc, argv);

  const roofer::cli::Logger log;
  try {
    const roofer::RunConfig cfg = build_config(o);
    if (kb_select->parsed()) {
      std::cout << roofer::cli::run_kb_select(cfg, paragraphs, sweep, log) << '\n';
    } else if (train->parsed()) {
      const auto r = roofer::cli::run_train(cfg, log);
      std::cout << "steps\t" << r.steps << "\nfinal_loss\t" << roofer::cli::fmt_double(r.final_loss) << '\n';
    } else if (eval->parsed()) {
      roofer::cli::run_eval(cfg, checkpoint, vocab, std::cout, log);
    } else {
      if (output.empty()) output = roofer::cli::detail::in_dir(cfg.get("out.dir"), "predictions.tsv");
      roofer::cli::run_predict(cfg, checkpoint, vocab, input, output, log);
      std::cout << output << '\n';
    }
  } catch (const roofer::InvalidConfig& e) {
    std::cerr << "roofer: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "roofer: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
