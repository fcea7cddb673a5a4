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

// Flat "dotted.key = value" run configuration.
//
// Every key has a default; files and flags override defaults, flags
// override files. Unknown keys are rejected, and resolve() validates every
// value before any work starts. The defaults are desk-sized versions of the
// full-scale fine-tuning setup:
//
//   key                  default     full scale
//   model.M              64          512 (1 + 59 + 1 + 450 + 1)
//   model.max_q          8           59
//   model.N              32          512 (1 + 511)
//   model.d              32          768
//   model.fusion_depth   2           4 (QA), 3 (GLUE)
//   train.base_lr        3e-4        3e-5 (QA), 2e-5 (GLUE)
//   train.batch_size     8           16
//   train.epochs         1           1 (QA), 5 (GLUE)

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roofer/error.hpp"
#include "roofer/kb_store.hpp"
#include "roofer/knowledge.hpp"
#include "roofer/metrics.hpp"
#include "roofer/roof_model.hpp"
#include "roofer/trainer.hpp"

namespace roofer {

inline const std::map<std::string, std::string>& config_defaults() {
  static const std::map<std::string, std::string> defaults{
      {"data.path", ""},
      {"kb.path", ""},
      {"out.dir", "."},
      {"vocab.max_size", "256"},
      {"model.d", "32"},
      {"model.heads", "2"},
      {"model.d_ff", "64"},
      {"model.task_layers", "2"},
      {"model.kb_layers", "2"},
      {"model.M", "64"},
      {"model.max_q", "8"},
      {"model.N", "32"},
      {"model.fusion", "te"},
      {"model.fusion_depth", "2"},
      {"model.fusion_init", "task"},
      {"model.cached_kb", "false"},
      {"model.triple_len", "16"},
      {"model.cached_keep_cls", "true"},
      {"model.head", "qa"},
      {"model.classes", "2"},
      {"model.segmentation", "type2"},
      {"model.dropout", "0.1"},
      {"model.init_std", "0.02"},
      {"kb.expansion", "exp2"},
      {"kb.selection", "has_tail"},
      {"kb.language", "en"},
      {"kb.pronoun", ""},
      {"kb.max_triples", "64"},
      {"train.base_lr", "3e-4"},
      {"train.fusion_lr_mult", "10"},
      {"train.optimizer", "adamw"},
      {"train.beta1", "0.9"},
      {"train.beta2", "0.999"},
      {"train.eps", "1e-8"},
      {"train.weight_decay", "0.01"},
      {"train.scheduler", "linear"},
      {"train.epochs", "1"},
      {"train.batch_size", "8"},
      {"train.seed", "0"},
      {"train.grad_clip", "0"},
      {"train.max_steps", "0"},
      {"eval.metric", ""},
  };
  return defaults;
}

struct ResolvedConfig {
  ModelConfig model;
  TrainConfig train;
  KnowledgeFormat knowledge;
  std::size_t vocab_max_size = 256;
  bool fusion_from_task = true;
  double init_std = 0.02;
  metrics::MetricKind metric = metrics::MetricKind::ExactMatch;
  std::string data_path;
  std::string kb_path;
  std::string out_dir;
};

class RunConfig {
 public:
  RunConfig() : values_(config_defaults()) {}

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw InvalidConfig("unknown key '" + key + "'");
    values_[key] = value;
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw InvalidConfig("unknown key '" + key + "'");
    return it->second;
  }

  // "key = value" lines; '#' starts a comment.
  void merge_text(std::istream& in, const std::string& origin = "config") {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto body = detail::trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw InvalidConfig(origin + ":" + std::to_string(line_no) + ": expected key = value");
      }
      set(std::string(detail::trim(body.substr(0, eq))), std::string(detail::trim(body.substr(eq + 1))));
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    merge_text(in, path);
  }

  // Every key in sorted order; feeding it back reproduces this config.
  std::string snapshot() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
  }

  ResolvedConfig resolve() const {
    ResolvedConfig r;
    r.data_path = get("data.path");
    r.kb_path = get("kb.path");
    r.out_dir = get("out.dir");
    r.vocab_max_size = as_size("vocab.max_size", 5);

    ModelConfig& m = r.model;
    m.task.d = m.kb.d = as_size("model.d", 1);
    m.task.n_heads = m.kb.n_heads = as_size("model.heads", 1);
    m.task.d_ff = m.kb.d_ff = as_size("model.d_ff", 1);
    m.task.n_layers = as_size("model.task_layers", 0);
    m.kb.n_layers = as_size("model.kb_layers", 0);
    m.task.dropout = m.kb.dropout = as_double("model.dropout", 0.0, 0.999999);
    m.M = as_size("model.M", 4);
    m.max_q = as_size("model.max_q", 0);
    m.N = as_size("model.N", 1);
    m.fusion = as_enum<FusionKind>("model.fusion", {{"linear", FusionKind::Linear},
                                                    {"recurrent", FusionKind::Recurrent},
                                                    {"te", FusionKind::TransformerEncoder}});
    m.k = as_size("model.fusion_depth", 1);
    r.fusion_from_task = as_enum<bool>("model.fusion_init", {{"task", true}, {"random", false}});
    m.cached_kb = as_bool("model.cached_kb");
    m.triple_len = as_size("model.triple_len", 3);
    m.cached_keep_cls = as_bool("model.cached_keep_cls");
    m.head = as_enum<HeadKind>("model.head", {{"qa", HeadKind::QA}, {"cls", HeadKind::Classification}});
    m.classes = as_size("model.classes", 2);
    m.seg = as_enum<SegScheme>("model.segmentation", {{"type1", SegScheme::Type1}, {"type2", SegScheme::Type2}});
    m.expansion = as_enum<ExpansionType>("kb.expansion", {{"exp0", ExpansionType::Exp0},
                                                          {"exp1", ExpansionType::Exp1},
                                                          {"exp2", ExpansionType::Exp2}});
    m.selection = as_enum<SelectionMode>("kb.selection", {{"no_tail", SelectionMode::NoTail},
                                                          {"has_tail", SelectionMode::HasTail}});
    m.task.max_positions = m.M;
    m.kb.max_positions = m.cached_kb ? m.triple_len : m.N;
    r.init_std = as_double("model.init_std", 0.0, 10.0);
    if (r.fusion_from_task && m.fusion == FusionKind::TransformerEncoder && m.k > m.task.n_layers) {
      throw InvalidConfig("model.fusion_init = task needs model.fusion_depth <= model.task_layers");
    }

    r.knowledge.selection = m.selection;
    r.knowledge.expansion = m.expansion;
    r.knowledge.verbalizer = VerbalizerConfig::preset_named(get("kb.language"));
    if (!get("kb.pronoun").empty()) r.knowledge.verbalizer.pronoun = get("kb.pronoun");
    r.knowledge.max_triples = as_size("kb.max_triples", 0);

    TrainConfig& t = r.train;
    t.base_lr = as_double("train.base_lr", 0.0, 10.0);
    t.fusion_lr_multiplier = as_double("train.fusion_lr_mult", 1.0, 1e6);
    t.optimizer = as_enum<OptimizerKind>("train.optimizer", {{"sgd", OptimizerKind::SGD}, {"adamw", OptimizerKind::AdamW}});
    t.beta1 = as_double("train.beta1", 0.0, 0.999999);
    t.beta2 = as_double("train.beta2", 0.0, 0.999999999);
    t.eps = as_double("train.eps", 0.0, 1.0);
    t.weight_decay = as_double("train.weight_decay", 0.0, 1.0);
    t.scheduler = as_enum<SchedulerKind>("train.scheduler", {{"linear", SchedulerKind::LinearDecay},
                                                             {"cosine", SchedulerKind::CosineDecay}});
    t.epochs = as_size("train.epochs", 1);
    t.batch_size = as_size("train.batch_size", 1);
    t.seed = static_cast<std::uint64_t>(as_size("train.seed", 0));
    if (const double clip = as_double("train.grad_clip", 0.0, 1e12); clip > 0.0) t.grad_clip = clip;
    t.max_steps = as_size("train.max_steps", 0);

    const std::string metric = get("eval.metric");
    if (metric.empty()) {
      r.metric = m.head == HeadKind::QA ? metrics::MetricKind::ExactMatch : metrics::MetricKind::Accuracy;
    } else {
      r.metric = metrics::parse_metric(metric);
      if ((r.metric == metrics::MetricKind::ExactMatch) != (m.head == HeadKind::QA)) {
        throw InvalidConfig("eval.metric '" + metric + "' does not fit model.head");
      }
    }

    // Vocabulary size is only known once the vocabulary exists; validate the
    // rest with a placeholder.
    ModelConfig probe = m;
    probe.task.vocab_size = probe.kb.vocab_size = kReservedTokens + 1;
    probe.validate();
    t.validate();
    return r;
  }

 private:
  std::size_t as_size(const std::string& key, std::size_t min) const {
    const std::string& s = get(key);
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      v = std::stoull(s, &pos);
    } catch (const std::exception&) {
      throw InvalidConfig(key + ": '" + s + "' is not a non-negative integer");
    }
    if (pos != s.size()) throw InvalidConfig(key + ": '" + s + "' is not a non-negative integer");
    if (v < min) throw InvalidConfig(key + " must be at least " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  double as_double(const std::string& key, double lo, double hi) const {
    const std::string& s = get(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      throw InvalidConfig(key + ": '" + s + "' is not a number");
    }
    if (pos != s.size() || !(v >= lo && v <= hi)) {
      std::ostringstream os;
      os << key << ": '" << s << "' outside [" << lo << ", " << hi << "]";
      throw InvalidConfig(os.str());
    }
    return v;
  }

  bool as_bool(const std::string& key) const {
    return as_enum<bool>(key, {{"true", true}, {"false", false}, {"1", true}, {"0", false}});
  }

  template <class E>
  E as_enum(const std::string& key, const std::vector<std::pair<std::string, E>>& choices) const {
    const std::string& s = get(key);
    for (const auto& [name, value] : choices)
      if (name == s) return value;
    std::string allowed;
    for (const auto& c : choices) allowed += (allowed.empty() ? "" : "|") + c.first;
    throw InvalidConfig(key + ": '" + s + "' is not one of " + allowed);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace roofer
