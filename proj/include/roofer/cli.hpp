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

// Command implementations behind the `roofer` executable: kb-select, train,
// eval and predict. Each takes an already merged RunConfig and writes results
// to files under out.dir or to `out`; diagnostics go to the Logger.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roofer/roofer.hpp"

namespace roofer::cli {

enum class LogLevel { Quiet, Info, Debug };

class Logger {
 public:
  explicit Logger(LogLevel level = level_from_env(), std::ostream& sink = std::cerr)
      : level_(level), sink_(&sink) {}

  static LogLevel level_from_env() {
    const char* v = std::getenv("ROOFER_LOG");
    const std::string s = v ? v : "info";
    if (s == "quiet") return LogLevel::Quiet;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }

  void info(const std::string& msg) const {
    if (level_ != LogLevel::Quiet) *sink_ << "[roofer] " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (level_ == LogLevel::Debug) *sink_ << "[roofer:debug] " << msg << '\n';
  }

 private:
  LogLevel level_;
  std::ostream* sink_;
};

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::optional<KnowledgeBase> load_optional_kb(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_kb(path);
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string in_dir(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Texts the vocabulary is built from: task texts plus every knowledge unit
// that some example would see.
inline std::vector<std::string> vocab_corpus(const ResolvedConfig& rc, const KnowledgeBase* kb) {
  std::vector<std::string> corpus;
  auto add_units = [&](const std::string& text) {
    if (kb == nullptr) return;
    for (auto& u : rc.knowledge.units_for(*kb, text)) corpus.push_back(std::move(u.text));
  };
  if (rc.model.head == HeadKind::QA) {
    for (const auto& r : load_qa_records(rc.data_path, true)) {
      corpus.push_back(r.question);
      corpus.push_back(r.paragraph);
      add_units(r.paragraph);
    }
  } else {
    for (const auto& r : load_cls_records(rc.data_path, true)) {
      corpus.push_back(r.sentence1);
      corpus.push_back(r.sentence2);
      add_units(r.sentence1 + " " + r.sentence2);
    }
  }
  return corpus;
}

inline PreparedData prepare(const std::string& path, bool labeled, const ResolvedConfig& rc,
                            const Vocabulary& vocab, const KnowledgeBase* kb) {
  if (rc.model.head == HeadKind::QA) {
    return prepare_qa(load_qa_records(path, labeled), vocab, kb, rc.knowledge, rc.model);
  }
  return prepare_cls(load_cls_records(path, labeled), vocab, kb, rc.knowledge, rc.model);
}

inline void set_vocab_size(ResolvedConfig& rc, const Vocabulary& vocab) {
  rc.model.task.vocab_size = rc.model.kb.vocab_size = vocab.size();
  rc.model.validate();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// kb-select

inline const char* expansion_name(ExpansionType e) {
  switch (e) {
    case ExpansionType::Exp0: return "exp0";
    case ExpansionType::Exp1: return "exp1";
    case ExpansionType::Exp2: return "exp2";
  }
  return "?";
}

inline const char* selection_name(SelectionMode s) {
  return s == SelectionMode::NoTail ? "no_tail" : "has_tail";
}

// Tab-separated report, one section per knowledge format:
//   # format <expansion> <selection>
//   paragraph <n> <text>
//   triple <n> <head> <relation> <tail>
//   unit <n> <text>
//   length <n> tokens=<t> triples=<k>
//   stats mean_tokens=<x> mean_triples=<y>
inline void write_kb_report(std::ostream& out, const KnowledgeBase& kb, const std::vector<std::string>& paragraphs,
                            const KnowledgeFormat& format) {
  out << "# format\t" << expansion_name(format.expansion) << '\t' << selection_name(format.selection) << '\n';
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    const std::size_t n = i + 1;
    const auto triples = select_triples(kb, paragraphs[i], format.selection, format.max_triples);
    const auto units = expand(triples, format.expansion, format.verbalizer);
    out << "paragraph\t" << n << '\t' << paragraphs[i] << '\n';
    for (const auto& t : triples) out << "triple\t" << n << '\t' << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    for (const auto& u : units) out << "unit\t" << n << '\t' << u.text << '\n';
    out << "length\t" << n << "\ttokens=" << knowledge_token_count(units) << "\ttriples=" << triples.size() << '\n';
  }
  const KbStats stats = kb_stats(kb, paragraphs, format);
  out << "stats\tmean_tokens=" << fmt_double(stats.mean_tokens) << "\tmean_triples=" << fmt_double(stats.mean_triples)
      << '\n';
}

// Returns the report path.
inline std::string run_kb_select(const RunConfig& cfg, const std::string& paragraph_file, bool sweep,
                                 const Logger& log) {
  const ResolvedConfig rc = cfg.resolve();
  if (rc.kb_path.empty()) throw InvalidConfig("kb-select needs kb.path (--kb)");
  const KnowledgeBase kb = load_kb(rc.kb_path);
  std::vector<std::string> paragraphs;
  for (auto& line : detail::read_lines(paragraph_file)) {
    if (!roofer::detail::trim(line).empty()) paragraphs.push_back(std::move(line));
  }
  if (paragraphs.empty()) throw EmptyCorpus("no paragraphs in '" + paragraph_file + "'");
  log.info("loaded " + std::to_string(kb.size()) + " triples and " + std::to_string(paragraphs.size()) + " paragraphs");

  detail::ensure_dir(rc.out_dir);
  const std::string path = detail::in_dir(rc.out_dir, "kb_select_report.tsv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  if (sweep) {
    for (auto selection : {SelectionMode::NoTail, SelectionMode::HasTail}) {
      for (auto expansion : {ExpansionType::Exp0, ExpansionType::Exp1, ExpansionType::Exp2}) {
        KnowledgeFormat f = rc.knowledge;
        f.selection = selection;
        f.expansion = expansion;
        write_kb_report(out, kb, paragraphs, f);
      }
    }
  } else {
    write_kb_report(out, kb, paragraphs, rc.knowledge);
  }
  return path;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutputs {
  std::string checkpoint;
  std::string vocab;
  std::string loss_log;
  std::string config_snapshot;
  double final_loss = 0.0;
  std::size_t steps = 0;
};

inline TrainOutputs run_train(const RunConfig& cfg, const Logger& log) {
  ResolvedConfig rc = cfg.resolve();
  if (rc.data_path.empty()) throw InvalidConfig("train needs data.path (--data)");
  if (!std::filesystem::exists(rc.data_path)) throw InvalidConfig("dataset '" + rc.data_path + "' does not exist");
  if (!rc.kb_path.empty() && !std::filesystem::exists(rc.kb_path)) {
    throw InvalidConfig("knowledge base '" + rc.kb_path + "' does not exist");
  }

  const auto kb = detail::load_optional_kb(rc.kb_path);
  const KnowledgeBase* kbp = kb ? &*kb : nullptr;
  const Vocabulary vocab = build_vocab(detail::vocab_corpus(rc, kbp), rc.vocab_max_size);
  detail::set_vocab_size(rc, vocab);
  log.info("vocabulary of " + std::to_string(vocab.size()) + " tokens");

  const PreparedData data = detail::prepare(rc.data_path, true, rc, vocab, kbp);
  if (data.dropped > 0) log.info("dropped " + std::to_string(data.dropped) + " examples with truncated or invalid labels");
  if (data.examples.empty()) throw EmptyDataset("no usable training examples in '" + rc.data_path + "'");

  RoofWeights w = init_roof(rc.model, rc.train.seed, rc.init_std, rc.fusion_from_task);
  detail::ensure_dir(rc.out_dir);

  TrainOutputs outputs;
  outputs.loss_log = detail::in_dir(rc.out_dir, "loss_log.tsv");
  std::ofstream log_file(outputs.loss_log, std::ios::binary);
  if (!log_file) throw IoError("cannot write '" + outputs.loss_log + "'");
  log_file << "step\tlr_task\tlr_kb\tlr_fusion\tlr_head\tloss\n";
  const auto result = train(w, data.examples, rc.model, rc.train, [&](const StepLog& s) {
    log_file << s.step;
    for (double lr : s.lr) log_file << '\t' << fmt_double(lr);
    log_file << '\t' << fmt_double(s.loss) << '\n';
    log.debug("step " + std::to_string(s.step) + " loss " + fmt_double(s.loss));
  });
  log_file.close();

  outputs.steps = result.log.size();
  outputs.final_loss = result.log.back().loss;
  outputs.checkpoint = detail::in_dir(rc.out_dir, "model.ckpt");
  outputs.vocab = detail::in_dir(rc.out_dir, "vocab.txt");
  outputs.config_snapshot = detail::in_dir(rc.out_dir, "resolved_config.txt");
  save_checkpoint(w, rc.model, outputs.checkpoint);
  vocab.save(outputs.vocab);
  std::ofstream snap(outputs.config_snapshot, std::ios::binary);
  snap << cfg.snapshot();
  if (!snap) throw IoError("cannot write '" + outputs.config_snapshot + "'");
  log.info("trained " + std::to_string(outputs.steps) + " steps, final loss " + fmt_double(outputs.final_loss));
  return outputs;
}

// ---------------------------------------------------------------------------
// eval / predict

struct LoadedModel {
  ResolvedConfig rc;
  Vocabulary vocab;
  std::optional<KnowledgeBase> kb;
  RoofWeights weights;
};

inline std::string default_vocab_for(const std::string& checkpoint) {
  return (std::filesystem::path(checkpoint).parent_path() / "vocab.txt").string();
}

inline LoadedModel load_model(const RunConfig& cfg, const std::string& checkpoint, const std::string& vocab_path) {
  LoadedModel m;
  m.rc = cfg.resolve();
  m.vocab = Vocabulary::load(vocab_path.empty() ? default_vocab_for(checkpoint) : vocab_path);
  detail::set_vocab_size(m.rc, m.vocab);
  m.kb = detail::load_optional_kb(m.rc.kb_path);
  m.weights = load_checkpoint(checkpoint, m.rc.model);
  return m;
}

struct EvalReport {
  metrics::MetricKind metric;
  double value = 0.0;
  std::size_t examples = 0;
};

inline EvalReport run_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& vocab_path,
                           std::ostream& out, const Logger& log) {
  const LoadedModel m = load_model(cfg, checkpoint, vocab_path);
  if (m.rc.data_path.empty()) throw InvalidConfig("eval needs data.path (--data)");
  const PreparedData data = detail::prepare(m.rc.data_path, true, m.rc, m.vocab, m.kb ? &*m.kb : nullptr);
  if (data.dropped > 0) log.info("dropped " + std::to_string(data.dropped) + " examples with truncated or invalid labels");
  EvalReport r{m.rc.metric, evaluate(m.weights, data.examples, m.rc.model, m.rc.metric), data.examples.size()};
  out << "metric\t" << metrics::metric_name(r.metric) << '\n';
  out << "value\t" << fmt_double(r.value) << '\n';
  out << "examples\t" << r.examples << '\n';
  return r;
}

// QA lines: id, start, end (paragraph token indices, inclusive), answer text.
// Classification lines: id, class index.
inline std::size_t run_predict(const RunConfig& cfg, const std::string& checkpoint, const std::string& vocab_path,
                               const std::string& input, const std::string& output, const Logger& log) {
  const LoadedModel m = load_model(cfg, checkpoint, vocab_path);
  const PreparedData data = detail::prepare(input, false, m.rc, m.vocab, m.kb ? &*m.kb : nullptr);
  std::ofstream out(output, std::ios::binary);
  if (!out) throw IoError("cannot write '" + output + "'");
  for (const auto& ex : data.examples) {
    const Prediction p = predict_one(ex, m.weights, m.rc.model);
    if (m.rc.model.head == HeadKind::QA) {
      const std::size_t start = p.span.start - ex.layout.paragraph_begin();
      const std::size_t end = p.span.end - ex.layout.paragraph_begin();
      std::string text;
      for (std::size_t i = start; i <= end; ++i) text += (i > start ? " " : "") + ex.paragraph_tokens[i];
      out << ex.id << '\t' << start << '\t' << end << '\t' << text << '\n';
    } else {
      out << ex.id << '\t' << p.label << '\n';
    }
  }
  log.info("wrote " + std::to_string(data.examples.size()) + " predictions to " + output);
  return data.examples.size();
}

}  // namespace roofer::cli
