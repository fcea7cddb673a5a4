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

// Optimization loop with per-group learning rates.
//
// Trainable tensors are partitioned into task, kb, fusion and head groups.
// The fusion group runs at base_lr * fusion_lr_multiplier; the others at
// base_lr. A frozen knowledge encoder contributes no group. The schedule
// decays every group per optimizer step over epochs * steps_per_epoch (or
// max_steps when set), without warmup.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "roofer/autodiff.hpp"
#include "roofer/dataset.hpp"
#include "roofer/error.hpp"
#include "roofer/metrics.hpp"
#include "roofer/roof_model.hpp"

namespace roofer {

enum class OptimizerKind { SGD, AdamW };
enum class SchedulerKind { LinearDecay, CosineDecay };

struct TrainConfig {
  double base_lr = 3e-5;
  double fusion_lr_multiplier = 10.0;
  OptimizerKind optimizer = OptimizerKind::AdamW;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  SchedulerKind scheduler = SchedulerKind::LinearDecay;
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::optional<double> grad_clip;
  std::size_t max_steps = 0;  // 0: no cap

  void validate() const {
    if (!(base_lr > 0.0)) throw InvalidConfig("base_lr must be positive");
    if (!(fusion_lr_multiplier >= 1.0)) throw InvalidConfig("fusion_lr_multiplier must be at least 1");
    if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
    if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0 && weight_decay >= 0.0)) {
      throw InvalidConfig("AdamW hyperparameters out of range");
    }
    if (grad_clip && !(*grad_clip > 0.0)) throw InvalidConfig("grad_clip must be positive");
  }
};

struct ParamGroup {
  Group group;
  double lr;
  std::vector<Param> params;
};

struct ParamGroups {
  std::vector<ParamGroup> groups;

  const ParamGroup* find(Group g) const {
    for (const auto& pg : groups)
      if (pg.group == g) return &pg;
    return nullptr;
  }
};

inline ParamGroups make_param_groups(const RoofWeights& w, const TrainConfig& cfg) {
  ParamGroups out;
  for (Group g : {Group::Task, Group::Kb, Group::Fusion, Group::Head}) {
    ParamGroup pg{g, g == Group::Fusion ? cfg.base_lr * cfg.fusion_lr_multiplier : cfg.base_lr, {}};
    for (auto& p : w.parameters()) {
      if (p.group == g && p.tensor.requires_grad()) pg.params.push_back(p);
    }
    if (!pg.params.empty()) out.groups.push_back(std::move(pg));
  }
  return out;
}

inline double lr_at(std::size_t step, std::size_t total_steps, SchedulerKind scheduler, double group_lr) {
  if (total_steps < 1 || step > total_steps) {
    throw InvalidArgument("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  switch (scheduler) {
    case SchedulerKind::LinearDecay: return group_lr * (1.0 - progress);
    case SchedulerKind::CosineDecay: return group_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
  }
  return group_lr;
}

// SGD or AdamW (decoupled decay, rank-1 tensors exempt from decay).
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

  // Applies one update to every tensor of every group at lr_at(step).
  void step(const ParamGroups& groups, std::size_t step, std::size_t total_steps) {
    ++t_;
    for (const auto& pg : groups.groups) {
      const double lr = lr_at(step, total_steps, cfg_.scheduler, pg.lr);
      for (const auto& p : pg.params) update(p, lr);
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };

  void update(const Param& p, double lr) {
    Tensor t = p.tensor;
    if (!t.has_grad()) return;
    const std::vector<double> g = t.grad();
    auto& x = t.mutable_values();
    if (cfg_.optimizer == OptimizerKind::SGD) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * g[i];
      return;
    }
    auto& st = state_[p.name];
    if (st.m.empty()) {
      st.m.assign(x.size(), 0.0);
      st.v.assign(x.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double decay = t.rank() >= 2 ? cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g[i];
      st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      x[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + decay * x[i]);
    }
  }

  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::map<std::string, Moments> state_;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
inline double clip_grad_norm(const ParamGroups& groups, double max_norm) {
  double sq = 0.0;
  for (const auto& pg : groups.groups)
    for (const auto& p : pg.params)
      for (double g : p.tensor.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (const auto& pg : groups.groups)
      for (const auto& p : pg.params) {
        if (!p.tensor.has_grad()) continue;
        auto g = p.tensor.grad();
        for (auto& v : g) v *= s;
        Tensor(p.tensor).set_grad(std::move(g));
      }
  }
  return norm;
}

struct StepLog {
  std::size_t step = 0;
  std::array<double, 4> lr{};  // task, kb, fusion, head; NaN when absent
  double loss = 0.0;
};

struct TrainResult {
  std::vector<StepLog> log;
  std::size_t total_steps = 0;
};

inline std::size_t total_steps_for(std::size_t n_examples, const TrainConfig& cfg) {
  const std::size_t per_epoch = (n_examples + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;
  return cfg.max_steps > 0 ? std::min(total, cfg.max_steps) : total;
}

// Knowledge blocks for cached mode, computed once through the frozen encoder.
inline std::vector<KbEncoding> precompute_cached(const std::vector<Example>& data, const RoofWeights& w,
                                                 const ModelConfig& cfg) {
  std::vector<KbEncoding> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(kb_encode_cached(ex.input.triples, w.kb, cfg));
  return out;
}

inline Tensor example_loss(const Example& ex, const RoofWeights& w, const ModelConfig& cfg,
                           const ad::Mode& mode, const KbEncoding* cached) {
  const RoofOutput out = forward(ex.input, w, cfg, mode, cached);
  return cfg.head == HeadKind::QA ? qa_loss(out.logits, ex.start, ex.end) : cls_loss(out.logits, ex.label);
}

// Called after each optimizer step with the step record.
using StepCallback = std::function<void(const StepLog&)>;

inline TrainResult train(RoofWeights& w, const std::vector<Example>& data, const ModelConfig& cfg,
                         const TrainConfig& tcfg, const StepCallback& on_step = {}) {
  tcfg.validate();
  if (data.empty()) throw EmptyDataset("no training examples");
  for (const auto& ex : data)
    if (!ex.labeled) throw InvalidArgument("training example '" + ex.id + "' has no label");

  const ParamGroups groups = make_param_groups(w, tcfg);
  Optimizer opt(tcfg);
  std::mt19937_64 rng(tcfg.seed);
  std::vector<KbEncoding> cached;
  if (cfg.cached_kb) cached = precompute_cached(data, w, cfg);

  TrainResult result;
  result.total_steps = total_steps_for(data.size(), tcfg);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tcfg.epochs && step < result.total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size() && step < result.total_steps; begin += tcfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tcfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      w.zero_grad();
      double loss_sum = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t idx = order[b];
        const Tensor loss = example_loss(data[idx], w, cfg, ad::Mode::train(rng),
                                         cfg.cached_kb ? &cached[idx] : nullptr);
        loss_sum += loss.item();
        ad::backward(ad::scale(loss, inv_batch));
      }
      if (tcfg.grad_clip) clip_grad_norm(groups, *tcfg.grad_clip);

      StepLog entry;
      entry.step = step;
      entry.loss = loss_sum * inv_batch;
      entry.lr.fill(std::numeric_limits<double>::quiet_NaN());
      for (const auto& pg : groups.groups) {
        entry.lr[static_cast<std::size_t>(pg.group)] = lr_at(step, result.total_steps, tcfg.scheduler, pg.lr);
      }
      opt.step(groups, step, result.total_steps);
      result.log.push_back(entry);
      if (on_step) on_step(entry);
      ++step;
    }
  }
  w.zero_grad();
  return result;
}

// ---------------------------------------------------------------------------
// Inference

struct Prediction {
  std::string id;
  Span span;              // QA, task-sequence positions
  std::size_t label = 0;  // classification
};

inline Prediction predict_one(const Example& ex, const RoofWeights& w, const ModelConfig& cfg,
                              const KbEncoding* cached = nullptr) {
  const RoofOutput out = forward(ex.input, w, cfg, ad::Mode::eval(), cached);
  Prediction p;
  p.id = ex.id;
  if (cfg.head == HeadKind::QA) {
    if (ex.layout.paragraph_len == 0) throw EmptyWindow("example '" + ex.id + "' has an empty paragraph");
    p.span = predict_span(out.logits, ex.window_lo(), ex.window_hi());
  } else {
    const auto& v = out.logits.values();
    p.label = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  return p;
}

inline std::vector<Prediction> predict(const std::vector<Example>& data, const RoofWeights& w,
                                       const ModelConfig& cfg) {
  std::vector<Prediction> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(predict_one(ex, w, cfg));
  return out;
}

inline double evaluate(const RoofWeights& w, const std::vector<Example>& data, const ModelConfig& cfg,
                       metrics::MetricKind kind) {
  if (data.empty()) throw EmptyDataset("no evaluation examples");
  const auto preds = predict(data, w, cfg);
  if (cfg.head == HeadKind::QA) {
    std::vector<metrics::SpanPair> p, g;
    for (std::size_t i = 0; i < data.size(); ++i) {
      p.emplace_back(preds[i].span.start, preds[i].span.end);
      g.emplace_back(data[i].start, data[i].end);
    }
    return metrics::score(kind, p, g);
  }
  std::vector<double> p, g;
  for (std::size_t i = 0; i < data.size(); ++i) {
    p.push_back(static_cast<double>(preds[i].label));
    g.push_back(static_cast<double>(data[i].label));
  }
  return metrics::score(kind, p, g);
}

}  // namespace roofer
