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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "roofer/error.hpp"

namespace roofer::metrics {

enum class MetricKind { ExactMatch, Accuracy, F1Binary, MatthewsCorr, PearsonSpearmanAvg };

inline const char* metric_name(MetricKind k) {
  switch (k) {
    case MetricKind::ExactMatch: return "exact_match";
    case MetricKind::Accuracy: return "accuracy";
    case MetricKind::F1Binary: return "f1";
    case MetricKind::MatthewsCorr: return "matthews_corr";
    case MetricKind::PearsonSpearmanAvg: return "pearson_spearman";
  }
  return "?";
}

inline MetricKind parse_metric(const std::string& s) {
  for (auto k : {MetricKind::ExactMatch, MetricKind::Accuracy, MetricKind::F1Binary,
                 MetricKind::MatthewsCorr, MetricKind::PearsonSpearmanAvg}) {
    if (s == metric_name(k)) return k;
  }
  throw InvalidConfig("unknown metric '" + s + "'");
}

using SpanPair = std::pair<std::size_t, std::size_t>;

namespace detail {

template <class A, class B>
void check_lengths(const std::vector<A>& p, const std::vector<B>& g) {
  if (p.size() != g.size()) {
    throw LengthMismatch(std::to_string(p.size()) + " predictions vs " + std::to_string(g.size()) + " golds");
  }
  if (p.empty()) throw EmptyInput("no examples to score");
}

struct Confusion {
  double tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Confusion confusion(const std::vector<double>& p, const std::vector<double>& g) {
  Confusion c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if ((p[i] != 0.0 && p[i] != 1.0) || (g[i] != 0.0 && g[i] != 1.0)) {
      throw DomainError("binary metrics need labels in {0, 1}");
    }
    const bool pred = p[i] == 1.0, gold = g[i] == 1.0;
    if (pred && gold) c.tp += 1;
    else if (!pred && !gold) c.tn += 1;
    else if (pred) c.fp += 1;
    else c.fn += 1;
  }
  return c;
}

// Average (1-based) ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

inline double exact_match(const std::vector<SpanPair>& predictions, const std::vector<SpanPair>& golds) {
  detail::check_lengths(predictions, golds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

inline double accuracy(const std::vector<double>& predictions, const std::vector<double>& golds) {
  detail::check_lengths(predictions, golds);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

// Positive class is 1; 0 when precision + recall is 0.
inline double f1_binary(const std::vector<double>& predictions, const std::vector<double>& golds) {
  detail::check_lengths(predictions, golds);
  const auto c = detail::confusion(predictions, golds);
  const double precision = c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0;
  const double recall = c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0;
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// 0 when any marginal count is 0.
inline double matthews_corr(const std::vector<double>& predictions, const std::vector<double>& golds) {
  detail::check_lengths(predictions, golds);
  const auto c = detail::confusion(predictions, golds);
  const double denom = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn);
  if (denom == 0.0) return 0.0;
  return (c.tp * c.tn - c.fp * c.fn) / std::sqrt(denom);
}

// Pearson correlation; 0 when either side has zero variance.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_lengths(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  detail::check_lengths(x, y);
  return pearson(detail::average_ranks(x), detail::average_ranks(y));
}

inline double pearson_spearman_avg(const std::vector<double>& x, const std::vector<double>& y) {
  for (double v : x)
    if (!std::isfinite(v)) throw DomainError("correlation needs finite values");
  for (double v : y)
    if (!std::isfinite(v)) throw DomainError("correlation needs finite values");
  return 0.5 * (pearson(x, y) + spearman(x, y));
}

// Label-valued kinds; ExactMatch is scored on spans instead.
inline double score(MetricKind kind, const std::vector<double>& predictions, const std::vector<double>& golds) {
  switch (kind) {
    case MetricKind::Accuracy: return accuracy(predictions, golds);
    case MetricKind::F1Binary: return f1_binary(predictions, golds);
    case MetricKind::MatthewsCorr: return matthews_corr(predictions, golds);
    case MetricKind::PearsonSpearmanAvg: return pearson_spearman_avg(predictions, golds);
    case MetricKind::ExactMatch: break;
  }
  throw DomainError("exact match is scored on spans");
}

inline double score(MetricKind kind, const std::vector<SpanPair>& predictions, const std::vector<SpanPair>& golds) {
  if (kind != MetricKind::ExactMatch) throw DomainError(std::string(metric_name(kind)) + " is not a span metric");
  return exact_match(predictions, golds);
}

}  // namespace roofer::metrics
