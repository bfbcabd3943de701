// Copyright 2026 The sonoclass Authors
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

#include "sonoclass/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sonoclass/error.hpp"

namespace sonoclass {
namespace {

constexpr double kUndefined = 0.0;

// Ratio with a zero-denominator flag instead of a throw. The value reported
// for an undefined ratio is pinned to 0.
double safe_ratio(double num, double den, const char* name, std::vector<std::string>* flags) {
  if (den == 0.0) {
    flags->push_back(name);
    return kUndefined;
  }
  return num / den;
}

double harmonic_f1(double precision, double recall) {
  const double den = precision + recall;
  return den > 0.0 ? 2.0 * precision * recall / den : 0.0;
}

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

const char* test_set_name(TestSet s) {
  return s == TestSet::Test1 ? "test1" : "test2";
}

void validate_scored_set(const ScoredSet& scores) {
  if (scores.samples.empty()) {
    throw PipelineError(ErrorCode::EmptyBatch, "scored set is empty");
  }
  std::set<std::string> ids;
  for (const ScoredSample& s : scores.samples) {
    if (!std::isfinite(s.score) || s.score < 0.0 || s.score > 1.0) {
      throw PipelineError(ErrorCode::OutOfRange,
                          "score for '" + s.image_id + "' is outside [0,1]");
    }
    if (s.label != 0 && s.label != 1) {
      throw PipelineError(ErrorCode::OutOfRange, "label for '" + s.image_id + "' is not 0/1");
    }
    if (!ids.insert(s.image_id).second) {
      throw PipelineError(ErrorCode::DuplicateId, "image '" + s.image_id + "' scored twice");
    }
  }
}

double roc_auc(const ScoredSet& scores) {
  validate_scored_set(scores);

  const std::size_t n = scores.samples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return scores.samples[i].score < scores.samples[j].score;
  });

  // Average ranks across each tie group, then apply the Mann-Whitney
  // identity AUC = (R_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg).
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores.samples[order[j]].score == scores.samples[order[i]].score) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t) {
      if (scores.samples[order[t]].label == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw PipelineError(ErrorCode::SingleClassSet, "AUC needs both classes");
  }
  return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ConfusionMatrix confusion(const ScoredSet& scores, double threshold) {
  validate_scored_set(scores);
  ConfusionMatrix m;
  m.threshold = threshold;
  for (const ScoredSample& s : scores.samples) {
    const bool predicted_positive = s.score >= threshold;
    if (s.label == 1) {
      (predicted_positive ? m.tp : m.fn)++;
    } else {
      (predicted_positive ? m.fp : m.tn)++;
    }
  }
  return m;
}

std::vector<RocPoint> roc_curve(const ScoredSet& scores) {
  validate_scored_set(scores);

  long n_pos = 0, n_neg = 0;
  for (const ScoredSample& s : scores.samples) (s.label == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw PipelineError(ErrorCode::SingleClassSet, "ROC needs both classes");
  }

  std::vector<ScoredSample> sorted = scores.samples;
  std::sort(sorted.begin(), sorted.end(), [](const ScoredSample& a, const ScoredSample& b) {
    return a.score > b.score;
  });

  std::vector<RocPoint> curve;
  curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  long cum_pos = 0, cum_neg = 0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].score;
    while (i < sorted.size() && sorted[i].score == s) {
      (sorted[i].label == 1 ? cum_pos : cum_neg)++;
      ++i;
    }
    curve.push_back({static_cast<double>(cum_neg) / n_neg,
                     static_cast<double>(cum_pos) / n_pos, s});
  }
  return curve;
}

FoldMetrics fold_metrics(const ConfusionMatrix& matrix, const ScoredSet& scores) {
  if (matrix.total() != static_cast<long>(scores.samples.size())) {
    throw PipelineError(ErrorCode::LengthMismatch,
                        "confusion matrix does not cover the scored set");
  }

  FoldMetrics out;
  auto* flags = &out.undefined_metrics;
  const double tp = matrix.tp, fp = matrix.fp, tn = matrix.tn, fn = matrix.fn;

  out.precision_positive = safe_ratio(tp, tp + fp, "precision_positive", flags);
  out.recall_positive = safe_ratio(tp, tp + fn, "recall_positive", flags);
  out.f1_positive = harmonic_f1(out.precision_positive, out.recall_positive);
  out.precision_negative = safe_ratio(tn, tn + fn, "precision_negative", flags);
  out.recall_negative = safe_ratio(tn, tn + fp, "recall_negative", flags);
  out.f1_negative = harmonic_f1(out.precision_negative, out.recall_negative);

  out.precision = 0.5 * (out.precision_positive + out.precision_negative);
  out.recall = 0.5 * (out.recall_positive + out.recall_negative);
  out.f1 = harmonic_f1(out.precision, out.recall);
  out.accuracy = safe_ratio(tp + tn, matrix.total(), "accuracy", flags);

  const double support_pos = tp + fn, support_neg = tn + fp;
  const double support = support_pos + support_neg;
  if (support > 0.0) {
    out.precision_weighted =
        (support_pos * out.precision_positive + support_neg * out.precision_negative) / support;
    out.recall_weighted =
        (support_pos * out.recall_positive + support_neg * out.recall_negative) / support;
    out.f1_weighted = (support_pos * out.f1_positive + support_neg * out.f1_negative) / support;
  }

  out.auc = roc_auc(scores);
  return out;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) throw PipelineError(ErrorCode::EmptyBatch, "mean of nothing");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

AggregateRow aggregate(const std::vector<FoldMetrics>& folds, int k) {
  if (static_cast<int>(folds.size()) != k) {
    throw PipelineError(ErrorCode::WrongFoldCount,
                        "expected " + std::to_string(k) + " folds, got " +
                            std::to_string(folds.size()));
  }

  AggregateRow row;
  row.k = k;
  const auto summarize = [&](double FoldMetrics::* field) {
    std::vector<double> vals;
    vals.reserve(folds.size());
    for (const FoldMetrics& f : folds) vals.push_back(f.*field);
    return MetricSummary{mean_of(vals), sample_stddev(vals)};
  };
  row.precision = summarize(&FoldMetrics::precision);
  row.recall = summarize(&FoldMetrics::recall);
  row.f1 = summarize(&FoldMetrics::f1);
  row.accuracy = summarize(&FoldMetrics::accuracy);
  row.auc = summarize(&FoldMetrics::auc);
  for (const FoldMetrics& f : folds) row.per_fold_auc.push_back(f.auc);
  return row;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw PipelineError(ErrorCode::OutOfRange, "beta parameters must be positive");
  }
  if (!(x >= 0.0) || !(x <= 1.0)) {
    throw PipelineError(ErrorCode::OutOfRange, "beta argument outside [0,1]");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  const double front =
      std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
               b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw PipelineError(ErrorCode::LengthMismatch, "t-test inputs differ in length");
  }
  if (a.size() < 2) {
    throw PipelineError(ErrorCode::LengthMismatch, "t-test needs at least 2 pairs");
  }

  const std::size_t k = a.size();
  std::vector<double> diff(k);
  for (std::size_t i = 0; i < k; ++i) diff[i] = a[i] - b[i];

  TTestResult res;
  res.df = static_cast<int>(k) - 1;
  const double m = mean_of(diff);
  const double sd = sample_stddev(diff);
  if (sd == 0.0) {
    res.zero_variance = true;
    if (m == 0.0) {
      res.t = 0.0;
      res.p = 1.0;
    } else {
      res.t = std::copysign(std::numeric_limits<double>::infinity(), m);
      res.p = 0.0;
    }
    return res;
  }

  res.t = m / (sd / std::sqrt(static_cast<double>(k)));
  const double df = static_cast<double>(res.df);
  res.p = regularized_incomplete_beta(0.5 * df, 0.5, df / (df + res.t * res.t));
  return res;
}

}  // namespace sonoclass
