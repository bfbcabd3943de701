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

#pragma once

#include <string>
#include <vector>

namespace sonoclass {

enum class TestSet { Test1, Test2 };

const char* test_set_name(TestSet s);

struct ScoredSample {
  std::string image_id;
  double score = 0.0;  // finite, in [0, 1]
  int label = 0;       // 1 positive, 0 negative
};

struct ScoredSet {
  std::vector<ScoredSample> samples;

  int fold_index = -1;
  std::string model_name;
  TestSet test_set = TestSet::Test1;
};

// Throws OutOfRange for a score outside [0,1] or non-finite, DuplicateId for
// a repeated image id, EmptyBatch for an empty set.
void validate_scored_set(const ScoredSet& scores);

struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;

  long total() const { return tp + fp + tn + fn; }
};

// Rank-based (Mann-Whitney) AUC with ties counted one half. Equals the
// trapezoidal area under roc_curve(). Requires both classes present.
double roc_auc(const ScoredSet& scores);

// Predicts positive iff score >= threshold. The boundary case is positive.
ConfusionMatrix confusion(const ScoredSet& scores, double threshold = 0.5);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over the distinct scores, descending, anchored at
// (0, 0, +inf). The final point is (1, 1, min score).
std::vector<RocPoint> roc_curve(const ScoredSet& scores);

// The headline precision/recall are macro averages over the two classes and
// the headline f1 is the harmonic mean of those two numbers. The per-class
// and support-weighted values are carried alongside because two-class papers
// rarely state which convention their tables use.
struct FoldMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;

  double precision_positive = 0.0, recall_positive = 0.0, f1_positive = 0.0;
  double precision_negative = 0.0, recall_negative = 0.0, f1_negative = 0.0;
  double precision_weighted = 0.0, recall_weighted = 0.0, f1_weighted = 0.0;

  // Names of values whose denominator was zero; each such value reads 0.
  std::vector<std::string> undefined_metrics;
};

FoldMetrics fold_metrics(const ConfusionMatrix& matrix, const ScoredSet& scores);

double mean_of(const std::vector<double>& values);
// Sample standard deviation (n-1 denominator); 0 when fewer than two values.
double sample_stddev(const std::vector<double>& values);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;
};

struct AggregateRow {
  int k = 0;
  MetricSummary precision, recall, f1, accuracy, auc;
  std::vector<double> per_fold_auc;
};

// Mean and sample standard deviation of each field over exactly k folds.
AggregateRow aggregate(const std::vector<FoldMetrics>& folds, int k = 5);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
  // Set when every paired difference is identical. All-zero differences give
  // p = 1; identical nonzero differences give p = 0 with t at infinity.
  bool zero_variance = false;
};

// Two-sided paired t-test on per-fold differences, p from the t distribution
// with k-1 degrees of freedom.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Regularized incomplete beta I_x(a, b), exposed for the statistics tests.
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace sonoclass

