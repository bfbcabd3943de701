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

#include <cstdint>
#include <string>
#include <vector>

#include "sonoclass/metrics.hpp"

namespace sonoclass {

/// Everything the final report needs for one model on one test set.
struct TestSetResults {
  std::vector<FoldMetrics> folds;  // index = fold
  AggregateRow row;                // aggregate(folds, k)
};

struct ModelResults {
  std::string model;
  TestSetResults test1;
  bool has_test2 = false;
  TestSetResults test2;
};

struct PairwiseComparison {
  std::string model_a;
  std::string model_b;
  TTestResult ttest;  // paired over per-fold Test-1 AUC
};

struct ReportBundle {
  std::vector<ModelResults> models;
  std::vector<PairwiseComparison> pairwise;
  std::string config_hash;
  std::uint64_t seed = 0;
  int k = 5;
};

/// Markdown report: results table with one row per model and metric pairs in
/// Precision/Recall/F1/Accuracy/AUC order, fold dispersion, pairwise t-tests,
/// and a provenance footer. Test-2 columns exist only when every model has
/// Test-2 results; a mix of with and without is rejected as InvalidConfig.
std::string render_report_markdown(const ReportBundle& bundle);

/// Structured per-(model, fold, test set) metrics file, JSON with sorted
/// keys so repeated runs are byte-identical.
struct FoldMetricsFile {
  std::string model;
  int fold = -1;
  TestSet test_set = TestSet::Test1;
  std::string config_hash;
  std::uint64_t seed = 0;
  ConfusionMatrix matrix;
  FoldMetrics metrics;
};

void write_fold_metrics_json(const std::string& path, const FoldMetricsFile& file);
FoldMetricsFile read_fold_metrics_json(const std::string& path);

/// Per-sample scores round-trip via CSV so the report stage can rebuild ROC
/// curves without re-running inference. The first line is a '#' metadata
/// comment carrying config hash, model, fold, and test set.
void write_scores_csv(const std::string& path, const ScoredSet& scores,
                      const std::string& config_hash);
struct ScoresFile {
  ScoredSet scores;
  std::string config_hash;
};
ScoresFile read_scores_csv(const std::string& path);

/// ROC data as tab-separated (fpr, tpr, threshold) triples. An empty curve
/// is an EmptyBatch error, never an empty file.
void write_roc_tsv(const std::string& path, const std::vector<RocPoint>& curve,
                   const std::string& config_hash);

}  // namespace sonoclass
