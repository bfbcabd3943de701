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

#include "sonoclass/config.hpp"
#include "sonoclass/metrics.hpp"

namespace sonoclass {

/// On-disk layout of one run, all rooted at config.output_dir. Stages talk
/// to each other only through these files, so each stage can be audited in
/// isolation.
class PipelinePaths {
 public:
  explicit PipelinePaths(const RunConfig& config);

  std::string prepared_dir() const;
  std::string prepared_images_dir() const;
  std::string prepared_manifest() const;
  std::string prepare_index() const;

  std::string fold_plan() const;

  std::string fold_dir(int fold) const;
  std::string aug_dir(int fold) const;
  std::string fold_train_manifest(int fold) const;

  std::string logs_dir() const;
  std::string epoch_log(const std::string& model, int fold) const;

  std::string checkpoints_dir() const;
  std::string best_checkpoint(const std::string& model, int fold) const;
  std::string last_checkpoint(const std::string& model, int fold) const;

  std::string metrics_dir() const;
  std::string metrics_json(const std::string& model, int fold, TestSet set) const;
  std::string scores_csv(const std::string& model, int fold, TestSet set) const;

  std::string figures_dir() const;
  std::string roc_tsv(const std::string& model) const;
  std::string roc_png(const std::string& model) const;
  std::string roc_all_png() const;
  std::string confusion_png(const std::string& model) const;

  std::string report_md() const;

 private:
  std::string root_;
};

/// Writes a synthetic dataset (images plus manifest) to the directory that
/// holds config.manifest, using the run seed.
void cmd_synth(const RunConfig& config);

/// Standardizes every manifest image into the prepared store. Re-running on
/// unchanged inputs writes zero new files; sources are tracked by content
/// hash, so a changed or missing output is regenerated.
void cmd_prepare(const RunConfig& config);

/// Builds the patient-grouped fold plan from the prepared manifest and
/// serializes it. A plan that fails leakage verification is never written.
void cmd_split(const RunConfig& config);

/// Trains every configured backbone on the given fold (all folds when
/// fold_index is negative), materializing balancing augmentation inside each
/// fold's TRAIN partition first. Produces checkpoints and epoch logs.
void cmd_train(const RunConfig& config, int fold_index = -1);

/// Scores each fold's TEST partition (and, when configured, the second test
/// manifest with that fold's TRAIN/VAL patients excluded) using the
/// best-validation checkpoints. Writes per-(model, fold, test set) metrics
/// and score files.
void cmd_evaluate(const RunConfig& config);

/// Aggregates the metrics files into the final markdown report, ROC data and
/// figure images. Artifacts whose embedded config hash differs from the
/// active config are rejected.
void cmd_report(const RunConfig& config);

}  // namespace sonoclass
