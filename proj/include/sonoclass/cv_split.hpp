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
#include <iosfwd>
#include <string>
#include <vector>

#include "sonoclass/manifest.hpp"

namespace sonoclass {

// Cross-validation folds are built over patients, never over images. Patients
// of each class are shuffled once with the run seed, dealt round-robin into k
// groups, and fold i then uses group i as TEST, group (i+1) mod k as VAL, and
// the remaining k-2 groups as TRAIN. Every image belongs to exactly one
// partition per fold, and all images of a patient travel together.

enum class Partition { Train, Val, Test };

const char* partition_name(Partition p);

struct Fold {
  std::vector<std::string> train_image_ids;
  std::vector<std::string> val_image_ids;
  std::vector<std::string> test_image_ids;

  std::vector<std::string> train_patients;
  std::vector<std::string> val_patients;
  std::vector<std::string> test_patients;
};

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

// Builds a k-fold plan from the non-augmented records of `manifest`.
// Augmented rows are rejected so that balancing can only happen downstream,
// inside a fold's TRAIN partition. Requires at least k patients per class.
FoldPlan make_folds(const Manifest& manifest, int k, std::uint64_t seed);

// Appends augmented image ids to the TRAIN lists of a plan. Every augmented
// record's parent must already sit in that fold's TRAIN partition; anything
// else is leakage and throws AugmentSourceOutsideTrain.
void attach_training_augmentation(FoldPlan& plan, int fold_index,
                                  const std::vector<ImageRecord>& augmented);

struct LeakageReport {
  // Human-readable description of each violation found. Empty means clean.
  std::vector<std::string> violations;

  bool clean() const { return violations.empty(); }
};

// Checks a plan against its manifest: no patient appears in two partitions of
// the same fold, each non-augmented image appears exactly once per fold, and
// every augmented image's parent is in the same fold's TRAIN set.
LeakageReport verify_no_leakage(const FoldPlan& plan, const Manifest& manifest);

// Serializes as CSV with header "fold,partition,image_id", folds in order,
// partitions in train/val/test order, ids in stored order. A nonempty
// header_comment becomes a leading '#' line; loaders skip such lines.
void save_fold_plan(const FoldPlan& plan, std::ostream& os, const std::string& header_comment = "");
void save_fold_plan_file(const FoldPlan& plan, const std::string& path,
                         const std::string& header_comment = "");

FoldPlan load_fold_plan(std::istream& is);
FoldPlan load_fold_plan_file(const std::string& path);

}  // namespace sonoclass

