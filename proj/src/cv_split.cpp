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

#include "sonoclass/cv_split.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sonoclass/error.hpp"
#include "sonoclass/rng.hpp"

namespace sonoclass {
namespace {

std::vector<std::string> sorted_patients_of_class(const Manifest& manifest, Label label) {
  std::set<std::string> ids;
  for (const ImageRecord& rec : manifest.records) {
    if (rec.label == label) ids.insert(rec.patient_id);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
  }
  return "?";
}

FoldPlan make_folds(const Manifest& manifest, int k, std::uint64_t seed) {
  if (k < 3) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "k must be at least 3 so train, val and test stay disjoint");
  }
  for (const ImageRecord& rec : manifest.records) {
    if (rec.is_augmented) {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "fold construction takes the base manifest; augment per fold instead");
    }
  }

  std::vector<std::string> neg = sorted_patients_of_class(manifest, Label::Negative);
  std::vector<std::string> pos = sorted_patients_of_class(manifest, Label::Positive);
  if (neg.empty() || pos.empty()) {
    throw PipelineError(ErrorCode::SingleClassManifest, "folds need patients of both classes");
  }
  if (static_cast<int>(neg.size()) < k || static_cast<int>(pos.size()) < k) {
    throw PipelineError(ErrorCode::TooFewPatients,
                        "need at least k patients per class, have " +
                            std::to_string(neg.size()) + " negative and " +
                            std::to_string(pos.size()) + " positive for k=" + std::to_string(k));
  }

  // Shuffle each class with its own stream, then deal patient j of the
  // shuffled order into group j mod k. Stratification is exact up to the
  // remainder of each class count divided by k.
  std::vector<std::vector<std::string>> groups(k);
  int class_stream = 0;
  for (std::vector<std::string>* cls : {&neg, &pos}) {
    Rng rng(derive_seed(seed, 0x5F0000 + class_stream++));
    rng.shuffle(*cls);
    for (std::size_t j = 0; j < cls->size(); ++j) {
      groups[j % k].push_back((*cls)[j]);
    }
  }

  std::map<std::string, std::vector<std::string>> images_of;
  for (const ImageRecord& rec : manifest.records) {
    images_of[rec.patient_id].push_back(rec.image_id);
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  for (int i = 0; i < k; ++i) {
    Fold& fold = plan.folds[i];
    for (int g = 0; g < k; ++g) {
      std::vector<std::string>* patients = nullptr;
      std::vector<std::string>* ids = nullptr;
      if (g == i) {
        patients = &fold.test_patients;
        ids = &fold.test_image_ids;
      } else if (g == (i + 1) % k) {
        patients = &fold.val_patients;
        ids = &fold.val_image_ids;
      } else {
        patients = &fold.train_patients;
        ids = &fold.train_image_ids;
      }
      for (const std::string& pid : groups[g]) {
        patients->push_back(pid);
        const auto& imgs = images_of[pid];
        ids->insert(ids->end(), imgs.begin(), imgs.end());
      }
    }
  }
  return plan;
}

void attach_training_augmentation(FoldPlan& plan, int fold_index,
                                  const std::vector<ImageRecord>& augmented) {
  if (fold_index < 0 || fold_index >= static_cast<int>(plan.folds.size())) {
    throw PipelineError(ErrorCode::OutOfRange, "fold index " + std::to_string(fold_index));
  }
  Fold& fold = plan.folds[fold_index];
  std::set<std::string> train(fold.train_image_ids.begin(), fold.train_image_ids.end());
  for (const ImageRecord& rec : augmented) {
    if (!rec.is_augmented || rec.augment_parent.empty()) {
      throw PipelineError(ErrorCode::InvalidLineage,
                          "record '" + rec.image_id + "' is not an augmented image");
    }
    if (!train.count(rec.augment_parent)) {
      throw PipelineError(ErrorCode::AugmentSourceOutsideTrain,
                          "parent '" + rec.augment_parent + "' of '" + rec.image_id +
                              "' is not in TRAIN of fold " + std::to_string(fold_index));
    }
    fold.train_image_ids.push_back(rec.image_id);
  }
}

LeakageReport verify_no_leakage(const FoldPlan& plan, const Manifest& manifest) {
  LeakageReport report;

  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& rec : manifest.records) by_id[rec.image_id] = &rec;

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    const std::string tag = "fold " + std::to_string(f);

    struct Slot {
      Partition part;
      const std::vector<std::string>* ids;
    };
    const Slot slots[] = {{Partition::Train, &fold.train_image_ids},
                          {Partition::Val, &fold.val_image_ids},
                          {Partition::Test, &fold.test_image_ids}};

    std::map<std::string, Partition> patient_part;
    std::set<std::string> seen_images;
    std::set<std::string> base_seen;
    for (const Slot& slot : slots) {
      for (const std::string& id : *slot.ids) {
        if (!seen_images.insert(id).second) {
          report.violations.push_back(tag + ": image '" + id + "' listed twice");
          continue;
        }
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          report.violations.push_back(tag + ": image '" + id + "' not in manifest");
          continue;
        }
        const ImageRecord& rec = *it->second;
        auto [pit, inserted] = patient_part.emplace(rec.patient_id, slot.part);
        if (!inserted && pit->second != slot.part) {
          report.violations.push_back(tag + ": patient '" + rec.patient_id + "' appears in " +
                                      partition_name(pit->second) + " and " +
                                      partition_name(slot.part));
        }
        if (rec.is_augmented) {
          if (slot.part != Partition::Train) {
            report.violations.push_back(tag + ": augmented image '" + id + "' in " +
                                        partition_name(slot.part));
          }
          auto parent = by_id.find(rec.augment_parent);
          if (parent == by_id.end()) {
            report.violations.push_back(tag + ": augmented image '" + id +
                                        "' has unknown parent");
          } else {
            bool parent_in_train =
                std::find(fold.train_image_ids.begin(), fold.train_image_ids.end(),
                          rec.augment_parent) != fold.train_image_ids.end();
            if (!parent_in_train) {
              report.violations.push_back(tag + ": parent of augmented image '" + id +
                                          "' is outside TRAIN");
            }
          }
        } else {
          base_seen.insert(id);
        }
      }
    }

    for (const auto& [id, rec] : by_id) {
      if (!rec->is_augmented && !base_seen.count(id)) {
        report.violations.push_back(tag + ": image '" + id + "' missing from every partition");
      }
    }
  }
  return report;
}

void save_fold_plan(const FoldPlan& plan, std::ostream& os, const std::string& header_comment) {
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  os << "fold,partition,image_id\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    for (const std::string& id : fold.train_image_ids) os << f << ",train," << id << "\n";
    for (const std::string& id : fold.val_image_ids) os << f << ",val," << id << "\n";
    for (const std::string& id : fold.test_image_ids) os << f << ",test," << id << "\n";
  }
}

void save_fold_plan_file(const FoldPlan& plan, const std::string& path,
                         const std::string& header_comment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PipelineError(ErrorCode::IoFailure, "cannot write '" + path + "'");
  save_fold_plan(plan, os, header_comment);
  if (!os.good()) throw PipelineError(ErrorCode::IoFailure, "short write to '" + path + "'");
}

FoldPlan load_fold_plan(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  for (;;) {
    if (!std::getline(is, line)) {
      throw PipelineError(ErrorCode::MalformedRow, "empty fold plan");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    break;
  }
  if (line != "fold,partition,image_id") {
    throw PipelineError(ErrorCode::MalformedRow, "bad fold plan header: '" + line + "'");
  }

  FoldPlan plan;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::istringstream ss(line);
    std::string fold_s, part_s, id;
    if (!std::getline(ss, fold_s, ',') || !std::getline(ss, part_s, ',') ||
        !std::getline(ss, id) || id.empty() || id.find(',') != std::string::npos) {
      throw PipelineError(ErrorCode::MalformedRow,
                          "fold plan line " + std::to_string(line_no) + ": '" + line + "'");
    }
    int f = -1;
    try {
      std::size_t pos = 0;
      f = std::stoi(fold_s, &pos);
      if (pos != fold_s.size()) f = -1;
    } catch (const std::exception&) {
      f = -1;
    }
    if (f < 0) {
      throw PipelineError(ErrorCode::MalformedRow,
                          "fold plan line " + std::to_string(line_no) + ": bad fold index");
    }
    if (f >= static_cast<int>(plan.folds.size())) plan.folds.resize(f + 1);
    Fold& fold = plan.folds[f];
    if (part_s == "train") {
      fold.train_image_ids.push_back(id);
    } else if (part_s == "val") {
      fold.val_image_ids.push_back(id);
    } else if (part_s == "test") {
      fold.test_image_ids.push_back(id);
    } else {
      throw PipelineError(ErrorCode::MalformedRow, "fold plan line " + std::to_string(line_no) +
                                                       ": bad partition '" + part_s + "'");
    }
  }
  plan.k = static_cast<int>(plan.folds.size());
  return plan;
}

FoldPlan load_fold_plan_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PipelineError(ErrorCode::MissingFile, "cannot read '" + path + "'");
  return load_fold_plan(is);
}

}  // namespace sonoclass
