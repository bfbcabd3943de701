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

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sonoclass {

/// Binary diagnosis label. Positive encodes to 1 for loss and metric math.
enum class Label { Negative = 0, Positive = 1 };

enum class SourceType { Still, VideoFrame };

inline int label_value(Label l) { return l == Label::Positive ? 1 : 0; }
const char* label_name(Label l);        // "positive" / "negative"
const char* source_name(SourceType s);  // "still" / "video_frame"

/// One image: identity, patient grouping key, label, and augmentation
/// lineage. Augmented records point at a non-augmented parent and share its
/// patient and label.
struct ImageRecord {
  std::string image_id;
  std::string patient_id;
  Label label = Label::Negative;
  SourceType source = SourceType::Still;
  std::string path;
  bool is_augmented = false;
  std::string augment_parent;  // empty for originals

  bool operator==(const ImageRecord&) const = default;
};

struct Manifest {
  std::vector<ImageRecord> records;
  /// Derived index, patient_id -> record positions, rebuilt by validate().
  std::map<std::string, std::vector<std::size_t>> patients;
  /// Directory relative image paths resolve against (the manifest file's
  /// directory for loaded manifests).
  std::string base_dir;

  std::string resolve_path(const ImageRecord& rec) const;
};

struct DatasetSummary {
  std::size_t n_images_positive = 0;
  std::size_t n_images_negative = 0;
  std::size_t n_patients_positive = 0;
  std::size_t n_patients_negative = 0;
  std::size_t n_augmented = 0;
  std::size_t n_video_frames = 0;

  std::size_t total_images() const { return n_images_positive + n_images_negative; }
};

/// Checks uniqueness, one-label-per-patient, and augmentation lineage, and
/// rebuilds the patient index. check_files additionally requires every
/// referenced image to exist on disk.
void validate_manifest(Manifest& manifest, bool check_files);

/// Lines starting with '#' before the header row are skipped, so saved
/// manifests can carry provenance comments.
Manifest load_manifest(const std::string& path, bool check_files = true);

void save_manifest(const Manifest& manifest, const std::string& path,
                   const std::string& header_comment = "");

DatasetSummary summarize(const Manifest& manifest);

}  // namespace sonoclass
