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

#include "sonoclass/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sonoclass/error.hpp"

namespace fs = std::filesystem;

namespace sonoclass {

namespace {

constexpr const char* kHeader =
    "image_id,patient_id,label,source,path,is_augmented,augment_parent";

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

Label parse_label(const std::string& s, std::size_t line_no) {
  if (s == "positive") return Label::Positive;
  if (s == "negative") return Label::Negative;
  throw PipelineError(ErrorCode::MalformedRow,
                      "line " + std::to_string(line_no) + ": bad label '" + s + "'");
}

SourceType parse_source(const std::string& s, std::size_t line_no) {
  if (s == "still") return SourceType::Still;
  if (s == "video_frame") return SourceType::VideoFrame;
  throw PipelineError(ErrorCode::MalformedRow,
                      "line " + std::to_string(line_no) + ": bad source '" + s + "'");
}

bool parse_bool01(const std::string& s, std::size_t line_no) {
  if (s == "0") return false;
  if (s == "1") return true;
  throw PipelineError(ErrorCode::MalformedRow,
                      "line " + std::to_string(line_no) + ": bad boolean '" + s + "'");
}

}  // namespace

const char* label_name(Label l) { return l == Label::Positive ? "positive" : "negative"; }

const char* source_name(SourceType s) {
  return s == SourceType::Still ? "still" : "video_frame";
}

std::string Manifest::resolve_path(const ImageRecord& rec) const {
  fs::path p(rec.path);
  if (p.is_absolute() || base_dir.empty()) return rec.path;
  return (fs::path(base_dir) / p).string();
}

void validate_manifest(Manifest& manifest, bool check_files) {
  manifest.patients.clear();

  std::map<std::string, std::size_t> by_id;
  std::map<std::string, Label> patient_label;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const ImageRecord& rec = manifest.records[i];
    if (rec.image_id.empty()) {
      throw PipelineError(ErrorCode::MalformedRow, "record " + std::to_string(i) + ": empty image_id");
    }
    if (!by_id.emplace(rec.image_id, i).second) {
      throw PipelineError(ErrorCode::DuplicateId, "image_id '" + rec.image_id + "' appears twice");
    }
    auto [it, inserted] = patient_label.emplace(rec.patient_id, rec.label);
    if (!inserted && it->second != rec.label) {
      throw PipelineError(ErrorCode::InconsistentPatientLabel,
                          "patient '" + rec.patient_id + "' carries both labels");
    }
    manifest.patients[rec.patient_id].push_back(i);
  }

  for (const ImageRecord& rec : manifest.records) {
    if (rec.is_augmented != !rec.augment_parent.empty()) {
      throw PipelineError(ErrorCode::InvalidLineage,
                          "record '" + rec.image_id + "': is_augmented and augment_parent disagree");
    }
    if (rec.is_augmented) {
      auto it = by_id.find(rec.augment_parent);
      if (it == by_id.end()) {
        throw PipelineError(ErrorCode::InvalidLineage,
                            "record '" + rec.image_id + "': parent '" + rec.augment_parent +
                                "' not in manifest");
      }
      const ImageRecord& parent = manifest.records[it->second];
      if (parent.is_augmented) {
        throw PipelineError(ErrorCode::InvalidLineage,
                            "record '" + rec.image_id + "': parent is itself augmented");
      }
      if (parent.patient_id != rec.patient_id || parent.label != rec.label) {
        throw PipelineError(ErrorCode::InvalidLineage,
                            "record '" + rec.image_id + "': patient/label differ from parent");
      }
    }
  }

  if (check_files) {
    for (const ImageRecord& rec : manifest.records) {
      const std::string p = manifest.resolve_path(rec);
      if (!fs::exists(p)) {
        throw PipelineError(ErrorCode::MissingFile,
                            "record '" + rec.image_id + "': no file at " + p);
      }
    }
  }
}

Manifest load_manifest(const std::string& path, bool check_files) {
  std::ifstream f(path);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open manifest: " + path);

  Manifest manifest;
  manifest.base_dir = fs::path(path).parent_path().string();

  std::string line;
  std::size_t line_no = 0;
  // Provenance comments may precede the header.
  for (;;) {
    if (!std::getline(f, line)) {
      throw PipelineError(ErrorCode::MalformedRow, "manifest has no header row");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    break;
  }
  if (line != kHeader) {
    throw PipelineError(ErrorCode::MalformedRow, "bad header: '" + line + "'");
  }
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_row(line);
    if (fields.size() != 7) {
      throw PipelineError(ErrorCode::MalformedRow,
                          "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                              std::to_string(fields.size()));
    }
    ImageRecord rec;
    rec.image_id = fields[0];
    rec.patient_id = fields[1];
    rec.label = parse_label(fields[2], line_no);
    rec.source = parse_source(fields[3], line_no);
    rec.path = fields[4];
    rec.is_augmented = parse_bool01(fields[5], line_no);
    rec.augment_parent = fields[6];
    manifest.records.push_back(std::move(rec));
  }

  validate_manifest(manifest, check_files);
  return manifest;
}

void save_manifest(const Manifest& manifest, const std::string& path,
                   const std::string& header_comment) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write manifest: " + path);
  if (!header_comment.empty()) f << "# " << header_comment << '\n';
  f << kHeader << '\n';
  for (const ImageRecord& rec : manifest.records) {
    f << rec.image_id << ',' << rec.patient_id << ',' << label_name(rec.label) << ','
      << source_name(rec.source) << ',' << rec.path << ',' << (rec.is_augmented ? 1 : 0) << ','
      << rec.augment_parent << '\n';
  }
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

DatasetSummary summarize(const Manifest& manifest) {
  DatasetSummary s;
  std::set<std::string> pos_patients, neg_patients;
  for (const ImageRecord& rec : manifest.records) {
    if (rec.label == Label::Positive) {
      ++s.n_images_positive;
      pos_patients.insert(rec.patient_id);
    } else {
      ++s.n_images_negative;
      neg_patients.insert(rec.patient_id);
    }
    if (rec.is_augmented) ++s.n_augmented;
    if (rec.source == SourceType::VideoFrame) ++s.n_video_frames;
  }
  s.n_patients_positive = pos_patients.size();
  s.n_patients_negative = neg_patients.size();
  return s;
}

}  // namespace sonoclass
