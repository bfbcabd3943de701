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

#include "sonoclass/synthetic.hpp"
#include "sonoclass/trainer.hpp"

namespace sonoclass {

// Carried for the audit trail; the values are pinned by the augmentation
// module and any deviation is rejected at validation.
struct AugmentRanges {
  double zoom_min = 0.95;
  double zoom_max = 1.05;
  double translate_max_frac = 0.05;
  double rotation_max_deg = 15.0;
};

// One run configuration drives every pipeline stage. The `desk` profile is
// freely overridable; `reproduction` pins image size and all training
// hyperparameters and rejects configs that try to change them.
struct RunConfig {
  std::string profile = "desk";
  std::string manifest = "out/data/manifest.csv";
  std::string test2_manifest;  // empty means no second test set
  std::string output_dir = "out";
  std::vector<std::string> backbones = {"efficientnet_b2"};
  bool pretrained = false;
  std::string weight_source;
  int k = 5;
  int image_size = 128;
  std::uint64_t seed = 0;
  bool determinism = true;
  TrainConfig train;
  AugmentRanges augment;
  SynthConfig synth;
};

// Profile defaults; throws InvalidConfig for an unknown profile name.
RunConfig default_config(const std::string& profile);

// Parses a JSON config file. Fields start from the file's profile defaults
// (overridable by `profile_override`), unknown keys are rejected, and the
// result is validated.
RunConfig load_run_config(const std::string& path, const std::string& profile_override = "");

std::string serialize_run_config(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::string& path);

void validate_run_config(const RunConfig& config);

// FNV-1a over the canonical serialization. This hash rides in every output
// file so artifacts from different configurations cannot be mixed silently.
std::uint64_t config_hash(const RunConfig& config);
std::string config_hash_hex(const RunConfig& config);

std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace sonoclass
