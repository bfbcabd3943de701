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

#include "sonoclass/manifest.hpp"

namespace sonoclass {

/// Synthetic grayscale ultrasound-like dataset. Class identity shifts the
/// mean intensity, speckle contrast, and speckle grain size proportionally
/// to `separation`; separation 0 makes the two class generators identical.
/// The grain size shift survives per-image intensity normalization, so the
/// classes stay separable after downstream standardization. Each patient has
/// a brightness offset and a shared speckle field, so images of one patient
/// correlate and patient-grouped splitting is meaningful.
struct SynthConfig {
  int n_patients_per_class = 10;
  int images_per_patient = 5;
  int image_size = 128;
  double class_texture_separation = 1.0;  // in [0,1]
  std::uint64_t seed = 0;
  SourceType source = SourceType::Still;
  /// Cycle through mildly non-square sizes so the crop path is exercised.
  bool size_jitter = true;
};

/// Writes PNGs under <out_dir>/images/ and the manifest to
/// <out_dir>/manifest.csv. Same config (and seed) produces byte-identical
/// files. Returns the validated manifest.
Manifest generate_synthetic(const SynthConfig& config, const std::string& out_dir);

}  // namespace sonoclass
