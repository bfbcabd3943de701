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

#include "sonoclass/image.hpp"
#include "sonoclass/manifest.hpp"
#include "sonoclass/rng.hpp"

namespace sonoclass {

/// One sampled geometric transform. Ranges are fixed: zoom in [0.95, 1.05],
/// translation within +-5% of each axis, rotation within +-15 degrees.
struct AugmentParams {
  double zoom = 1.0;
  double tx_frac = 0.0;
  double ty_frac = 0.0;
  double rotation_deg = 0.0;

  bool in_range() const;
};

constexpr double kZoomMin = 0.95, kZoomMax = 1.05;
constexpr double kTranslateMaxFrac = 0.05;
constexpr double kRotationMaxDeg = 15.0;

/// Each field uniform over its range, drawn in a fixed order so the same
/// rng state always yields the same parameter sequence.
AugmentParams sample_params(Rng& rng);

/// Applies rotate -> zoom about the image center -> translate, with bilinear
/// resampling and zero fill outside the source frame. Identity parameters
/// reproduce the input bit-exactly. Output has the input's dimensions.
GrayscaleImage apply_augment(const GrayscaleImage& img, const AugmentParams& params);

/// Offline class balancing: one augmented copy of every minority-class
/// image. An already balanced manifest yields an empty plan.
struct BalanceAddition {
  std::string parent_image_id;
  AugmentParams params;
  std::string new_image_id;
};

struct BalancePlan {
  std::vector<BalanceAddition> additions;
};

BalancePlan plan_balancing(const Manifest& manifest, Rng& rng);

/// The manifest rows a plan adds (is_augmented=1, lineage set); paths point
/// beside the parents with an "_aug1" suffix.
std::vector<ImageRecord> plan_records(const Manifest& manifest, const BalancePlan& plan);

}  // namespace sonoclass
