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

#include "sonoclass/augment.hpp"

#include <cmath>
#include <filesystem>

#include "sonoclass/error.hpp"

namespace sonoclass {

bool AugmentParams::in_range() const {
  return zoom >= kZoomMin && zoom <= kZoomMax && tx_frac >= -kTranslateMaxFrac &&
         tx_frac <= kTranslateMaxFrac && ty_frac >= -kTranslateMaxFrac &&
         ty_frac <= kTranslateMaxFrac && rotation_deg >= -kRotationMaxDeg &&
         rotation_deg <= kRotationMaxDeg;
}

AugmentParams sample_params(Rng& rng) {
  AugmentParams p;
  p.zoom = rng.uniform(kZoomMin, kZoomMax);
  p.tx_frac = rng.uniform(-kTranslateMaxFrac, kTranslateMaxFrac);
  p.ty_frac = rng.uniform(-kTranslateMaxFrac, kTranslateMaxFrac);
  p.rotation_deg = rng.uniform(-kRotationMaxDeg, kRotationMaxDeg);
  return p;
}

GrayscaleImage apply_augment(const GrayscaleImage& img, const AugmentParams& params) {
  if (img.empty()) throw PipelineError(ErrorCode::EmptyImage, "apply_augment");
  if (!params.in_range()) {
    throw PipelineError(ErrorCode::ParamsOutOfRange, "augment parameters outside fixed ranges");
  }

  const int h = img.height, w = img.width;
  const double cy = 0.5 * (h - 1), cx = 0.5 * (w - 1);
  const double tx = params.tx_frac * w, ty = params.ty_frac * h;
  const double theta = params.rotation_deg * M_PI / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double inv_zoom = 1.0 / params.zoom;

  // Forward map: p' = zoom * R(theta) * (p - c) + c + t.
  // Sampling goes the other way: for each output pixel p', read the source
  // at p = R(-theta) * ((p' - c - t) / zoom) + c.
  GrayscaleImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x - cx - tx) * inv_zoom;
      const double dy = (y - cy - ty) * inv_zoom;
      const double sx = cos_t * dx + sin_t * dy + cx;
      const double sy = -sin_t * dx + cos_t * dy + cy;

      const int x1 = static_cast<int>(std::floor(sx));
      const int y1 = static_cast<int>(std::floor(sy));
      const double wx = sx - x1, wy = sy - y1;
      const auto pick = [&](int yy, int xx) -> double {
        return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? img.at(yy, xx) : 0.0;
      };
      out.at(y, x) = (1.0 - wy) * ((1.0 - wx) * pick(y1, x1) + wx * pick(y1, x1 + 1)) +
                     wy * ((1.0 - wx) * pick(y1 + 1, x1) + wx * pick(y1 + 1, x1 + 1));
    }
  }
  return out;
}

BalancePlan plan_balancing(const Manifest& manifest, Rng& rng) {
  std::size_t n_pos = 0, n_neg = 0;
  for (const ImageRecord& rec : manifest.records) {
    if (rec.is_augmented) {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "balancing expects a manifest of non-augmented records");
    }
    (rec.label == Label::Positive ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw PipelineError(ErrorCode::SingleClassManifest, "both classes required for balancing");
  }

  BalancePlan plan;
  if (n_pos == n_neg) return plan;
  const Label minority = n_pos < n_neg ? Label::Positive : Label::Negative;
  for (const ImageRecord& rec : manifest.records) {
    if (rec.label != minority) continue;
    BalanceAddition add;
    add.parent_image_id = rec.image_id;
    add.params = sample_params(rng);
    add.new_image_id = rec.image_id + "_aug1";
    plan.additions.push_back(std::move(add));
  }
  return plan;
}

std::vector<ImageRecord> plan_records(const Manifest& manifest, const BalancePlan& plan) {
  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& rec : manifest.records) by_id[rec.image_id] = &rec;

  std::vector<ImageRecord> out;
  out.reserve(plan.additions.size());
  for (const BalanceAddition& add : plan.additions) {
    auto it = by_id.find(add.parent_image_id);
    if (it == by_id.end()) {
      throw PipelineError(ErrorCode::InvalidLineage, "plan parent '" + add.parent_image_id +
                                                         "' not in manifest");
    }
    const ImageRecord& parent = *it->second;
    ImageRecord rec = parent;
    rec.image_id = add.new_image_id;
    rec.is_augmented = true;
    rec.augment_parent = parent.image_id;
    std::filesystem::path p(parent.path);
    rec.path = (p.parent_path() / (add.new_image_id + ".png")).string();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace sonoclass
