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

#include "sonoclass/image.hpp"

namespace sonoclass {

/// Deterministic standardization of raw ultrasound images. All functions are
/// pure; the conventions (constant image to zero, high-side crop discard,
/// half-pixel-center bilinear sampling) are pinned here and relied on by the
/// fixture tests.

/// Min-max linear rescale to [0, 255]. A constant image maps to all zeros.
GrayscaleImage rescale_intensity(const GrayscaleImage& img);

/// Centered square crop with side min(height, width). When the trimmed
/// length is odd, the extra row/column is discarded on the high-index side.
GrayscaleImage center_square_crop(const GrayscaleImage& img);

/// Bilinear resize of a square image to target_side x target_side.
/// Sample coordinates use half-pixel centers with edge clamping, so output
/// values never leave [min(input), max(input)].
GrayscaleImage resize_square(const GrayscaleImage& img, int target_side);

inline GrayscaleImage resize_to_512(const GrayscaleImage& img) {
  return resize_square(img, 512);
}

/// Divide by 255 and replicate to three identical channels. Input must be
/// square with intensities in [0, 255].
ModelInput to_model_input(const GrayscaleImage& img);

/// rescale -> crop -> resize, the standardization used by `prepare`.
GrayscaleImage standardize(const GrayscaleImage& img, int target_side);

}  // namespace sonoclass
