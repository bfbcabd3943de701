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

#include <cstddef>
#include <vector>

namespace sonoclass {

/// Single-channel image, row-major, real intensities (nominally 0..255).
struct GrayscaleImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // height * width

  GrayscaleImage() = default;
  GrayscaleImage(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return height <= 0 || width <= 0; }
};

/// Model-ready input: three identical channels, values in [0,1].
/// Channel-major layout (c, y, x); side() gives the square edge length.
struct ModelInput {
  int size = 0;
  std::vector<double> pixels;  // 3 * size * size

  double at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * size + y) * size + x];
  }
  int side() const { return size; }
};

}  // namespace sonoclass
