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

#include "sonoclass/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "sonoclass/error.hpp"

namespace sonoclass {

GrayscaleImage rescale_intensity(const GrayscaleImage& img) {
  if (img.empty()) throw PipelineError(ErrorCode::EmptyImage, "rescale_intensity");
  double lo = img.pixels[0], hi = img.pixels[0];
  for (double v : img.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  GrayscaleImage out(img.height, img.width);
  if (hi == lo) {
    return out;  // constant image maps to all zeros
  }
  const double scale = 255.0 / (hi - lo);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    out.pixels[i] = (img.pixels[i] - lo) * scale;
  }
  return out;
}

GrayscaleImage center_square_crop(const GrayscaleImage& img) {
  if (img.empty()) throw PipelineError(ErrorCode::EmptyImage, "center_square_crop");
  const int side = std::min(img.height, img.width);
  const int y0 = (img.height - side) / 2;
  const int x0 = (img.width - side) / 2;
  GrayscaleImage out(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      out.at(y, x) = img.at(y0 + y, x0 + x);
    }
  }
  return out;
}

GrayscaleImage resize_square(const GrayscaleImage& img, int target_side) {
  if (img.empty()) throw PipelineError(ErrorCode::EmptyImage, "resize_square");
  if (img.height != img.width) {
    throw PipelineError(ErrorCode::NonSquareInput, "resize expects a square image");
  }
  const int src = img.height;
  if (src == target_side) return img;

  GrayscaleImage out(target_side, target_side);
  const double scale = static_cast<double>(src) / target_side;
  for (int y = 0; y < target_side; ++y) {
    double sy = (y + 0.5) * scale - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(src - 1));
    const int y1 = static_cast<int>(std::floor(sy));
    const int y2 = std::min(y1 + 1, src - 1);
    const double wy = sy - y1;
    for (int x = 0; x < target_side; ++x) {
      double sx = (x + 0.5) * scale - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(src - 1));
      const int x1 = static_cast<int>(std::floor(sx));
      const int x2 = std::min(x1 + 1, src - 1);
      const double wx = sx - x1;
      out.at(y, x) = (1.0 - wy) * ((1.0 - wx) * img.at(y1, x1) + wx * img.at(y1, x2)) +
                     wy * ((1.0 - wx) * img.at(y2, x1) + wx * img.at(y2, x2));
    }
  }
  return out;
}

ModelInput to_model_input(const GrayscaleImage& img) {
  if (img.empty()) {
    throw PipelineError(ErrorCode::EmptyImage, "model input must be nonempty");
  }
  if (img.height != img.width) {
    throw PipelineError(ErrorCode::NonSquareInput, "model input must be square");
  }
  for (double v : img.pixels) {
    if (!(v >= 0.0 && v <= 255.0)) {
      throw PipelineError(ErrorCode::OutOfRange, "intensity outside [0,255]");
    }
  }
  ModelInput out;
  out.size = img.height;
  const std::size_t plane = img.pixels.size();
  out.pixels.resize(3 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    const double v = img.pixels[i] / 255.0;
    out.pixels[i] = v;
    out.pixels[plane + i] = v;
    out.pixels[2 * plane + i] = v;
  }
  return out;
}

GrayscaleImage standardize(const GrayscaleImage& img, int target_side) {
  return resize_square(center_square_crop(rescale_intensity(img)), target_side);
}

}  // namespace sonoclass
