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
#include <map>
#include <string>
#include <vector>

#include "sonoclass/image.hpp"

namespace sonoclass {

/// Minimal PNG codec for the pipeline's image store.
///
/// Write side: 8-bit grayscale, fixed deflate settings so identical pixels
/// produce identical bytes, optional tEXt chunks for provenance metadata.
/// Read side: grayscale PNG at bit depth 8 or 16 (16-bit samples are
/// rescaled into 0..255), any scanline filter, no interlacing. Color or
/// palette images are rejected rather than silently converted.

struct PngReadResult {
  GrayscaleImage image;
  int bit_depth = 8;
  std::map<std::string, std::string> text;
};

PngReadResult read_png(const std::string& path);

/// Values are clamped to [0,255] and rounded to the nearest integer.
void write_png8(const std::string& path, const GrayscaleImage& image,
                const std::map<std::string, std::string>& text = {});

/// In-memory encode, used both by write_png8 and by tests.
/// force_filter in [0,4] applies one filter to every scanline; -1 lets the
/// encoder use its default (filter 0).
std::vector<std::uint8_t> encode_png8(const GrayscaleImage& image,
                                      const std::map<std::string, std::string>& text = {},
                                      int force_filter = -1);

PngReadResult decode_png(const std::vector<std::uint8_t>& bytes);

}  // namespace sonoclass
