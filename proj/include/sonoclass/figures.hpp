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

#include "sonoclass/image.hpp"
#include "sonoclass/metrics.hpp"

namespace sonoclass {

/// Software canvas for the report figures. Grayscale, origin top-left,
/// white background, 5x7 bitmap text. Everything renders identically on
/// every platform, which keeps figure bytes reproducible.
class Canvas {
 public:
  Canvas(int width, int height, std::uint8_t background = 255);

  int width() const { return width_; }
  int height() const { return height_; }

  void set_pixel(int x, int y, std::uint8_t v);
  void draw_line(int x0, int y0, int x1, int y1, std::uint8_t v);
  void draw_rect(int x0, int y0, int x1, int y1, std::uint8_t v);
  void fill_rect(int x0, int y0, int x1, int y1, std::uint8_t v);

  /// Renders uppercase text; lowercase input is uppercased, unknown glyphs
  /// draw as a filled box. (x, y) is the top-left corner of the first glyph.
  void draw_text(int x, int y, const std::string& text, std::uint8_t v, int scale = 1);
  static int text_width(const std::string& text, int scale = 1);
  static int text_height(int scale = 1);

  GrayscaleImage to_image() const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

struct NamedRocCurve {
  std::string name;
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// ROC plot with one curve per model, a chance diagonal, axis ticks, and a
/// legend carrying each curve's area. Throws EmptyBatch when no curve is
/// given or a curve has fewer than two points.
GrayscaleImage render_roc_figure(const std::vector<NamedRocCurve>& curves,
                                 const std::string& title);

/// Two-by-two confusion grid with marginal labels and per-cell counts.
GrayscaleImage render_confusion_figure(const ConfusionMatrix& matrix, const std::string& title);

}  // namespace sonoclass
