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

#include "sonoclass/figures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "sonoclass/error.hpp"

namespace sonoclass {
namespace {

struct Glyph {
  char c;
  std::uint8_t rows[7];  // 5 bits per row, MSB is the left column
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const Glyph& g : kFont) {
    if (g.c == up) return &g;
  }
  return nullptr;
}

constexpr int kGlyphWidth = 5;
constexpr int kGlyphHeight = 7;
constexpr int kGlyphAdvance = 6;  // one pixel of spacing

}  // namespace

Canvas::Canvas(int width, int height, std::uint8_t background)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw PipelineError(ErrorCode::InvalidConfig, "canvas dimensions must be positive");
  }
  pixels_.assign(static_cast<std::size_t>(width) * height, background);
}

void Canvas::set_pixel(int x, int y, std::uint8_t v) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  pixels_[static_cast<std::size_t>(y) * width_ + x] = v;
}

void Canvas::draw_line(int x0, int y0, int x1, int y1, std::uint8_t v) {
  // Bresenham over all octants.
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    set_pixel(x0, y0, v);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::draw_rect(int x0, int y0, int x1, int y1, std::uint8_t v) {
  draw_line(x0, y0, x1, y0, v);
  draw_line(x1, y0, x1, y1, v);
  draw_line(x1, y1, x0, y1, v);
  draw_line(x0, y1, x0, y0, v);
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, std::uint8_t v) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) set_pixel(x, y, v);
  }
}

void Canvas::draw_text(int x, int y, const std::string& text, std::uint8_t v, int scale) {
  if (scale < 1) scale = 1;
  int cx = x;
  for (char c : text) {
    const Glyph* g = find_glyph(c);
    if (g == nullptr) {
      fill_rect(cx, y, cx + kGlyphWidth * scale - 1, y + kGlyphHeight * scale - 1, v);
    } else {
      for (int row = 0; row < kGlyphHeight; ++row) {
        for (int col = 0; col < kGlyphWidth; ++col) {
          if (g->rows[row] & (1 << (kGlyphWidth - 1 - col))) {
            fill_rect(cx + col * scale, y + row * scale, cx + (col + 1) * scale - 1,
                      y + (row + 1) * scale - 1, v);
          }
        }
      }
    }
    cx += kGlyphAdvance * scale;
  }
}

int Canvas::text_width(const std::string& text, int scale) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * kGlyphAdvance * scale - scale;
}

int Canvas::text_height(int scale) { return kGlyphHeight * scale; }

GrayscaleImage Canvas::to_image() const {
  GrayscaleImage img;
  img.height = height_;
  img.width = width_;
  img.pixels.resize(pixels_.size());
  for (std::size_t i = 0; i < pixels_.size(); ++i) {
    img.pixels[i] = static_cast<double>(pixels_[i]);
  }
  return img;
}

namespace {

std::string format_fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

GrayscaleImage render_roc_figure(const std::vector<NamedRocCurve>& curves,
                                 const std::string& title) {
  if (curves.empty()) {
    throw PipelineError(ErrorCode::EmptyBatch, "no curves to plot");
  }
  for (const NamedRocCurve& c : curves) {
    if (c.points.size() < 2) {
      throw PipelineError(ErrorCode::EmptyBatch, "curve '" + c.name + "' has fewer than 2 points");
    }
  }

  const int kW = 640, kH = 480;
  const int kLeft = 64, kRight = 24, kTop = 36, kBottom = 48;
  Canvas canvas(kW, kH);

  const int px0 = kLeft, px1 = kW - kRight;
  const int py0 = kH - kBottom, py1 = kTop;  // y axis points up
  auto to_x = [&](double fpr) { return px0 + static_cast<int>(std::lround(fpr * (px1 - px0))); };
  auto to_y = [&](double tpr) { return py0 - static_cast<int>(std::lround(tpr * (py0 - py1))); };

  canvas.draw_text((kW - Canvas::text_width(title)) / 2, 10, title, 0);
  canvas.draw_rect(px0, py1, px1, py0, 0);

  for (int i = 0; i <= 4; ++i) {
    const double v = i / 4.0;
    const int x = to_x(v);
    const int y = to_y(v);
    canvas.draw_line(x, py0, x, py0 + 4, 0);
    canvas.draw_line(px0 - 4, y, px0, y, 0);
    const std::string label = format_fixed(v, 2);
    canvas.draw_text(x - Canvas::text_width(label) / 2, py0 + 8, label, 0);
    canvas.draw_text(px0 - 8 - Canvas::text_width(label), y - 3, label, 0);
  }
  {
    const std::string xlabel = "FALSE POSITIVE RATE";
    canvas.draw_text((px0 + px1 - Canvas::text_width(xlabel)) / 2, kH - 14, xlabel, 0);
    const std::string ylabel = "TPR";
    canvas.draw_text(px0 - Canvas::text_width(ylabel) - 10, py1 - 12, ylabel, 0);
  }

  // Chance diagonal in light gray.
  canvas.draw_line(to_x(0.0), to_y(0.0), to_x(1.0), to_y(1.0), 200);

  // Darkest shade goes to the first curve; shades stay apart so curves are
  // distinguishable in grayscale.
  const int n = static_cast<int>(curves.size());
  for (int ci = 0; ci < n; ++ci) {
    const NamedRocCurve& curve = curves[ci];
    const std::uint8_t shade = static_cast<std::uint8_t>(n == 1 ? 0 : ci * 160 / (n - 1));
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      canvas.draw_line(to_x(curve.points[i - 1].fpr), to_y(curve.points[i - 1].tpr),
                       to_x(curve.points[i].fpr), to_y(curve.points[i].tpr), shade);
      // A second pass one pixel lower thickens the stroke.
      canvas.draw_line(to_x(curve.points[i - 1].fpr), to_y(curve.points[i - 1].tpr) + 1,
                       to_x(curve.points[i].fpr), to_y(curve.points[i].tpr) + 1, shade);
    }
  }

  int ly = py0 - 12 - 12 * n;
  for (int ci = 0; ci < n; ++ci) {
    const NamedRocCurve& curve = curves[ci];
    const std::uint8_t shade = static_cast<std::uint8_t>(n == 1 ? 0 : ci * 160 / (n - 1));
    const int lx = px0 + 16;
    canvas.draw_line(lx, ly + 3, lx + 18, ly + 3, shade);
    canvas.draw_line(lx, ly + 4, lx + 18, ly + 4, shade);
    canvas.draw_text(lx + 24, ly, curve.name + " AUC=" + format_fixed(curve.auc, 3), 0);
    ly += 12;
  }

  return canvas.to_image();
}

GrayscaleImage render_confusion_figure(const ConfusionMatrix& matrix, const std::string& title) {
  const int kW = 420, kH = 360;
  Canvas canvas(kW, kH);

  canvas.draw_text((kW - Canvas::text_width(title)) / 2, 10, title, 0);

  const int gx = 120, gy = 88;      // grid origin
  const int cw = 120, ch = 100;     // cell size
  const long counts[2][2] = {{matrix.tp, matrix.fn}, {matrix.fp, matrix.tn}};
  const char* cell_names[2][2] = {{"TP", "FN"}, {"FP", "TN"}};
  const long total = std::max<long>(matrix.total(), 1);

  canvas.draw_text(gx + cw - 30, gy - 40, "PREDICTED", 0);
  canvas.draw_text(gx + cw / 2 - Canvas::text_width("POS") / 2, gy - 14, "POS", 0);
  canvas.draw_text(gx + cw + cw / 2 - Canvas::text_width("NEG") / 2, gy - 14, "NEG", 0);
  canvas.draw_text(8, gy + ch - 10, "ACTUAL", 0);
  canvas.draw_text(gx - 34, gy + ch / 2 - 3, "POS", 0);
  canvas.draw_text(gx - 34, gy + ch + ch / 2 - 3, "NEG", 0);

  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      const int x0 = gx + c * cw, y0 = gy + r * ch;
      // Background shade tracks the share of samples in the cell; text stays
      // readable because the shade never goes below mid gray.
      const double share = static_cast<double>(counts[r][c]) / static_cast<double>(total);
      const std::uint8_t bg = static_cast<std::uint8_t>(std::lround(250.0 - 100.0 * share));
      canvas.fill_rect(x0, y0, x0 + cw - 1, y0 + ch - 1, bg);
      canvas.draw_rect(x0, y0, x0 + cw - 1, y0 + ch - 1, 0);
      const std::string head = cell_names[r][c];
      const std::string value = std::to_string(counts[r][c]);
      canvas.draw_text(x0 + (cw - Canvas::text_width(head)) / 2, y0 + ch / 2 - 16, head, 0);
      canvas.draw_text(x0 + (cw - Canvas::text_width(value, 2)) / 2, y0 + ch / 2 + 2, value, 0, 2);
    }
  }

  const std::string footer = "N=" + std::to_string(matrix.total()) +
                             "  THRESHOLD=" + format_fixed(matrix.threshold, 2);
  canvas.draw_text((kW - Canvas::text_width(footer)) / 2, gy + 2 * ch + 18, footer, 0);
  return canvas.to_image();
}

}  // namespace sonoclass
