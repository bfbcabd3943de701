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

#include "sonoclass/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "sonoclass/error.hpp"
#include "sonoclass/png_io.hpp"
#include "sonoclass/rng.hpp"

namespace fs = std::filesystem;

namespace sonoclass {

namespace {

// Base intensity and noise scales. The class signal has two carriers: a mean
// intensity shift, visible to a threshold-on-mean classifier on the raw
// images, and a speckle correlation length shift, which survives any
// per-image intensity normalization applied downstream. Both collapse to
// zero at separation 0 so the classes become statistically identical.
constexpr double kBaseIntensity = 112.0;
constexpr double kClassMeanShift = 24.0;
constexpr double kPatientBrightnessSigma = 3.0;
constexpr double kImageBrightnessSigma = 8.0;
constexpr double kSpeckleAmplitude = 18.0;
constexpr double kClassContrastShift = 0.25;
constexpr double kSpeckleCell = 8.0;
constexpr double kClassCellShift = 0.25;

/// Coarse gaussian lattice, one value per cell x cell block.
struct SpeckleField {
  int gh = 0, gw = 0;
  double cell = kSpeckleCell;
  std::vector<double> grid;

  SpeckleField(int height, int width, double cell_size, Rng& rng)
      : gh(static_cast<int>(height / cell_size) + 3),
        gw(static_cast<int>(width / cell_size) + 3),
        cell(cell_size),
        grid(gh * gw) {
    for (double& v : grid) v = rng.gaussian();
  }

  double sample(int y, int x) const {
    const double fy = static_cast<double>(y) / cell;
    const double fx = static_cast<double>(x) / cell;
    const int y1 = static_cast<int>(fy), x1 = static_cast<int>(fx);
    const double wy = fy - y1, wx = fx - x1;
    const auto at = [this](int yy, int xx) { return grid[yy * gw + xx]; };
    return (1 - wy) * ((1 - wx) * at(y1, x1) + wx * at(y1, x1 + 1)) +
           wy * ((1 - wx) * at(y1 + 1, x1) + wx * at(y1 + 1, x1 + 1));
  }
};

void image_dims(const SynthConfig& config, int index, int* height, int* width) {
  const int s = config.image_size;
  *height = s;
  *width = s;
  if (!config.size_jitter) return;
  const int extra = std::max(1, s / 8);
  if (index % 3 == 1) *height = s + extra;
  if (index % 3 == 2) *width = s + extra;
}

}  // namespace

Manifest generate_synthetic(const SynthConfig& config, const std::string& out_dir) {
  if (config.n_patients_per_class < 1 || config.images_per_patient < 1 ||
      config.image_size < 16 || config.class_texture_separation < 0.0 ||
      config.class_texture_separation > 1.0) {
    throw PipelineError(ErrorCode::InvalidConfig, "bad synthetic generator config");
  }

  const fs::path root(out_dir);
  const fs::path image_dir = root / "images";
  std::error_code ec;
  fs::create_directories(image_dir, ec);
  if (ec) throw PipelineError(ErrorCode::IoFailure, "cannot create " + image_dir.string());

  Manifest manifest;
  manifest.base_dir = root.string();
  Rng rng(config.seed);
  const double sep = config.class_texture_separation;

  char buf[64];
  for (Label label : {Label::Negative, Label::Positive}) {
    const double sign = label == Label::Positive ? 1.0 : -1.0;
    const double class_mean = kBaseIntensity + sign * sep * kClassMeanShift;
    const double class_amp = kSpeckleAmplitude * (1.0 + sign * sep * kClassContrastShift);
    // Positive class gets finer speckle, negative coarser.
    const double class_cell = kSpeckleCell * (1.0 - sign * sep * kClassCellShift);

    for (int p = 0; p < config.n_patients_per_class; ++p) {
      std::snprintf(buf, sizeof buf, "%s%03d", label == Label::Positive ? "pos" : "neg", p);
      const std::string patient_id(buf);
      const double patient_brightness = rng.gaussian(0.0, kPatientBrightnessSigma);
      // Patient field drawn at the largest jittered size so all of the
      // patient's images share one lattice.
      const int max_side = config.image_size + std::max(1, config.image_size / 8);
      const SpeckleField patient_field(max_side, max_side, class_cell, rng);

      for (int i = 0; i < config.images_per_patient; ++i) {
        int height = 0, width = 0;
        image_dims(config, i, &height, &width);
        const double image_brightness = rng.gaussian(0.0, kImageBrightnessSigma);
        const SpeckleField image_field(height, width, class_cell, rng);

        GrayscaleImage img(height, width);
        const double cy = 0.5 * (height - 1), cx = 0.5 * (width - 1);
        const double rmax2 = cy * cy + cx * cx;
        for (int y = 0; y < height; ++y) {
          for (int x = 0; x < width; ++x) {
            const double speckle =
                0.5 * patient_field.sample(y, x) + 0.5 * image_field.sample(y, x);
            const double vignette = -14.0 * ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / rmax2;
            double v = class_mean + patient_brightness + image_brightness +
                       class_amp * speckle + vignette;
            img.at(y, x) = std::clamp(v, 0.0, 255.0);
          }
        }

        std::snprintf(buf, sizeof buf, "%s_i%03d", patient_id.c_str(), i);
        ImageRecord rec;
        rec.image_id = buf;
        rec.patient_id = patient_id;
        rec.label = label;
        rec.source = config.source;
        rec.path = (fs::path("images") / (rec.image_id + ".png")).string();
        write_png8((image_dir / (rec.image_id + ".png")).string(), img);
        manifest.records.push_back(std::move(rec));
      }
    }
  }

  validate_manifest(manifest, true);
  save_manifest(manifest, (root / "manifest.csv").string());
  return manifest;
}

}  // namespace sonoclass
