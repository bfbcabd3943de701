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
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sonoclass/image.hpp"
#include "sonoclass/model_zoo.hpp"
#include "sonoclass/nn.hpp"

namespace sonoclass {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double lr_initial = 1e-4;
  double lr_floor = 1e-6;
  double plateau_factor = 0.1;
  int plateau_patience = 10;
  // Improvement means val_auc > best + min_delta; 0 keeps the test strict.
  double min_delta = 0.0;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  AdamWConfig adamw;  // the lr field is overridden by the schedule
};

void validate_train_config(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_auc = 0.0;
  double lr = 0.0;  // rate after this epoch's schedule update
};

struct TrainState {
  int epoch = 0;  // last completed epoch
  double current_lr = 0.0;
  double best_val_auc = -1.0;  // below any reachable AUC, so epoch 1 improves
  int epochs_since_improvement = 0;
  std::vector<EpochRecord> history;
};

// Class-balanced binary cross-entropy:
//   loss = 1/2 * [mean over positives of -log p + mean over negatives of -log(1-p)]
// A single-class batch falls back to the plain mean cross-entropy so the loss
// stays defined. Probabilities are clamped to [1e-7, 1-1e-7] before any log.
double balanced_bce(const std::vector<double>& probs, const std::vector<int>& labels);

// d(loss)/d(probability) per sample.
std::vector<double> balanced_bce_prob_grad(const std::vector<double>& probs,
                                           const std::vector<int>& labels);

// d(loss)/d(logit) per sample: (p - y) times the sample's class weight. This
// is the numerically stable route into Model::backward.
std::vector<double> balanced_bce_logit_grad(const std::vector<double>& probs,
                                            const std::vector<int>& labels);

// One scheduler update. Improvement resets the plateau counter and the best;
// hitting `plateau_patience` non-improving epochs multiplies the rate by
// `plateau_factor`, floored at `lr_floor`, and resets the counter.
TrainState plateau_step(TrainState state, double val_auc, const TrainConfig& config);

struct TrainItem {
  std::string image_id;
  int label = 0;
};

struct FoldView {
  std::vector<TrainItem> train;
  std::vector<TrainItem> val;
};

using ImageLoader = std::function<ModelInput(const std::string& image_id)>;

// Full parameter snapshot in canonical parameter order.
struct WeightSnapshot {
  std::vector<std::vector<Real>> values;

  bool empty() const { return values.empty(); }
};

void capture_weights(Model& model, WeightSnapshot& out);
void restore_weights(Model& model, const WeightSnapshot& snapshot);

struct TrainOptions {
  // Receives one "epoch,train_loss,val_auc,lr" line per epoch; the header
  // line is written at the start of a fresh run.
  std::ostream* epoch_log = nullptr;
  // Checkpoint to continue from; training resumes at its epoch + 1 and
  // reproduces an uninterrupted run exactly.
  std::string resume_from;
  // Where to write the end-of-run checkpoint; empty skips it.
  std::string checkpoint_path;
  // Extra key/value pairs merged into the checkpoint sidecar.
  std::map<std::string, std::string> checkpoint_extra;
};

struct TrainResult {
  TrainState state;
  WeightSnapshot best_weights;  // parameters at the best-validation epoch
  double best_val_auc = 0.0;
  int best_epoch = 0;
};

// Shuffled mini-batch epochs with AdamW under the plateau schedule; the
// validation AUC drives both the schedule and best-checkpoint selection. The
// model is left at its last-epoch weights; the best snapshot rides in the
// result. Per-epoch randomness is derived from (seed, epoch), which is what
// makes resumption exact.
TrainResult train_fold(Model& model, const FoldView& fold, const ImageLoader& load,
                       const TrainConfig& config, const TrainOptions& options = {});

struct CheckpointMeta {
  std::string backbone;
  int feature_dim = 0;
  std::uint64_t seed = 0;
  int epoch = 0;
  double best_val_auc = 0.0;
  std::map<std::string, std::string> extra;
};

// A checkpoint is a weight blob at `path` plus a human-readable sidecar at
// `path + ".meta.json"`. The blob carries last-epoch weights, the best
// snapshot, optimizer moments and the full epoch history.
void save_checkpoint(Model& model, const TrainState& state, AdamW& optimizer,
                     const WeightSnapshot& best, std::uint64_t seed,
                     const std::map<std::string, std::string>& extra, const std::string& path);

// Restores into an already-built model of the same architecture; a different
// backbone or feature width is METADATA_MISMATCH. `optimizer`, `state` and
// `best` may be null when only weights are wanted.
void load_checkpoint(const std::string& path, Model& model, TrainState* state, AdamW* optimizer,
                     WeightSnapshot* best);

CheckpointMeta read_checkpoint_meta(const std::string& path);

}  // namespace sonoclass
