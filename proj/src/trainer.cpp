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

#include "sonoclass/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "sonoclass/error.hpp"
#include "sonoclass/metrics.hpp"
#include "sonoclass/rng.hpp"

namespace sonoclass {
namespace {

constexpr double kProbFloor = 1e-7;
constexpr std::uint64_t kEpochStreamBase = 0xE70C0000;
constexpr char kCheckpointMagic[8] = {'S', 'O', 'N', 'O', 'C', 'K', 'P', '1'};

double clamp_prob(double p) {
  return std::min(1.0 - kProbFloor, std::max(kProbFloor, p));
}

void check_pair(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size()) {
    throw PipelineError(ErrorCode::LengthMismatch, "probabilities and labels differ in length");
  }
  if (probs.empty()) throw PipelineError(ErrorCode::EmptyBatch, "loss on empty batch");
  for (int y : labels) {
    if (y != 0 && y != 1) throw PipelineError(ErrorCode::OutOfRange, "label must be 0 or 1");
  }
}

// Per-sample weights of the balanced loss: 1/(2 n_class) normally, 1/n when
// one class is absent (the plain-mean fallback).
std::vector<double> class_weights(const std::vector<int>& labels) {
  std::size_t n_pos = 0;
  for (int y : labels) n_pos += static_cast<std::size_t>(y);
  const std::size_t n_neg = labels.size() - n_pos;

  std::vector<double> w(labels.size());
  if (n_pos == 0 || n_neg == 0) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(labels.size()));
    return w;
  }
  const double w_pos = 0.5 / static_cast<double>(n_pos);
  const double w_neg = 0.5 / static_cast<double>(n_neg);
  for (std::size_t i = 0; i < labels.size(); ++i) w[i] = labels[i] == 1 ? w_pos : w_neg;
  return w;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is.good()) throw PipelineError(ErrorCode::IoFailure, "truncated checkpoint");
}

template <typename T>
void write_pod(std::ostream& os, T v) {
  write_bytes(os, &v, sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  read_bytes(is, &v, sizeof(v));
  return v;
}

void write_real_vec(std::ostream& os, const std::vector<Real>& v) {
  write_pod<std::uint64_t>(os, v.size());
  write_bytes(os, v.data(), sizeof(Real) * v.size());
}

std::vector<Real> read_real_vec(std::istream& is) {
  const auto n = read_pod<std::uint64_t>(is);
  std::vector<Real> v(n);
  read_bytes(is, v.data(), sizeof(Real) * n);
  return v;
}

bool improves(const TrainState& state, double val_auc, const TrainConfig& config) {
  return val_auc > state.best_val_auc + config.min_delta;
}

double evaluate_val_auc(Model& model, const std::vector<TrainItem>& val, const ImageLoader& load,
                        int batch_size) {
  ScoredSet set;
  std::vector<ModelInput> batch;
  std::vector<std::size_t> members;
  const auto flush = [&]() {
    if (batch.empty()) return;
    const std::vector<double> probs = model.forward(batch, Mode::Eval, nullptr);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const TrainItem& item = val[members[j]];
      set.samples.push_back({item.image_id, probs[j], item.label});
    }
    batch.clear();
    members.clear();
  };
  for (std::size_t i = 0; i < val.size(); ++i) {
    batch.push_back(load(val[i].image_id));
    members.push_back(i);
    if (static_cast<int>(batch.size()) == batch_size) flush();
  }
  flush();
  return roc_auc(set);
}

}  // namespace

void validate_train_config(const TrainConfig& config) {
  const bool ok = config.epochs >= 1 && config.batch_size >= 1 && config.lr_initial > 0.0 &&
                  config.lr_floor > 0.0 && config.lr_floor <= config.lr_initial &&
                  config.plateau_factor > 0.0 && config.plateau_factor < 1.0 &&
                  config.plateau_patience >= 1 && config.min_delta >= 0.0 &&
                  config.dropout >= 0.0 && config.dropout < 1.0;
  if (!ok) throw PipelineError(ErrorCode::InvalidConfig, "training configuration out of range");
}

double balanced_bce(const std::vector<double>& probs, const std::vector<int>& labels) {
  check_pair(probs, labels);
  const std::vector<double> w = class_weights(labels);
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    loss += w[i] * (labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p));
  }
  return loss;
}

std::vector<double> balanced_bce_prob_grad(const std::vector<double>& probs,
                                           const std::vector<int>& labels) {
  check_pair(probs, labels);
  const std::vector<double> w = class_weights(labels);
  std::vector<double> grad(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    grad[i] = w[i] * (p - labels[i]) / (p * (1.0 - p));
  }
  return grad;
}

std::vector<double> balanced_bce_logit_grad(const std::vector<double>& probs,
                                            const std::vector<int>& labels) {
  check_pair(probs, labels);
  const std::vector<double> w = class_weights(labels);
  std::vector<double> grad(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    grad[i] = w[i] * (clamp_prob(probs[i]) - labels[i]);
  }
  return grad;
}

TrainState plateau_step(TrainState state, double val_auc, const TrainConfig& config) {
  if (!(val_auc >= 0.0 && val_auc <= 1.0)) {
    throw PipelineError(ErrorCode::OutOfRange, "validation AUC outside [0,1]");
  }
  if (improves(state, val_auc, config)) {
    state.best_val_auc = val_auc;
    state.epochs_since_improvement = 0;
  } else {
    ++state.epochs_since_improvement;
    if (state.epochs_since_improvement >= config.plateau_patience) {
      state.current_lr = std::max(state.current_lr * config.plateau_factor, config.lr_floor);
      state.epochs_since_improvement = 0;
    }
  }
  return state;
}

void capture_weights(Model& model, WeightSnapshot& out) {
  out.values.clear();
  for (ParamTensor* p : model.parameters()) out.values.push_back(p->value);
}

void restore_weights(Model& model, const WeightSnapshot& snapshot) {
  std::vector<ParamTensor*> params = model.parameters();
  if (snapshot.values.size() != params.size()) {
    throw PipelineError(ErrorCode::LengthMismatch, "weight snapshot shape mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snapshot.values[i].size() != params[i]->value.size()) {
      throw PipelineError(ErrorCode::LengthMismatch, "weight snapshot shape mismatch");
    }
    params[i]->value = snapshot.values[i];
  }
}

TrainResult train_fold(Model& model, const FoldView& fold, const ImageLoader& load,
                       const TrainConfig& config, const TrainOptions& options) {
  validate_train_config(config);
  if (fold.train.empty()) throw PipelineError(ErrorCode::EmptyPartition, "TRAIN is empty");
  if (fold.val.empty()) throw PipelineError(ErrorCode::EmptyPartition, "VAL is empty");
  bool val_has_pos = false, val_has_neg = false;
  for (const TrainItem& item : fold.val) (item.label == 1 ? val_has_pos : val_has_neg) = true;
  if (!val_has_pos || !val_has_neg) {
    throw PipelineError(ErrorCode::SingleClassSet, "VAL needs both classes for its AUC");
  }

  AdamWConfig opt_config = config.adamw;
  opt_config.lr = config.lr_initial;
  AdamW optimizer(model.parameters(), opt_config);

  TrainState state;
  WeightSnapshot best;
  int best_epoch = 0;
  int start_epoch = 1;
  if (!options.resume_from.empty()) {
    load_checkpoint(options.resume_from, model, &state, &optimizer, &best);
    start_epoch = state.epoch + 1;
    for (const EpochRecord& r : state.history) {
      if (r.val_auc == state.best_val_auc && best_epoch == 0) best_epoch = r.epoch;
    }
  } else {
    state.current_lr = config.lr_initial;
    if (options.epoch_log) *options.epoch_log << "epoch,train_loss,val_auc,lr\n";
  }

  for (int epoch = start_epoch; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(config.seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch)));
    optimizer.set_lr(state.current_lr);

    std::vector<std::size_t> order(fold.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    int batch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<ModelInput> batch;
      std::vector<int> labels;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const TrainItem& item = fold.train[order[i]];
        batch.push_back(load(item.image_id));
        labels.push_back(item.label);
      }

      const std::vector<double> probs = model.forward(batch, Mode::Train, &epoch_rng);
      const double loss = balanced_bce(probs, labels);
      if (!std::isfinite(loss)) {
        throw PipelineError(ErrorCode::NonFiniteLoss,
                            "epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(batch_count + 1));
      }
      optimizer.zero_grad();
      model.backward(balanced_bce_logit_grad(probs, labels));
      optimizer.step();
      loss_sum += loss;
      ++batch_count;
    }
    const double train_loss = loss_sum / batch_count;

    const double val_auc = evaluate_val_auc(model, fold.val, load, config.batch_size);
    if (improves(state, val_auc, config)) {
      capture_weights(model, best);
      best_epoch = epoch;
    }
    state = plateau_step(std::move(state), val_auc, config);
    state.epoch = epoch;
    state.history.push_back({epoch, train_loss, val_auc, state.current_lr});
    if (options.epoch_log) {
      *options.epoch_log << epoch << ',' << format_real(train_loss) << ','
                         << format_real(val_auc) << ',' << format_real(state.current_lr) << '\n';
    }
  }

  if (!options.checkpoint_path.empty()) {
    save_checkpoint(model, state, optimizer, best, config.seed, options.checkpoint_extra,
                    options.checkpoint_path);
  }

  TrainResult result;
  result.state = std::move(state);
  result.best_weights = std::move(best);
  result.best_val_auc = result.state.best_val_auc;
  result.best_epoch = best_epoch;
  return result;
}

void save_checkpoint(Model& model, const TrainState& state, AdamW& optimizer,
                     const WeightSnapshot& best, std::uint64_t seed,
                     const std::map<std::string, std::string>& extra, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw PipelineError(ErrorCode::IoFailure, "cannot write '" + path + "'");

  write_bytes(os, kCheckpointMagic, sizeof(kCheckpointMagic));
  model.save_weights(os);

  write_pod<std::uint8_t>(os, best.empty() ? 0 : 1);
  if (!best.empty()) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(best.values.size()));
    for (const auto& v : best.values) write_real_vec(os, v);
  }

  write_pod<std::uint64_t>(os, static_cast<std::uint64_t>(optimizer.step_count()));
  for (const auto& m : optimizer.moments_m()) write_real_vec(os, m);
  for (const auto& v : optimizer.moments_v()) write_real_vec(os, v);

  write_pod<std::int32_t>(os, state.epoch);
  write_pod<double>(os, state.current_lr);
  write_pod<double>(os, state.best_val_auc);
  write_pod<std::int32_t>(os, state.epochs_since_improvement);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(state.history.size()));
  for (const EpochRecord& r : state.history) {
    write_pod<std::int32_t>(os, r.epoch);
    write_pod<double>(os, r.train_loss);
    write_pod<double>(os, r.val_auc);
    write_pod<double>(os, r.lr);
  }
  if (!os.good()) throw PipelineError(ErrorCode::IoFailure, "failed to write '" + path + "'");
  os.close();

  nlohmann::json meta;
  meta["backbone"] = model.spec().name;
  meta["feature_dim"] = model.spec().feature_dim;
  meta["seed"] = seed;
  meta["epoch"] = state.epoch;
  meta["best_val_auc"] = state.best_val_auc;
  for (const auto& [k, v] : extra) meta[k] = v;
  std::ofstream ms(path + ".meta.json", std::ios::binary);
  if (!ms) throw PipelineError(ErrorCode::IoFailure, "cannot write '" + path + ".meta.json'");
  ms << meta.dump(2) << "\n";
  if (!ms.good()) throw PipelineError(ErrorCode::IoFailure, "failed to write checkpoint sidecar");
}

void load_checkpoint(const std::string& path, Model& model, TrainState* state, AdamW* optimizer,
                     WeightSnapshot* best) {
  const CheckpointMeta meta = read_checkpoint_meta(path);
  if (meta.backbone != model.spec().name || meta.feature_dim != model.spec().feature_dim) {
    throw PipelineError(ErrorCode::MetadataMismatch,
                        "checkpoint is for '" + meta.backbone + "' (width " +
                            std::to_string(meta.feature_dim) + "), model is '" +
                            model.spec().name + "'");
  }

  std::ifstream is(path, std::ios::binary);
  if (!is) throw PipelineError(ErrorCode::MissingFile, "cannot read '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  read_bytes(is, magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw PipelineError(ErrorCode::MetadataMismatch, "'" + path + "' is not a checkpoint");
  }
  model.load_weights(is);

  const auto has_best = read_pod<std::uint8_t>(is);
  WeightSnapshot best_local;
  if (has_best) {
    const auto n = read_pod<std::uint32_t>(is);
    best_local.values.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) best_local.values.push_back(read_real_vec(is));
  }
  if (best) *best = std::move(best_local);

  const auto step_count = read_pod<std::uint64_t>(is);
  const std::size_t n_params = model.parameters().size();
  std::vector<std::vector<Real>> m(n_params), v(n_params);
  for (std::size_t i = 0; i < n_params; ++i) m[i] = read_real_vec(is);
  for (std::size_t i = 0; i < n_params; ++i) v[i] = read_real_vec(is);
  if (optimizer) {
    if (optimizer->moments_m().size() != n_params) {
      throw PipelineError(ErrorCode::MetadataMismatch, "optimizer shape mismatch");
    }
    optimizer->moments_m() = std::move(m);
    optimizer->moments_v() = std::move(v);
    optimizer->set_step_count(static_cast<long>(step_count));
  }

  TrainState st;
  st.epoch = read_pod<std::int32_t>(is);
  st.current_lr = read_pod<double>(is);
  st.best_val_auc = read_pod<double>(is);
  st.epochs_since_improvement = read_pod<std::int32_t>(is);
  const auto n_hist = read_pod<std::uint32_t>(is);
  st.history.reserve(n_hist);
  for (std::uint32_t i = 0; i < n_hist; ++i) {
    EpochRecord r;
    r.epoch = read_pod<std::int32_t>(is);
    r.train_loss = read_pod<double>(is);
    r.val_auc = read_pod<double>(is);
    r.lr = read_pod<double>(is);
    st.history.push_back(r);
  }
  if (state) *state = std::move(st);
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  const std::string meta_path = path + ".meta.json";
  std::ifstream ms(meta_path, std::ios::binary);
  if (!ms) throw PipelineError(ErrorCode::MissingFile, "cannot read '" + meta_path + "'");
  nlohmann::json j;
  try {
    ms >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(ErrorCode::MetadataMismatch,
                        "bad checkpoint sidecar '" + meta_path + "': " + e.what());
  }

  CheckpointMeta meta;
  try {
    meta.backbone = j.at("backbone").get<std::string>();
    meta.feature_dim = j.at("feature_dim").get<int>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.epoch = j.at("epoch").get<int>();
    meta.best_val_auc = j.at("best_val_auc").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(ErrorCode::MetadataMismatch,
                        "incomplete checkpoint sidecar '" + meta_path + "': " + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "backbone" && key != "feature_dim" && key != "seed" && key != "epoch" &&
        key != "best_val_auc" && value.is_string()) {
      meta.extra[key] = value.get<std::string>();
    }
  }
  return meta;
}

}  // namespace sonoclass
