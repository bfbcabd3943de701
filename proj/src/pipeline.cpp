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

#include "sonoclass/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "sonoclass/augment.hpp"
#include "sonoclass/cv_split.hpp"
#include "sonoclass/error.hpp"
#include "sonoclass/figures.hpp"
#include "sonoclass/manifest.hpp"
#include "sonoclass/model_zoo.hpp"
#include "sonoclass/png_io.hpp"
#include "sonoclass/preprocess.hpp"
#include "sonoclass/report.hpp"
#include "sonoclass/synthetic.hpp"
#include "sonoclass/trainer.hpp"

namespace sonoclass {
namespace fs = std::filesystem;
namespace {

using nlohmann::json;

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t file_fnv1a(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  const std::string bytes = os.str();
  return fnv1a64(bytes.data(), bytes.size());
}

// Writes only when the content differs, which keeps re-runs from touching
// files that are already correct.
void write_text_if_changed(const std::string& path, const std::string& content) {
  {
    std::ifstream f(path, std::ios::binary);
    if (f) {
      std::ostringstream os;
      os << f.rdbuf();
      if (os.str() == content) return;
    }
  }
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write '" + path + "'");
  f << content;
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write to '" + path + "'");
}

// Rounds standardized pixels onto the 8-bit grid the prepared store uses, so
// images that skip the store (second test set) see the same quantization.
GrayscaleImage quantize8(GrayscaleImage img) {
  for (double& p : img.pixels) {
    p = static_cast<double>(std::lround(std::min(255.0, std::max(0.0, p))));
  }
  return img;
}

int backbone_index(const std::string& name) {
  const std::vector<std::string> names = backbone_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw PipelineError(ErrorCode::UnknownBackbone, "unknown backbone '" + name + "'");
  }
  return static_cast<int>(it - names.begin());
}

// Per-(backbone, fold) seed streams, independent of which folds a given
// invocation trains.
std::uint64_t fold_train_seed(const RunConfig& config, const std::string& model, int fold) {
  return derive_seed(derive_seed(config.seed, 0xB4C00000ull + backbone_index(model)),
                     0x70AD0000ull + static_cast<std::uint64_t>(fold));
}

std::uint64_t fold_init_seed(const RunConfig& config, const std::string& model, int fold) {
  return derive_seed(derive_seed(config.seed, 0x14170000ull + backbone_index(model)),
                     static_cast<std::uint64_t>(fold));
}

Manifest load_prepared(const PipelinePaths& paths) {
  if (!fs::exists(paths.prepared_manifest())) {
    throw PipelineError(ErrorCode::MissingFile,
                        "no prepared manifest at " + paths.prepared_manifest() +
                            " (run prepare first)");
  }
  return load_manifest(paths.prepared_manifest(), true);
}

FoldPlan load_plan(const RunConfig& config, const PipelinePaths& paths) {
  if (!fs::exists(paths.fold_plan())) {
    throw PipelineError(ErrorCode::MissingFile,
                        "no fold plan at " + paths.fold_plan() + " (run split first)");
  }
  FoldPlan plan = load_fold_plan_file(paths.fold_plan());
  if (static_cast<int>(plan.folds.size()) != config.k) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "fold plan has " + std::to_string(plan.folds.size()) +
                            " folds but the config wants " + std::to_string(config.k));
  }
  return plan;
}

// Image ids resolved and decoded on demand; decoded images stay cached for
// the many epochs that revisit them.
class ImageStore {
 public:
  void add(const std::string& id, const std::string& path, bool quantize = false) {
    paths_[id] = {path, quantize};
  }

  bool has(const std::string& id) const { return paths_.count(id) != 0; }

  const GrayscaleImage& image(const std::string& id) {
    auto hit = cache_.find(id);
    if (hit != cache_.end()) return hit->second;
    auto it = paths_.find(id);
    if (it == paths_.end()) {
      throw PipelineError(ErrorCode::MissingFile, "image id '" + id + "' has no known file");
    }
    PngReadResult r = read_png(it->second.path);
    GrayscaleImage img = it->second.quantize ? quantize8(std::move(r.image)) : std::move(r.image);
    return cache_.emplace(id, std::move(img)).first->second;
  }

  ModelInput input(const std::string& id) { return to_model_input(image(id)); }

 private:
  struct Entry {
    std::string path;
    bool quantize = false;
  };
  std::unordered_map<std::string, Entry> paths_;
  std::unordered_map<std::string, GrayscaleImage> cache_;
};

struct FoldAugmentation {
  std::vector<ImageRecord> records;  // is_augmented rows, paths under aug_dir
};

// Balances a fold's TRAIN partition by materializing augmented copies of the
// minority class under the fold directory. Deterministic in (config, fold).
FoldAugmentation materialize_fold_augmentation(const RunConfig& config,
                                               const PipelinePaths& paths,
                                               const Manifest& prepared, const FoldPlan& plan,
                                               int fold, const std::string& hash_hex) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < prepared.records.size(); ++i) {
    index[prepared.records[i].image_id] = i;
  }

  Manifest sub;
  sub.base_dir = prepared.base_dir;
  for (const std::string& id : plan.folds[fold].train_image_ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw PipelineError(ErrorCode::MissingFile,
                          "fold plan names unknown image '" + id + "'");
    }
    sub.records.push_back(prepared.records[it->second]);
  }
  validate_manifest(sub, false);

  Rng rng(derive_seed(config.seed, 0xA7600000ull + static_cast<std::uint64_t>(fold)));
  const BalancePlan bplan = plan_balancing(sub, rng);
  std::vector<ImageRecord> recs = plan_records(sub, bplan);

  fs::create_directories(paths.aug_dir(fold));
  std::map<std::string, std::size_t> sub_index;
  for (std::size_t i = 0; i < sub.records.size(); ++i) sub_index[sub.records[i].image_id] = i;

  for (std::size_t i = 0; i < recs.size(); ++i) {
    const BalanceAddition& add = bplan.additions[i];
    const ImageRecord& parent = sub.records[sub_index.at(add.parent_image_id)];
    const PngReadResult src = read_png(sub.resolve_path(parent));
    const GrayscaleImage out = quantize8(apply_augment(src.image, add.params));
    const std::string file = paths.aug_dir(fold) + "/" + recs[i].image_id + ".png";
    write_png8(file, out,
               {{"config_hash", hash_hex},
                {"parent", add.parent_image_id},
                {"fold", std::to_string(fold)}});
    recs[i].path = "aug/" + recs[i].image_id + ".png";
  }

  // Fold-local manifest for auditing: originals resolve back into the
  // prepared store, augmented rows into this fold's aug directory. Paths are
  // kept relative so the file's bytes do not depend on where the run lives.
  Manifest fold_manifest;
  fold_manifest.base_dir = paths.fold_dir(fold);
  for (const ImageRecord& rec : sub.records) {
    ImageRecord r = rec;
    r.path = "../prepared/" + rec.path;
    fold_manifest.records.push_back(std::move(r));
  }
  for (const ImageRecord& rec : recs) fold_manifest.records.push_back(rec);
  validate_manifest(fold_manifest, false);
  save_manifest(fold_manifest, paths.fold_train_manifest(fold), "config_hash=" + hash_hex);

  FoldAugmentation out;
  out.records = std::move(recs);
  return out;
}

std::vector<double> score_ids(Model& model, ImageStore& store,
                              const std::vector<std::string>& ids, int batch_size) {
  std::vector<double> scores;
  scores.reserve(ids.size());
  std::vector<ModelInput> batch;
  for (std::size_t i = 0; i < ids.size();) {
    batch.clear();
    const std::size_t end = std::min(ids.size(), i + static_cast<std::size_t>(batch_size));
    for (std::size_t j = i; j < end; ++j) batch.push_back(store.input(ids[j]));
    const std::vector<double> probs = model.forward(batch, Mode::Eval, nullptr);
    scores.insert(scores.end(), probs.begin(), probs.end());
    i = end;
  }
  return scores;
}

}  // namespace

PipelinePaths::PipelinePaths(const RunConfig& config) : root_(config.output_dir) {}

std::string PipelinePaths::prepared_dir() const { return root_ + "/prepared"; }
std::string PipelinePaths::prepared_images_dir() const { return prepared_dir() + "/images"; }
std::string PipelinePaths::prepared_manifest() const { return prepared_dir() + "/manifest.csv"; }
std::string PipelinePaths::prepare_index() const { return prepared_dir() + "/index.json"; }

std::string PipelinePaths::fold_plan() const { return root_ + "/fold_plan.csv"; }

std::string PipelinePaths::fold_dir(int fold) const {
  return root_ + "/fold" + std::to_string(fold);
}
std::string PipelinePaths::aug_dir(int fold) const { return fold_dir(fold) + "/aug"; }
std::string PipelinePaths::fold_train_manifest(int fold) const {
  return fold_dir(fold) + "/train_manifest.csv";
}

std::string PipelinePaths::logs_dir() const { return root_ + "/logs"; }
std::string PipelinePaths::epoch_log(const std::string& model, int fold) const {
  return logs_dir() + "/" + model + "_fold" + std::to_string(fold) + ".csv";
}

std::string PipelinePaths::checkpoints_dir() const { return root_ + "/checkpoints"; }
std::string PipelinePaths::best_checkpoint(const std::string& model, int fold) const {
  return checkpoints_dir() + "/" + model + "_fold" + std::to_string(fold) + "_best.ckpt";
}
std::string PipelinePaths::last_checkpoint(const std::string& model, int fold) const {
  return checkpoints_dir() + "/" + model + "_fold" + std::to_string(fold) + "_last.ckpt";
}

std::string PipelinePaths::metrics_dir() const { return root_ + "/metrics"; }
std::string PipelinePaths::metrics_json(const std::string& model, int fold, TestSet set) const {
  return metrics_dir() + "/" + model + "_fold" + std::to_string(fold) + "_" +
         test_set_name(set) + ".json";
}
std::string PipelinePaths::scores_csv(const std::string& model, int fold, TestSet set) const {
  return metrics_dir() + "/" + model + "_fold" + std::to_string(fold) + "_" +
         test_set_name(set) + "_scores.csv";
}

std::string PipelinePaths::figures_dir() const { return root_ + "/figures"; }
std::string PipelinePaths::roc_tsv(const std::string& model) const {
  return figures_dir() + "/roc_" + model + ".tsv";
}
std::string PipelinePaths::roc_png(const std::string& model) const {
  return figures_dir() + "/roc_" + model + ".png";
}
std::string PipelinePaths::roc_all_png() const { return figures_dir() + "/roc_all.png"; }
std::string PipelinePaths::confusion_png(const std::string& model) const {
  return figures_dir() + "/confusion_" + model + ".png";
}

std::string PipelinePaths::report_md() const { return root_ + "/report.md"; }

void cmd_synth(const RunConfig& config) {
  validate_run_config(config);
  SynthConfig sc = config.synth;
  sc.seed = config.seed;
  const fs::path manifest_path = config.manifest;
  const std::string out_dir = manifest_path.parent_path().string();
  if (out_dir.empty()) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "manifest path needs a parent directory for synth output");
  }
  Manifest m = generate_synthetic(sc, out_dir);
  // Rewrite with provenance; paths inside stay relative to the manifest.
  save_manifest(m, config.manifest, "config_hash=" + config_hash_hex(config));
}

void cmd_prepare(const RunConfig& config) {
  validate_run_config(config);
  const PipelinePaths paths(config);
  const std::string hash = config_hash_hex(config);

  Manifest input = load_manifest(config.manifest, true);
  for (const ImageRecord& rec : input.records) {
    if (rec.is_augmented) {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "prepare expects original images only; '" + rec.image_id +
                              "' is augmented");
    }
  }

  fs::create_directories(paths.prepared_images_dir());

  // The index remembers the source hash behind every prepared image. Entries
  // under a different config hash are stale: the target geometry may differ.
  json old_entries = json::object();
  {
    std::ifstream f(paths.prepare_index());
    if (f) {
      json idx = json::parse(f, nullptr, false);
      if (idx.is_object() && idx.value("config_hash", "") == hash && idx.contains("entries")) {
        old_entries = idx["entries"];
      }
    }
  }

  json new_entries = json::object();
  Manifest prepared;
  prepared.base_dir = paths.prepared_dir();
  for (const ImageRecord& rec : input.records) {
    const std::string src = input.resolve_path(rec);
    const std::string src_hash = hex16(file_fnv1a(src));
    const std::string rel = "images/" + rec.image_id + ".png";
    const std::string dst = paths.prepared_dir() + "/" + rel;

    const bool reusable = old_entries.contains(rec.image_id) &&
                          old_entries[rec.image_id].value("source_hash", "") == src_hash &&
                          fs::exists(dst);
    if (!reusable) {
      PngReadResult r;
      try {
        r = read_png(src);
      } catch (const PipelineError& e) {
        throw PipelineError(ErrorCode::MissingFile,
                            "record '" + rec.image_id + "': " + e.what());
      }
      const GrayscaleImage out = standardize(r.image, config.image_size);
      write_png8(dst, out,
                 {{"config_hash", hash},
                  {"image_id", rec.image_id},
                  {"source_hash", src_hash}});
    }
    new_entries[rec.image_id] = {{"source_hash", src_hash}, {"file", rel}};

    ImageRecord out = rec;
    out.path = rel;
    prepared.records.push_back(std::move(out));
  }

  json index;
  index["config_hash"] = hash;
  index["entries"] = new_entries;
  write_text_if_changed(paths.prepare_index(), index.dump(2) + "\n");

  {
    // Same layout save_manifest writes, routed through write_text_if_changed
    // so an unchanged re-run leaves the file untouched.
    std::ostringstream os;
    os << "# config_hash=" << hash << "\n";
    os << "image_id,patient_id,label,source,path,is_augmented,augment_parent\n";
    for (const ImageRecord& rec : prepared.records) {
      os << rec.image_id << ',' << rec.patient_id << ',' << label_name(rec.label) << ','
         << source_name(rec.source) << ',' << rec.path << ',' << (rec.is_augmented ? 1 : 0)
         << ',' << rec.augment_parent << '\n';
    }
    write_text_if_changed(paths.prepared_manifest(), os.str());
  }
}

void cmd_split(const RunConfig& config) {
  validate_run_config(config);
  const PipelinePaths paths(config);
  const Manifest prepared = load_prepared(paths);

  FoldPlan plan = make_folds(prepared, config.k, config.seed);
  const LeakageReport report = verify_no_leakage(plan, prepared);
  if (!report.clean()) {
    std::string msg = "refusing to write a leaking fold plan:";
    for (const std::string& v : report.violations) msg += "\n  " + v;
    throw PipelineError(ErrorCode::InvalidLineage, msg);
  }
  save_fold_plan_file(plan, paths.fold_plan(), "config_hash=" + config_hash_hex(config));
}

void cmd_train(const RunConfig& config, int fold_index) {
  validate_run_config(config);
  const PipelinePaths paths(config);
  const std::string hash = config_hash_hex(config);
  const Manifest prepared = load_prepared(paths);
  const FoldPlan plan = load_plan(config, paths);

  if (fold_index >= config.k) {
    throw PipelineError(ErrorCode::OutOfRange,
                        "fold index " + std::to_string(fold_index) + " out of range for k=" +
                            std::to_string(config.k));
  }
  std::vector<int> folds;
  if (fold_index < 0) {
    for (int f = 0; f < config.k; ++f) folds.push_back(f);
  } else {
    folds.push_back(fold_index);
  }

  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& rec : prepared.records) by_id[rec.image_id] = &rec;
  const auto label_of = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw PipelineError(ErrorCode::MissingFile, "fold plan names unknown image '" + id + "'");
    }
    return label_value(it->second->label);
  };

  fs::create_directories(paths.logs_dir());
  fs::create_directories(paths.checkpoints_dir());

  // A plan edited behind the pipeline's back must not reach training.
  {
    const LeakageReport base = verify_no_leakage(plan, prepared);
    if (!base.clean()) {
      throw PipelineError(ErrorCode::InvalidLineage,
                          "fold plan failed leakage verification: " + base.violations.front());
    }
  }

  for (int f : folds) {
    const FoldAugmentation aug =
        materialize_fold_augmentation(config, paths, prepared, plan, f, hash);

    // Leakage gate over the augmented view before any training happens.
    {
      FoldPlan extended = plan;
      attach_training_augmentation(extended, f, aug.records);
      Manifest view = prepared;
      for (const ImageRecord& rec : aug.records) view.records.push_back(rec);
      validate_manifest(view, false);
      const LeakageReport rep = verify_no_leakage(extended, view);
      if (!rep.clean()) {
        throw PipelineError(ErrorCode::AugmentSourceOutsideTrain,
                            "augmented view failed leakage verification: " +
                                rep.violations.front());
      }
    }

    FoldView view;
    for (const std::string& id : plan.folds[f].train_image_ids) {
      view.train.push_back({id, label_of(id)});
    }
    for (const ImageRecord& rec : aug.records) {
      view.train.push_back({rec.image_id, label_value(rec.label)});
    }
    for (const std::string& id : plan.folds[f].val_image_ids) {
      view.val.push_back({id, label_of(id)});
    }

    ImageStore store;
    for (const std::string& id : plan.folds[f].train_image_ids) {
      store.add(id, prepared.resolve_path(*by_id.at(id)));
    }
    for (const std::string& id : plan.folds[f].val_image_ids) {
      store.add(id, prepared.resolve_path(*by_id.at(id)));
    }
    for (const ImageRecord& rec : aug.records) {
      store.add(rec.image_id, paths.fold_dir(f) + "/" + rec.path);
    }
    const ImageLoader loader = [&store](const std::string& id) { return store.input(id); };

    for (const std::string& backbone : config.backbones) {
      TrainConfig tc = config.train;
      tc.seed = fold_train_seed(config, backbone, f);

      BackboneSpec spec{backbone, 0, config.pretrained};
      BuildOptions bo;
      bo.dropout = tc.dropout;
      bo.init_seed = fold_init_seed(config, backbone, f);
      bo.weight_source = config.weight_source;
      Model model = build_model(spec, bo);

      std::ofstream log(paths.epoch_log(backbone, f), std::ios::trunc | std::ios::binary);
      if (!log) {
        throw PipelineError(ErrorCode::IoFailure,
                            "cannot write " + paths.epoch_log(backbone, f));
      }
      log << "# config_hash=" << hash << "\n";

      TrainOptions to;
      to.epoch_log = &log;
      to.checkpoint_path = paths.last_checkpoint(backbone, f);
      to.checkpoint_extra = {{"config_hash", hash},
                             {"fold", std::to_string(f)},
                             {"run_seed", std::to_string(config.seed)},
                             {"role", "last"}};
      const TrainResult result = train_fold(model, view, loader, tc, to);
      if (!log) {
        throw PipelineError(ErrorCode::IoFailure,
                            "short write to " + paths.epoch_log(backbone, f));
      }

      // The evaluation checkpoint holds the best-validation weights.
      restore_weights(model, result.best_weights);
      AdamW fresh_opt(model.parameters(), tc.adamw);
      save_checkpoint(model, result.state, fresh_opt, result.best_weights, tc.seed,
                      {{"config_hash", hash},
                       {"fold", std::to_string(f)},
                       {"run_seed", std::to_string(config.seed)},
                       {"role", "best"},
                       {"best_epoch", std::to_string(result.best_epoch)}},
                      paths.best_checkpoint(backbone, f));
    }
  }
}

void cmd_evaluate(const RunConfig& config) {
  validate_run_config(config);
  const PipelinePaths paths(config);
  const std::string hash = config_hash_hex(config);
  const Manifest prepared = load_prepared(paths);
  const FoldPlan plan = load_plan(config, paths);

  std::map<std::string, const ImageRecord*> by_id;
  for (const ImageRecord& rec : prepared.records) by_id[rec.image_id] = &rec;

  const bool want_test2 = !config.test2_manifest.empty();
  Manifest test2;
  if (want_test2) {
    test2 = load_manifest(config.test2_manifest, true);
    for (const ImageRecord& rec : test2.records) {
      if (rec.is_augmented) {
        throw PipelineError(ErrorCode::InvalidConfig,
                            "second test manifest must not contain augmented rows");
      }
    }
  }

  fs::create_directories(paths.metrics_dir());

  // Second-test images are shared by every fold and backbone; decode and
  // standardize them once.
  ImageStore test2_store;
  if (want_test2) {
    for (const ImageRecord& rec : test2.records) {
      test2_store.add(rec.image_id, test2.resolve_path(rec));
    }
  }
  std::unordered_map<std::string, GrayscaleImage> test2_standardized;
  const auto test2_input = [&](const std::string& id) {
    auto it = test2_standardized.find(id);
    if (it == test2_standardized.end()) {
      const GrayscaleImage std_img =
          quantize8(standardize(test2_store.image(id), config.image_size));
      it = test2_standardized.emplace(id, std_img).first;
    }
    return to_model_input(it->second);
  };

  for (const std::string& backbone : config.backbones) {
    for (int f = 0; f < config.k; ++f) {
      const std::string ckpt = paths.best_checkpoint(backbone, f);
      if (!fs::exists(ckpt)) {
        throw PipelineError(ErrorCode::MissingCheckpoint,
                            "no checkpoint at " + ckpt + " (run train first)");
      }
      const CheckpointMeta meta = read_checkpoint_meta(ckpt);
      const auto hash_it = meta.extra.find("config_hash");
      if (hash_it == meta.extra.end() || hash_it->second != hash) {
        throw PipelineError(ErrorCode::ConfigHashMismatch,
                            "checkpoint " + ckpt + " belongs to a different configuration");
      }

      BackboneSpec spec{backbone, meta.feature_dim, false};
      BuildOptions bo;
      bo.dropout = config.train.dropout;
      bo.init_seed = 0;
      Model model = build_model(spec, bo);
      load_checkpoint(ckpt, model, nullptr, nullptr, nullptr);

      ImageStore store;
      for (const std::string& id : plan.folds[f].test_image_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
          throw PipelineError(ErrorCode::MissingFile,
                              "fold plan names unknown image '" + id + "'");
        }
        store.add(id, prepared.resolve_path(*it->second));
      }

      ScoredSet test1_scores;
      test1_scores.fold_index = f;
      test1_scores.model_name = backbone;
      test1_scores.test_set = TestSet::Test1;
      {
        const std::vector<std::string>& ids = plan.folds[f].test_image_ids;
        const std::vector<double> probs =
            score_ids(model, store, ids, config.train.batch_size);
        for (std::size_t i = 0; i < ids.size(); ++i) {
          test1_scores.samples.push_back(
              {ids[i], probs[i], label_value(by_id.at(ids[i])->label)});
        }
      }
      const ConfusionMatrix m1 = confusion(test1_scores, 0.5);
      FoldMetricsFile f1;
      f1.model = backbone;
      f1.fold = f;
      f1.test_set = TestSet::Test1;
      f1.config_hash = hash;
      f1.seed = config.seed;
      f1.matrix = m1;
      f1.metrics = fold_metrics(m1, test1_scores);
      write_fold_metrics_json(paths.metrics_json(backbone, f, TestSet::Test1), f1);
      write_scores_csv(paths.scores_csv(backbone, f, TestSet::Test1), test1_scores, hash);

      if (want_test2) {
        // A patient whose stills were available to this fold's training or
        // validation is excluded from its second-test scoring.
        std::set<std::string> seen_patients;
        for (const std::string& id : plan.folds[f].train_image_ids) {
          seen_patients.insert(by_id.at(id)->patient_id);
        }
        for (const std::string& id : plan.folds[f].val_image_ids) {
          seen_patients.insert(by_id.at(id)->patient_id);
        }

        ScoredSet test2_scores;
        test2_scores.fold_index = f;
        test2_scores.model_name = backbone;
        test2_scores.test_set = TestSet::Test2;
        std::vector<std::string> ids;
        for (const ImageRecord& rec : test2.records) {
          if (!seen_patients.count(rec.patient_id)) ids.push_back(rec.image_id);
        }
        if (ids.empty()) {
          throw PipelineError(ErrorCode::EmptyBatch,
                              "every second-test patient overlaps fold " + std::to_string(f) +
                                  " training/validation");
        }
        std::vector<ModelInput> batch;
        std::vector<double> probs;
        for (std::size_t i = 0; i < ids.size();) {
          batch.clear();
          const std::size_t end =
              std::min(ids.size(), i + static_cast<std::size_t>(config.train.batch_size));
          for (std::size_t j = i; j < end; ++j) batch.push_back(test2_input(ids[j]));
          const std::vector<double> p = model.forward(batch, Mode::Eval, nullptr);
          probs.insert(probs.end(), p.begin(), p.end());
          i = end;
        }
        std::map<std::string, const ImageRecord*> t2_by_id;
        for (const ImageRecord& rec : test2.records) t2_by_id[rec.image_id] = &rec;
        for (std::size_t i = 0; i < ids.size(); ++i) {
          test2_scores.samples.push_back(
              {ids[i], probs[i], label_value(t2_by_id.at(ids[i])->label)});
        }
        const ConfusionMatrix m2 = confusion(test2_scores, 0.5);
        FoldMetricsFile f2;
        f2.model = backbone;
        f2.fold = f;
        f2.test_set = TestSet::Test2;
        f2.config_hash = hash;
        f2.seed = config.seed;
        f2.matrix = m2;
        f2.metrics = fold_metrics(m2, test2_scores);
        write_fold_metrics_json(paths.metrics_json(backbone, f, TestSet::Test2), f2);
        write_scores_csv(paths.scores_csv(backbone, f, TestSet::Test2), test2_scores, hash);
      }
    }
  }
}

void cmd_report(const RunConfig& config) {
  validate_run_config(config);
  const PipelinePaths paths(config);
  const std::string hash = config_hash_hex(config);
  const bool want_test2 = !config.test2_manifest.empty();

  ReportBundle bundle;
  bundle.config_hash = hash;
  bundle.seed = config.seed;
  bundle.k = config.k;

  fs::create_directories(paths.figures_dir());

  std::vector<NamedRocCurve> all_curves;
  for (const std::string& backbone : config.backbones) {
    ModelResults mr;
    mr.model = backbone;
    ConfusionMatrix summed;
    for (int f = 0; f < config.k; ++f) {
      const std::string file = paths.metrics_json(backbone, f, TestSet::Test1);
      if (!fs::exists(file)) {
        throw PipelineError(ErrorCode::MissingFile,
                            "no metrics at " + file + " (run evaluate first)");
      }
      const FoldMetricsFile fm = read_fold_metrics_json(file);
      if (fm.config_hash != hash) {
        throw PipelineError(ErrorCode::ConfigHashMismatch,
                            file + " belongs to a different configuration");
      }
      mr.test1.folds.push_back(fm.metrics);
      summed.tp += fm.matrix.tp;
      summed.fp += fm.matrix.fp;
      summed.tn += fm.matrix.tn;
      summed.fn += fm.matrix.fn;
      summed.threshold = fm.matrix.threshold;
    }
    mr.test1.row = aggregate(mr.test1.folds, config.k);

    if (want_test2) {
      mr.has_test2 = true;
      for (int f = 0; f < config.k; ++f) {
        const std::string file = paths.metrics_json(backbone, f, TestSet::Test2);
        if (!fs::exists(file)) {
          throw PipelineError(ErrorCode::MissingFile,
                              "no metrics at " + file + " (run evaluate first)");
        }
        const FoldMetricsFile fm = read_fold_metrics_json(file);
        if (fm.config_hash != hash) {
          throw PipelineError(ErrorCode::ConfigHashMismatch,
                              file + " belongs to a different configuration");
        }
        mr.test2.folds.push_back(fm.metrics);
      }
      mr.test2.row = aggregate(mr.test2.folds, config.k);
    }

    // Fold test partitions are disjoint, so pooling their scores gives one
    // run-level ROC per model.
    ScoredSet pooled;
    pooled.model_name = backbone;
    pooled.test_set = TestSet::Test1;
    for (int f = 0; f < config.k; ++f) {
      const ScoresFile sf = read_scores_csv(paths.scores_csv(backbone, f, TestSet::Test1));
      if (sf.config_hash != hash) {
        throw PipelineError(ErrorCode::ConfigHashMismatch,
                            paths.scores_csv(backbone, f, TestSet::Test1) +
                                " belongs to a different configuration");
      }
      pooled.samples.insert(pooled.samples.end(), sf.scores.samples.begin(),
                            sf.scores.samples.end());
    }
    const std::vector<RocPoint> curve = roc_curve(pooled);
    write_roc_tsv(paths.roc_tsv(backbone), curve, hash);
    NamedRocCurve named{backbone, curve, roc_auc(pooled)};
    write_png8(paths.roc_png(backbone),
               render_roc_figure({named}, "ROC " + backbone + " (POOLED TEST FOLDS)"),
               {{"config_hash", hash}});
    all_curves.push_back(std::move(named));

    write_png8(paths.confusion_png(backbone),
               render_confusion_figure(summed, "CONFUSION " + backbone + " (SUMMED FOLDS)"),
               {{"config_hash", hash}});

    bundle.models.push_back(std::move(mr));
  }

  if (all_curves.size() > 1) {
    write_png8(paths.roc_all_png(), render_roc_figure(all_curves, "ROC (POOLED TEST FOLDS)"),
               {{"config_hash", hash}});
  }

  for (std::size_t i = 0; i < bundle.models.size(); ++i) {
    for (std::size_t j = i + 1; j < bundle.models.size(); ++j) {
      PairwiseComparison cmp;
      cmp.model_a = bundle.models[i].model;
      cmp.model_b = bundle.models[j].model;
      cmp.ttest = paired_t_test(bundle.models[i].test1.row.per_fold_auc,
                                bundle.models[j].test1.row.per_fold_auc);
      bundle.pairwise.push_back(std::move(cmp));
    }
  }

  write_text_if_changed(paths.report_md(), render_report_markdown(bundle));
}

}  // namespace sonoclass
