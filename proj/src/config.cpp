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

#include "sonoclass/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sonoclass/augment.hpp"
#include "sonoclass/error.hpp"
#include "sonoclass/model_zoo.hpp"

namespace sonoclass {
namespace {

using nlohmann::json;

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) {
    throw PipelineError(ErrorCode::InvalidConfig, std::string("config key '") + key +
                                                      "' must be a number");
  }
  return j.at(key).get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) {
    throw PipelineError(ErrorCode::InvalidConfig, std::string("config key '") + key +
                                                      "' must be an integer");
  }
  return j.at(key).get<int>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
    throw PipelineError(ErrorCode::InvalidConfig, std::string("config key '") + key +
                                                      "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) {
    throw PipelineError(ErrorCode::InvalidConfig, std::string("config key '") + key +
                                                      "' must be a boolean");
  }
  return j.at(key).get<bool>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) {
    throw PipelineError(ErrorCode::InvalidConfig, std::string("config key '") + key +
                                                      "' must be a string");
  }
  return j.at(key).get<std::string>();
}

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "unknown config key '" + it.key() + "' in " + where);
    }
  }
}

// Shortest decimal form that round-trips a double, shared by hashing and
// serialization so the two always agree.
std::string number_repr(double v) {
  if (v == static_cast<long long>(v) && std::abs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  double back = 0.0;
  std::sscanf(buf, "%lf", &back);
  for (int prec = 1; prec <= 16; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    std::sscanf(shorter, "%lf", &back);
    if (back == v) return shorter;
  }
  return buf;
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["lr_initial"] = t.lr_initial;
  j["lr_floor"] = t.lr_floor;
  j["plateau_factor"] = t.plateau_factor;
  j["plateau_patience"] = t.plateau_patience;
  j["min_delta"] = t.min_delta;
  j["dropout"] = t.dropout;
  j["beta1"] = t.adamw.beta1;
  j["beta2"] = t.adamw.beta2;
  j["eps"] = t.adamw.eps;
  j["weight_decay"] = t.adamw.weight_decay;
  return j;
}

TrainConfig train_from_json(const json& j, const TrainConfig& base) {
  reject_unknown_keys(j,
                      {"epochs", "batch_size", "lr_initial", "lr_floor", "plateau_factor",
                       "plateau_patience", "min_delta", "dropout", "beta1", "beta2", "eps",
                       "weight_decay"},
                      "train");
  TrainConfig t = base;
  t.epochs = get_int(j, "epochs", base.epochs);
  t.batch_size = get_int(j, "batch_size", base.batch_size);
  t.lr_initial = get_number(j, "lr_initial", base.lr_initial);
  t.lr_floor = get_number(j, "lr_floor", base.lr_floor);
  t.plateau_factor = get_number(j, "plateau_factor", base.plateau_factor);
  t.plateau_patience = get_int(j, "plateau_patience", base.plateau_patience);
  t.min_delta = get_number(j, "min_delta", base.min_delta);
  t.dropout = get_number(j, "dropout", base.dropout);
  t.adamw.beta1 = get_number(j, "beta1", base.adamw.beta1);
  t.adamw.beta2 = get_number(j, "beta2", base.adamw.beta2);
  t.adamw.eps = get_number(j, "eps", base.adamw.eps);
  t.adamw.weight_decay = get_number(j, "weight_decay", base.adamw.weight_decay);
  t.adamw.lr = t.lr_initial;
  return t;
}

json synth_to_json(const SynthConfig& s) {
  json j;
  j["n_patients_per_class"] = s.n_patients_per_class;
  j["images_per_patient"] = s.images_per_patient;
  j["image_size"] = s.image_size;
  j["separation"] = s.class_texture_separation;
  j["source"] = source_name(s.source);
  j["size_jitter"] = s.size_jitter;
  return j;
}

SynthConfig synth_from_json(const json& j, const SynthConfig& base) {
  reject_unknown_keys(j,
                      {"n_patients_per_class", "images_per_patient", "image_size", "separation",
                       "source", "size_jitter"},
                      "synth");
  SynthConfig s = base;
  s.n_patients_per_class = get_int(j, "n_patients_per_class", base.n_patients_per_class);
  s.images_per_patient = get_int(j, "images_per_patient", base.images_per_patient);
  s.image_size = get_int(j, "image_size", base.image_size);
  s.class_texture_separation = get_number(j, "separation", base.class_texture_separation);
  const std::string src = get_string(j, "source", source_name(base.source));
  if (src == "still") {
    s.source = SourceType::Still;
  } else if (src == "video_frame") {
    s.source = SourceType::VideoFrame;
  } else {
    throw PipelineError(ErrorCode::InvalidConfig, "synth.source must be still or video_frame");
  }
  s.size_jitter = get_bool(j, "size_jitter", base.size_jitter);
  return s;
}

json augment_to_json(const AugmentRanges& a) {
  json j;
  j["zoom_min"] = a.zoom_min;
  j["zoom_max"] = a.zoom_max;
  j["translate_max_frac"] = a.translate_max_frac;
  j["rotation_max_deg"] = a.rotation_max_deg;
  return j;
}

AugmentRanges augment_from_json(const json& j, const AugmentRanges& base) {
  reject_unknown_keys(j, {"zoom_min", "zoom_max", "translate_max_frac", "rotation_max_deg"},
                      "augment");
  AugmentRanges a = base;
  a.zoom_min = get_number(j, "zoom_min", base.zoom_min);
  a.zoom_max = get_number(j, "zoom_max", base.zoom_max);
  a.translate_max_frac = get_number(j, "translate_max_frac", base.translate_max_frac);
  a.rotation_max_deg = get_number(j, "rotation_max_deg", base.rotation_max_deg);
  return a;
}

json run_to_json(const RunConfig& c) {
  json j;
  j["profile"] = c.profile;
  j["manifest"] = c.manifest;
  j["test2_manifest"] = c.test2_manifest;
  j["output_dir"] = c.output_dir;
  j["backbone"] = c.backbones;
  j["pretrained"] = c.pretrained;
  j["weight_source"] = c.weight_source;
  j["k"] = c.k;
  j["image_size"] = c.image_size;
  j["seed"] = c.seed;
  j["determinism"] = c.determinism;
  j["train"] = train_to_json(c.train);
  j["augment"] = augment_to_json(c.augment);
  j["synth"] = synth_to_json(c.synth);
  return j;
}

RunConfig run_from_json(const json& j, const std::string& profile_override) {
  if (!j.is_object()) {
    throw PipelineError(ErrorCode::InvalidConfig, "config root must be a JSON object");
  }
  reject_unknown_keys(j,
                      {"profile", "manifest", "test2_manifest", "output_dir", "backbone",
                       "pretrained", "weight_source", "k", "image_size", "seed", "determinism",
                       "train", "augment", "synth"},
                      "config root");

  std::string profile = get_string(j, "profile", "desk");
  if (!profile_override.empty()) profile = profile_override;
  RunConfig c = default_config(profile);

  c.manifest = get_string(j, "manifest", c.manifest);
  c.test2_manifest = get_string(j, "test2_manifest", c.test2_manifest);
  c.output_dir = get_string(j, "output_dir", c.output_dir);
  if (j.contains("backbone")) {
    const json& b = j.at("backbone");
    if (b.is_string()) {
      c.backbones = {b.get<std::string>()};
    } else if (b.is_array()) {
      c.backbones.clear();
      for (const json& e : b) {
        if (!e.is_string()) {
          throw PipelineError(ErrorCode::InvalidConfig, "backbone entries must be strings");
        }
        c.backbones.push_back(e.get<std::string>());
      }
    } else {
      throw PipelineError(ErrorCode::InvalidConfig,
                          "backbone must be a string or an array of strings");
    }
  }
  c.pretrained = get_bool(j, "pretrained", c.pretrained);
  c.weight_source = get_string(j, "weight_source", c.weight_source);
  c.k = get_int(j, "k", c.k);
  c.image_size = get_int(j, "image_size", c.image_size);
  c.seed = get_u64(j, "seed", c.seed);
  c.determinism = get_bool(j, "determinism", c.determinism);
  if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train);
  if (j.contains("augment")) c.augment = augment_from_json(j.at("augment"), c.augment);
  if (j.contains("synth")) c.synth = synth_from_json(j.at("synth"), c.synth);
  c.train.seed = c.seed;
  c.synth.seed = c.seed;
  return c;
}

void require_pinned(bool ok, const char* what) {
  if (!ok) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        std::string("reproduction profile pins ") + what +
                            "; remove the override or switch to the desk profile");
  }
}

}  // namespace

RunConfig default_config(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.image_size = 128;
    c.backbones = {"efficientnet_b2"};
    // Desk runs train from random init, so they need a larger step size and
    // more samples per epoch than the fine-tuning schedule to converge
    // within 60 epochs.
    c.train.lr_initial = 1e-3;
    c.synth.n_patients_per_class = 20;
    c.synth.images_per_patient = 12;
    c.synth.image_size = 128;
  } else if (profile == "reproduction") {
    c.image_size = 512;
    c.backbones = backbone_names();
    c.synth.n_patients_per_class = 20;
    c.synth.images_per_patient = 6;
    c.synth.image_size = 512;
  } else {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "unknown profile '" + profile + "' (expected desk or reproduction)");
  }
  c.train.adamw.lr = c.train.lr_initial;
  return c;
}

void validate_run_config(const RunConfig& config) {
  if (config.profile != "desk" && config.profile != "reproduction") {
    throw PipelineError(ErrorCode::InvalidConfig, "unknown profile '" + config.profile + "'");
  }
  if (config.manifest.empty()) {
    throw PipelineError(ErrorCode::InvalidConfig, "manifest path is empty");
  }
  if (config.output_dir.empty()) {
    throw PipelineError(ErrorCode::InvalidConfig, "output_dir is empty");
  }
  if (config.backbones.empty()) {
    throw PipelineError(ErrorCode::InvalidConfig, "no backbones configured");
  }
  {
    std::set<std::string> seen;
    const std::vector<std::string> known = backbone_names();
    for (const std::string& b : config.backbones) {
      if (std::find(known.begin(), known.end(), b) == known.end()) {
        throw PipelineError(ErrorCode::UnknownBackbone, "unknown backbone '" + b + "'");
      }
      if (!seen.insert(b).second) {
        throw PipelineError(ErrorCode::InvalidConfig, "backbone '" + b + "' listed twice");
      }
    }
  }
  if (config.k < 3) {
    throw PipelineError(ErrorCode::InvalidConfig, "k must be at least 3");
  }
  if (config.image_size < 16 || config.image_size > 4096) {
    throw PipelineError(ErrorCode::InvalidConfig, "image_size out of range");
  }
  validate_train_config(config.train);

  // The augmentation ranges are fixed constants of this pipeline; the config
  // block exists for the audit trail, not as a knob.
  const bool ranges_ok = config.augment.zoom_min == kZoomMin &&
                         config.augment.zoom_max == kZoomMax &&
                         config.augment.translate_max_frac == kTranslateMaxFrac &&
                         config.augment.rotation_max_deg == kRotationMaxDeg;
  if (!ranges_ok) {
    throw PipelineError(ErrorCode::InvalidConfig, "augmentation ranges are pinned and cannot "
                                                  "be changed");
  }

  if (config.synth.n_patients_per_class < 1 || config.synth.images_per_patient < 1 ||
      config.synth.image_size < 16 ||
      config.synth.class_texture_separation < 0.0 ||
      config.synth.class_texture_separation > 1.0) {
    throw PipelineError(ErrorCode::InvalidConfig, "synth block is out of range");
  }

  if (config.pretrained && config.weight_source.empty()) {
    throw PipelineError(ErrorCode::WeightsUnavailable,
                        "pretrained requested but weight_source is empty");
  }

  if (config.profile == "reproduction") {
    const RunConfig pinned = default_config("reproduction");
    require_pinned(config.image_size == pinned.image_size, "image_size=512");
    require_pinned(config.k == pinned.k, "k=5");
    require_pinned(config.train.epochs == pinned.train.epochs, "epochs=60");
    require_pinned(config.train.batch_size == pinned.train.batch_size, "batch_size=16");
    require_pinned(config.train.lr_initial == pinned.train.lr_initial, "lr_initial=1e-4");
    require_pinned(config.train.lr_floor == pinned.train.lr_floor, "lr_floor=1e-6");
    require_pinned(config.train.plateau_factor == pinned.train.plateau_factor,
                   "plateau_factor=0.1");
    require_pinned(config.train.plateau_patience == pinned.train.plateau_patience,
                   "plateau_patience=10");
    require_pinned(config.train.min_delta == pinned.train.min_delta, "min_delta=0");
    require_pinned(config.train.dropout == pinned.train.dropout, "dropout=0.2");
  }
}

RunConfig load_run_config(const std::string& path, const std::string& profile_override) {
  std::ifstream f(path);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "config " + path + " is not valid JSON: " + e.what());
  }
  RunConfig c = run_from_json(j, profile_override);
  validate_run_config(c);
  return c;
}

std::string serialize_run_config(const RunConfig& config) {
  // nlohmann keeps object keys sorted, so this form is canonical. Numbers go
  // through number_repr to keep the text stable across platforms.
  json j = run_to_json(config);
  std::ostringstream os;
  std::function<void(const json&, int)> emit = [&](const json& node, int indent) {
    const std::string pad(indent, ' ');
    if (node.is_object()) {
      os << "{\n";
      std::size_t i = 0;
      for (auto it = node.begin(); it != node.end(); ++it, ++i) {
        os << pad << "  \"" << it.key() << "\": ";
        emit(it.value(), indent + 2);
        if (i + 1 < node.size()) os << ",";
        os << "\n";
      }
      os << pad << "}";
    } else if (node.is_array()) {
      os << "[";
      for (std::size_t i = 0; i < node.size(); ++i) {
        emit(node[i], indent);
        if (i + 1 < node.size()) os << ", ";
      }
      os << "]";
    } else if (node.is_string()) {
      os << json(node.get<std::string>()).dump();
    } else if (node.is_boolean()) {
      os << (node.get<bool>() ? "true" : "false");
    } else if (node.is_number_unsigned()) {
      os << node.get<std::uint64_t>();
    } else if (node.is_number_integer()) {
      os << node.get<long long>();
    } else if (node.is_number_float()) {
      os << number_repr(node.get<double>());
    } else {
      os << "null";
    }
  };
  emit(j, 0);
  os << "\n";
  return os.str();
}

void save_run_config(const RunConfig& config, const std::string& path) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot write config: " + path);
  f << serialize_run_config(config);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& config) {
  // File locations do not change results, and leaving them out lets the same
  // experiment be relocated or re-rooted without invalidating its artifacts.
  // Every semantic knob (seed, sizes, schedule, backbones, synth block)
  // stays in.
  RunConfig redacted = config;
  redacted.manifest.clear();
  redacted.test2_manifest.clear();
  redacted.output_dir.clear();
  redacted.weight_source.clear();
  const std::string text = serialize_run_config(redacted);
  return fnv1a64(text.data(), text.size());
}

std::string config_hash_hex(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

}  // namespace sonoclass
