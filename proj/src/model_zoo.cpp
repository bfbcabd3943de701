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

#include "sonoclass/model_zoo.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "sonoclass/error.hpp"

namespace sonoclass {
namespace {

constexpr double kProbabilityClamp = 1e-7;

void add_conv(Sequential& s, int in, int out, int k, int stride, int pad, int groups, Rng& rng,
              const std::string& name, bool relu = true) {
  s.add(std::make_unique<Conv2d>(in, out, k, stride, pad, groups, rng, name));
  if (relu) s.add(std::make_unique<ReLU>());
}

// Depthwise 3x3 followed by a pointwise projection.
void add_sepconv(Sequential& s, int in, int out, int stride, Rng& rng, const std::string& name,
                 bool relu = true) {
  add_conv(s, in, in, 3, stride, 1, in, rng, name + ".dw", false);
  add_conv(s, in, out, 1, 1, 0, 1, rng, name + ".pw", relu);
}

std::unique_ptr<Layer> dense_layer(int in, int growth, Rng& rng, const std::string& name) {
  auto grow = std::make_unique<Sequential>();
  add_conv(*grow, in, growth, 3, 1, 1, 1, rng, name);
  auto branches = std::make_unique<Branches>();
  branches->add(std::make_unique<Sequential>());
  branches->add(std::move(grow));
  return branches;
}

struct Built {
  std::unique_ptr<Layer> backbone;
  int feature_dim = 0;
};

Built build_xception(Rng& rng) {
  auto net = std::make_unique<Sequential>();
  net->add(std::make_unique<AvgPool2d>(4));
  add_conv(*net, 3, 16, 3, 1, 1, 1, rng, "x.stem");
  add_sepconv(*net, 16, 24, 2, rng, "x.sep1");
  auto inner = std::make_unique<Sequential>();
  add_sepconv(*inner, 24, 24, 1, rng, "x.block.sep1");
  add_sepconv(*inner, 24, 24, 1, rng, "x.block.sep2", false);
  net->add(std::make_unique<Residual>(std::move(inner)));
  net->add(std::make_unique<ReLU>());
  add_sepconv(*net, 24, 40, 2, rng, "x.sep2");
  net->add(std::make_unique<GlobalAvgPool>());
  return {std::move(net), 40};
}

Built build_inception_resnet_v2(Rng& rng) {
  auto net = std::make_unique<Sequential>();
  net->add(std::make_unique<AvgPool2d>(4));
  add_conv(*net, 3, 16, 3, 1, 1, 1, rng, "ir.stem");
  add_conv(*net, 16, 24, 3, 2, 1, 1, rng, "ir.reduce1");

  auto b0 = std::make_unique<Sequential>();
  add_conv(*b0, 24, 12, 1, 1, 0, 1, rng, "ir.b0.pw");
  auto b1 = std::make_unique<Sequential>();
  add_conv(*b1, 24, 8, 1, 1, 0, 1, rng, "ir.b1.pw");
  add_conv(*b1, 8, 12, 3, 1, 1, 1, rng, "ir.b1.conv");
  auto branches = std::make_unique<Branches>();
  branches->add(std::move(b0));
  branches->add(std::move(b1));
  auto inner = std::make_unique<Sequential>();
  inner->add(std::move(branches));
  add_conv(*inner, 24, 24, 1, 1, 0, 1, rng, "ir.merge", false);
  net->add(std::make_unique<Residual>(std::move(inner)));
  net->add(std::make_unique<ReLU>());

  add_conv(*net, 24, 48, 3, 2, 1, 1, rng, "ir.reduce2");
  net->add(std::make_unique<GlobalAvgPool>());
  return {std::move(net), 48};
}

Built build_resnet50(Rng& rng) {
  auto net = std::make_unique<Sequential>();
  net->add(std::make_unique<AvgPool2d>(4));
  add_conv(*net, 3, 16, 3, 1, 1, 1, rng, "rn.stem");
  add_conv(*net, 16, 32, 3, 2, 1, 1, rng, "rn.reduce1");
  auto block1 = std::make_unique<Sequential>();
  add_conv(*block1, 32, 8, 1, 1, 0, 1, rng, "rn.block1.a");
  add_conv(*block1, 8, 8, 3, 1, 1, 1, rng, "rn.block1.b");
  add_conv(*block1, 8, 32, 1, 1, 0, 1, rng, "rn.block1.c", false);
  net->add(std::make_unique<Residual>(std::move(block1)));
  net->add(std::make_unique<ReLU>());
  add_conv(*net, 32, 64, 3, 2, 1, 1, rng, "rn.reduce2");
  auto block2 = std::make_unique<Sequential>();
  add_conv(*block2, 64, 16, 1, 1, 0, 1, rng, "rn.block2.a");
  add_conv(*block2, 16, 16, 3, 1, 1, 1, rng, "rn.block2.b");
  add_conv(*block2, 16, 64, 1, 1, 0, 1, rng, "rn.block2.c", false);
  net->add(std::make_unique<Residual>(std::move(block2)));
  net->add(std::make_unique<ReLU>());
  net->add(std::make_unique<GlobalAvgPool>());
  return {std::move(net), 64};
}

Built build_densenet121(Rng& rng) {
  auto net = std::make_unique<Sequential>();
  net->add(std::make_unique<AvgPool2d>(4));
  add_conv(*net, 3, 16, 3, 1, 1, 1, rng, "dn.stem");
  net->add(std::make_unique<AvgPool2d>(2));
  net->add(dense_layer(16, 12, rng, "dn.d1"));
  net->add(dense_layer(28, 12, rng, "dn.d2"));
  add_conv(*net, 40, 26, 1, 1, 0, 1, rng, "dn.trans");
  net->add(std::make_unique<AvgPool2d>(2));
  net->add(dense_layer(26, 12, rng, "dn.d3"));
  net->add(dense_layer(38, 12, rng, "dn.d4"));
  net->add(std::make_unique<GlobalAvgPool>());
  return {std::move(net), 50};
}

Built build_efficientnet_b2(Rng& rng) {
  auto net = std::make_unique<Sequential>();
  net->add(std::make_unique<AvgPool2d>(4));
  add_conv(*net, 3, 6, 3, 1, 1, 1, rng, "en.stem");
  // Inverted bottleneck: pointwise expand, depthwise, pointwise project.
  add_conv(*net, 6, 12, 1, 1, 0, 1, rng, "en.mb1.expand");
  add_conv(*net, 12, 12, 3, 2, 1, 12, rng, "en.mb1.dw");
  add_conv(*net, 12, 12, 1, 1, 0, 1, rng, "en.mb1.project", false);
  auto mb2 = std::make_unique<Sequential>();
  add_conv(*mb2, 12, 24, 1, 1, 0, 1, rng, "en.mb2.expand");
  add_conv(*mb2, 24, 24, 3, 1, 1, 24, rng, "en.mb2.dw");
  add_conv(*mb2, 24, 12, 1, 1, 0, 1, rng, "en.mb2.project", false);
  net->add(std::make_unique<Residual>(std::move(mb2)));
  add_conv(*net, 12, 24, 1, 1, 0, 1, rng, "en.mb3.expand");
  add_conv(*net, 24, 24, 3, 2, 1, 24, rng, "en.mb3.dw");
  add_conv(*net, 24, 24, 1, 1, 0, 1, rng, "en.mb3.project", false);
  net->add(std::make_unique<GlobalAvgPool>());
  return {std::move(net), 24};
}

using Builder = Built (*)(Rng&);

struct RegistryEntry {
  const char* name;
  Builder build;
};

// Registry order follows the order the architectures are usually listed in;
// it also breaks parameter-count ties.
constexpr RegistryEntry kRegistry[] = {
    {"xception", &build_xception},
    {"inception_resnet_v2", &build_inception_resnet_v2},
    {"resnet50", &build_resnet50},
    {"densenet121", &build_densenet121},
    {"efficientnet_b2", &build_efficientnet_b2},
};

int registry_index(const std::string& name) {
  for (int i = 0; i < static_cast<int>(std::size(kRegistry)); ++i) {
    if (name == kRegistry[i].name) return i;
  }
  return -1;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is.good()) throw PipelineError(ErrorCode::IoFailure, "truncated weight blob");
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is.good()) throw PipelineError(ErrorCode::IoFailure, "truncated weight blob");
  return v;
}

}  // namespace

std::vector<std::string> backbone_names() {
  std::vector<std::string> names;
  for (const RegistryEntry& e : kRegistry) names.emplace_back(e.name);
  return names;
}

bool is_known_backbone(const std::string& name) { return registry_index(name) >= 0; }

Model::Model(BackboneSpec spec, std::unique_ptr<Layer> backbone, double dropout, Rng& init_rng)
    : spec_(std::move(spec)), dropout_(dropout), backbone_(std::move(backbone)) {
  if (spec_.feature_dim < 2) {
    throw PipelineError(ErrorCode::InvalidConfig, "feature width must be at least 2");
  }
  const int hidden = spec_.feature_dim / 2;
  head_.add(std::make_unique<Dropout>(dropout_));
  head_.add(std::make_unique<Linear>(spec_.feature_dim, hidden, init_rng, "head.fc1"));
  head_.add(std::make_unique<ReLU>());
  head_.add(std::make_unique<Dropout>(dropout_));
  head_.add(std::make_unique<Linear>(hidden, 1, init_rng, "head.fc2"));

  backbone_->collect_params(backbone_params_);
  all_params_ = backbone_params_;
  head_.collect_params(all_params_);
}

std::vector<double> Model::forward(const std::vector<ModelInput>& batch, Mode mode, Rng* rng) {
  if (batch.empty()) throw PipelineError(ErrorCode::EmptyBatch, "forward on empty batch");
  const int s = batch.front().side();
  for (const ModelInput& input : batch) {
    if (input.side() != s ||
        input.pixels.size() != static_cast<std::size_t>(3) * s * s) {
      throw PipelineError(ErrorCode::ShapeMismatch, "batch inputs disagree on size");
    }
  }

  const int n = static_cast<int>(batch.size());
  Tensor x(n, 3, s, s);
  for (int i = 0; i < n; ++i) {
    std::memcpy(&x.data[static_cast<std::size_t>(i) * x.sample_size()], batch[i].pixels.data(),
                sizeof(Real) * x.sample_size());
  }

  const bool train = mode == Mode::Train;
  Tensor feat = backbone_->forward(x, train, rng);
  if (feat.c != spec_.feature_dim || feat.h != 1 || feat.w != 1) {
    throw PipelineError(ErrorCode::ShapeMismatch, "backbone feature width drifted");
  }
  Tensor logits = head_.forward(feat, train, rng);
  last_batch_ = n;

  std::vector<double> probs(n);
  for (int i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-logits.at(i, 0, 0, 0)));
    probs[i] = std::min(1.0 - kProbabilityClamp, std::max(kProbabilityClamp, p));
  }
  return probs;
}

void Model::backward(const std::vector<double>& grad_logits) {
  if (static_cast<int>(grad_logits.size()) != last_batch_ || last_batch_ == 0) {
    throw PipelineError(ErrorCode::LengthMismatch, "logit gradient does not match last batch");
  }
  Tensor grad(last_batch_, 1, 1, 1);
  for (int i = 0; i < last_batch_; ++i) grad.at(i, 0, 0, 0) = grad_logits[i];
  backbone_->backward(head_.backward(grad));
}

std::vector<ParamTensor*> Model::parameters() { return all_params_; }

long Model::count_trainable_parameters() const {
  long count = 0;
  for (const ParamTensor* p : all_params_) {
    if (p->trainable) count += static_cast<long>(p->value.size());
  }
  return count;
}

void Model::freeze_backbone() {
  for (ParamTensor* p : backbone_params_) p->trainable = false;
}

void Model::save_weights(std::ostream& os) const {
  write_u32(os, static_cast<std::uint32_t>(all_params_.size()));
  for (const ParamTensor* p : all_params_) {
    write_u32(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u64(os, p->value.size());
    os.write(reinterpret_cast<const char*>(p->value.data()),
             static_cast<std::streamsize>(sizeof(Real) * p->value.size()));
  }
  if (!os.good()) throw PipelineError(ErrorCode::IoFailure, "failed to write weights");
}

void Model::load_weights(std::istream& is) {
  const std::uint32_t n = read_u32(is);
  if (n != all_params_.size()) {
    throw PipelineError(ErrorCode::MetadataMismatch,
                        "weight blob has " + std::to_string(n) + " tensors, model expects " +
                            std::to_string(all_params_.size()));
  }
  for (ParamTensor* p : all_params_) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint64_t count = read_u64(is);
    if (!is.good()) throw PipelineError(ErrorCode::IoFailure, "truncated weight blob");
    if (name != p->name || count != p->value.size()) {
      throw PipelineError(ErrorCode::MetadataMismatch,
                          "weight tensor '" + name + "' does not match '" + p->name + "'");
    }
    is.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(Real) * count));
    if (!is.good()) throw PipelineError(ErrorCode::IoFailure, "truncated weight blob");
  }
}

Model build_model(const BackboneSpec& spec, const BuildOptions& options) {
  const int idx = registry_index(spec.name);
  if (idx < 0) {
    throw PipelineError(ErrorCode::UnknownBackbone, "no backbone named '" + spec.name + "'");
  }
  if (spec.pretrained) {
    if (options.weight_source.empty() || !std::filesystem::exists(options.weight_source)) {
      throw PipelineError(ErrorCode::WeightsUnavailable,
                          "pretrained weights requested for '" + spec.name +
                              "' but no weight source is available");
    }
  }

  Rng rng(derive_seed(options.init_seed, 0x6D00 + idx));
  Built built = kRegistry[idx].build(rng);
  if (spec.feature_dim != 0 && spec.feature_dim != built.feature_dim) {
    throw PipelineError(ErrorCode::InvalidConfig,
                        "backbone '" + spec.name + "' produces feature width " +
                            std::to_string(built.feature_dim) + ", not " +
                            std::to_string(spec.feature_dim));
  }

  BackboneSpec resolved = spec;
  resolved.feature_dim = built.feature_dim;
  Model model(resolved, std::move(built.backbone), options.dropout, rng);
  if (spec.pretrained) {
    std::ifstream is(options.weight_source, std::ios::binary);
    if (!is) {
      throw PipelineError(ErrorCode::WeightsUnavailable,
                          "cannot open weight source '" + options.weight_source + "'");
    }
    model.load_weights(is);
  }
  return model;
}

std::string smallest_backbone() {
  std::string best;
  long best_count = 0;
  for (const RegistryEntry& e : kRegistry) {
    BackboneSpec spec;
    spec.name = e.name;
    Model m = build_model(spec);
    const long count = m.count_trainable_parameters();
    if (best.empty() || count < best_count) {
      best = e.name;
      best_count = count;
    }
  }
  return best;
}

}  // namespace sonoclass
