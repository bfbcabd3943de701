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
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "sonoclass/image.hpp"
#include "sonoclass/nn.hpp"

namespace sonoclass {

// The five backbone slots are compact convolutional nets, each built around
// its namesake family's signature motif (separable convolutions, parallel
// branches with residuals, bottleneck residuals, dense concatenation,
// inverted bottlenecks). They are adapters satisfying the image -> pooled
// feature vector contract, not reimplementations of the full architectures,
// so pretrained weights must come from an explicit weight file.
std::vector<std::string> backbone_names();
bool is_known_backbone(const std::string& name);

struct BackboneSpec {
  std::string name;
  // Pooled feature width. 0 lets the adapter decide; a nonzero value must
  // match what the adapter produces.
  int feature_dim = 0;
  bool pretrained = false;
};

enum class Mode { Train, Eval };

// Head topology is fixed: features -> dropout -> FC(d -> floor(d/2)) -> ReLU
// -> dropout -> FC(floor(d/2) -> 1) -> sigmoid.
class Model {
 public:
  Model(BackboneSpec spec, std::unique_ptr<Layer> backbone, double dropout, Rng& init_rng);

  // One probability per input, clamped to [1e-7, 1 - 1e-7]. All inputs in a
  // batch must share one size. Train mode needs `rng` for dropout.
  std::vector<double> forward(const std::vector<ModelInput>& batch, Mode mode, Rng* rng);

  // Backpropagates d(loss)/d(logit) for the samples of the last forward.
  // Valid only after a train-mode forward.
  void backward(const std::vector<double>& grad_logits);

  std::vector<ParamTensor*> parameters();
  long count_trainable_parameters() const;
  void freeze_backbone();

  const BackboneSpec& spec() const { return spec_; }
  double dropout_rate() const { return dropout_; }

  // Weight blob: every parameter in canonical order as (name, count, raw
  // doubles). Loading requires the exact same parameter names and sizes.
  void save_weights(std::ostream& os) const;
  void load_weights(std::istream& is);

 private:
  BackboneSpec spec_;
  double dropout_;
  std::unique_ptr<Layer> backbone_;
  Sequential head_;
  std::vector<ParamTensor*> backbone_params_;
  std::vector<ParamTensor*> all_params_;
  int last_batch_ = 0;
};

struct BuildOptions {
  double dropout = 0.2;
  std::uint64_t init_seed = 0;
  // Path to a weight blob; required when spec.pretrained is true.
  std::string weight_source;
};

// Errors: UnknownBackbone for a name outside the five; WeightsUnavailable
// when pretrained is requested without a readable weight source.
Model build_model(const BackboneSpec& spec, const BuildOptions& options = {});

// Name of the registry entry with the fewest trainable parameters, ties
// broken by registry order.
std::string smallest_backbone();

}  // namespace sonoclass

