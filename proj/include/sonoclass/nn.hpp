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

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sonoclass/rng.hpp"

namespace sonoclass {

// Everything trains in double precision so finite-difference gradient checks
// can use tight tolerances. The networks here are desk sized; speed comes
// from small channel counts, not from a float path.
using Real = double;

// Dense NCHW tensor. Vectors are carried as (n, c, 1, 1).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<std::size_t>(n_) * c_ * h_ * w_, Real(0)) {}

  std::size_t size() const { return data.size(); }
  std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }

  Real& at(int i, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  Real at(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

struct ParamTensor {
  std::string name;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool trainable = true;
};

// Layers cache whatever forward state their backward needs; backward must be
// called at most once per forward and accumulates into parameter grads.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train, Rng* rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<ParamTensor*>& out) {}
};

class Conv2d : public Layer {
 public:
  // Weight layout (out_ch, in_ch/groups, k, k); He-normal init from `rng`.
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, int groups, Rng& rng,
         const std::string& name);

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

 private:
  int in_ch_, out_ch_, k_, stride_, pad_, groups_;
  ParamTensor weight_, bias_;
  Tensor cached_input_;
};

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, Rng& rng, const std::string& name);

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

  ParamTensor& weight() { return weight_; }
  ParamTensor& bias() { return bias_; }

 private:
  int in_dim_, out_dim_;
  ParamTensor weight_, bias_;
  Tensor cached_input_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<char> positive_;
};

// Non-overlapping window average; trailing rows/columns that do not fill a
// window are dropped.
class AvgPool2d : public Layer {
 public:
  explicit AvgPool2d(int ksize) : k_(ksize) {}

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int k_;
  int in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  int in_h_ = 0, in_w_ = 0;
};

// Inverted dropout: surviving activations are scaled by 1/(1-rate) during
// training so eval mode is the identity.
class Dropout : public Layer {
 public:
  explicit Dropout(double rate);

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  double rate_;
  bool active_ = false;
  std::vector<Real> mask_;
};

class Sequential : public Layer {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// y = x + inner(x); inner must preserve shape.
class Residual : public Layer {
 public:
  explicit Residual(std::unique_ptr<Layer> inner) : inner_(std::move(inner)) {}

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

 private:
  std::unique_ptr<Layer> inner_;
};

// Runs each branch on the same input and concatenates outputs along the
// channel axis; branches must agree on n, h, w.
class Branches : public Layer {
 public:
  void add(std::unique_ptr<Layer> branch) { branches_.push_back(std::move(branch)); }

  Tensor forward(const Tensor& x, bool train, Rng* rng) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(std::vector<ParamTensor*>& out) override;

 private:
  std::vector<std::unique_ptr<Layer>> branches_;
  std::vector<int> out_channels_;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Frozen parameters are skipped entirely,
// decay included.
class AdamW {
 public:
  AdamW(std::vector<ParamTensor*> params, const AdamWConfig& config);

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }

  void zero_grad();
  void step();

  long step_count() const { return t_; }

  // Moment vectors in parameter order, for checkpointing.
  std::vector<std::vector<Real>>& moments_m() { return m_; }
  std::vector<std::vector<Real>>& moments_v() { return v_; }
  void set_step_count(long t) { t_ = t; }

 private:
  std::vector<ParamTensor*> params_;
  AdamWConfig config_;
  std::vector<std::vector<Real>> m_, v_;
  long t_ = 0;
};

}  // namespace sonoclass

