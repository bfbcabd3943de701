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

#include "sonoclass/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>

#include "sonoclass/error.hpp"

namespace sonoclass {
namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void he_init(ParamTensor& p, int fan_in, Rng& rng) {
  const Real stddev = std::sqrt(Real(2) / fan_in);
  for (Real& v : p.value) v = rng.gaussian() * stddev;
}

// Unrolls channels [c0, c0+cg) of sample i into a (cg*k*k) x (ho*wo) matrix.
// Out-of-bounds taps read zero.
void im2col(const Tensor& x, int i, int c0, int cg, int k, int stride, int pad, int ho, int wo,
            Real* col) {
  for (int cl = 0; cl < cg; ++cl) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Real* row = col + ((static_cast<std::size_t>(cl) * k + ky) * k + kx) *
                              (static_cast<std::size_t>(ho) * wo);
        for (int y = 0; y < ho; ++y) {
          const int sy = y * stride - pad + ky;
          if (sy < 0 || sy >= x.h) {
            std::memset(row + static_cast<std::size_t>(y) * wo, 0, sizeof(Real) * wo);
            continue;
          }
          for (int xo = 0; xo < wo; ++xo) {
            const int sx = xo * stride - pad + kx;
            row[static_cast<std::size_t>(y) * wo + xo] =
                (sx >= 0 && sx < x.w) ? x.at(i, c0 + cl, sy, sx) : Real(0);
          }
        }
      }
    }
  }
}

void col2im_add(const Real* col, int i, int c0, int cg, int k, int stride, int pad, int ho,
                int wo, Tensor& grad_in) {
  for (int cl = 0; cl < cg; ++cl) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Real* row = col + ((static_cast<std::size_t>(cl) * k + ky) * k + kx) *
                                    (static_cast<std::size_t>(ho) * wo);
        for (int y = 0; y < ho; ++y) {
          const int sy = y * stride - pad + ky;
          if (sy < 0 || sy >= grad_in.h) continue;
          for (int xo = 0; xo < wo; ++xo) {
            const int sx = xo * stride - pad + kx;
            if (sx >= 0 && sx < grad_in.w) {
              grad_in.at(i, c0 + cl, sy, sx) += row[static_cast<std::size_t>(y) * wo + xo];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, int groups, Rng& rng,
               const std::string& name)
    : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad), groups_(groups) {
  if (in_ch <= 0 || out_ch <= 0 || ksize <= 0 || stride <= 0 || pad < 0 || groups <= 0 ||
      in_ch % groups != 0 || out_ch % groups != 0) {
    throw PipelineError(ErrorCode::InvalidConfig, "bad convolution geometry for " + name);
  }
  const int cg_in = in_ch / groups;
  weight_.name = name + ".weight";
  weight_.value.assign(static_cast<std::size_t>(out_ch) * cg_in * ksize * ksize, Real(0));
  weight_.grad.assign(weight_.value.size(), Real(0));
  he_init(weight_, cg_in * ksize * ksize, rng);
  bias_.name = name + ".bias";
  bias_.value.assign(out_ch, Real(0));
  bias_.grad.assign(out_ch, Real(0));
}

Tensor Conv2d::forward(const Tensor& x, bool, Rng*) {
  if (x.c != in_ch_ || x.n <= 0) {
    throw PipelineError(ErrorCode::ShapeMismatch,
                        "conv " + weight_.name + " expects " + std::to_string(in_ch_) +
                            " channels, got " + std::to_string(x.c));
  }
  const int ho = (x.h + 2 * pad_ - k_) / stride_ + 1;
  const int wo = (x.w + 2 * pad_ - k_) / stride_ + 1;
  if (ho <= 0 || wo <= 0) {
    throw PipelineError(ErrorCode::ShapeMismatch, "conv input smaller than kernel");
  }
  cached_input_ = x;

  const int cg_in = in_ch_ / groups_, cg_out = out_ch_ / groups_;
  const std::size_t kk = static_cast<std::size_t>(cg_in) * k_ * k_;
  const std::size_t howo = static_cast<std::size_t>(ho) * wo;
  std::vector<Real> col(kk * howo);

  Tensor out(x.n, out_ch_, ho, wo);
  for (int i = 0; i < x.n; ++i) {
    for (int g = 0; g < groups_; ++g) {
      im2col(x, i, g * cg_in, cg_in, k_, stride_, pad_, ho, wo, col.data());
      ConstMapMat wmap(weight_.value.data() + static_cast<std::size_t>(g) * cg_out * kk, cg_out,
                       kk);
      ConstMapMat cmap(col.data(), kk, howo);
      MapMat omap(&out.data[(static_cast<std::size_t>(i) * out_ch_ + g * cg_out) * howo], cg_out,
                  howo);
      omap.noalias() = wmap * cmap;
      for (int oc = 0; oc < cg_out; ++oc) {
        omap.row(oc).array() += bias_.value[static_cast<std::size_t>(g) * cg_out + oc];
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = cached_input_;
  const int ho = grad_out.h, wo = grad_out.w;
  const int cg_in = in_ch_ / groups_, cg_out = out_ch_ / groups_;
  const std::size_t kk = static_cast<std::size_t>(cg_in) * k_ * k_;
  const std::size_t howo = static_cast<std::size_t>(ho) * wo;
  std::vector<Real> col(kk * howo);
  std::vector<Real> col_grad(kk * howo);

  Tensor grad_in(x.n, in_ch_, x.h, x.w);
  for (int i = 0; i < x.n; ++i) {
    for (int g = 0; g < groups_; ++g) {
      im2col(x, i, g * cg_in, cg_in, k_, stride_, pad_, ho, wo, col.data());
      ConstMapMat cmap(col.data(), kk, howo);
      ConstMapMat gmap(&grad_out.data[(static_cast<std::size_t>(i) * out_ch_ + g * cg_out) * howo],
                       cg_out, howo);
      MapMat gwmap(weight_.grad.data() + static_cast<std::size_t>(g) * cg_out * kk, cg_out, kk);
      gwmap.noalias() += gmap * cmap.transpose();
      ConstMapMat wmap(weight_.value.data() + static_cast<std::size_t>(g) * cg_out * kk, cg_out,
                       kk);
      MapMat cgmap(col_grad.data(), kk, howo);
      cgmap.noalias() = wmap.transpose() * gmap;
      col2im_add(col_grad.data(), i, g * cg_in, cg_in, k_, stride_, pad_, ho, wo, grad_in);
      // Scalar accumulation: vectorized reductions split by buffer address,
      // which costs bit reproducibility across otherwise identical runs.
      for (int oc = 0; oc < cg_out; ++oc) {
        Real acc = 0;
        for (std::size_t j = 0; j < howo; ++j) acc += gmap(oc, static_cast<Eigen::Index>(j));
        bias_.grad[static_cast<std::size_t>(g) * cg_out + oc] += acc;
      }
    }
  }
  return grad_in;
}

void Conv2d::collect_params(std::vector<ParamTensor*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Linear::Linear(int in_dim, int out_dim, Rng& rng, const std::string& name)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim <= 0 || out_dim <= 0) {
    throw PipelineError(ErrorCode::InvalidConfig, "bad linear geometry for " + name);
  }
  weight_.name = name + ".weight";
  weight_.value.assign(static_cast<std::size_t>(out_dim) * in_dim, Real(0));
  weight_.grad.assign(weight_.value.size(), Real(0));
  he_init(weight_, in_dim, rng);
  bias_.name = name + ".bias";
  bias_.value.assign(out_dim, Real(0));
  bias_.grad.assign(out_dim, Real(0));
}

Tensor Linear::forward(const Tensor& x, bool, Rng*) {
  if (x.c != in_dim_ || x.h != 1 || x.w != 1) {
    throw PipelineError(ErrorCode::ShapeMismatch,
                        "linear " + weight_.name + " expects width " + std::to_string(in_dim_));
  }
  cached_input_ = x;
  Tensor out(x.n, out_dim_, 1, 1);
  ConstMapMat xmap(x.data.data(), x.n, in_dim_);
  ConstMapMat wmap(weight_.value.data(), out_dim_, in_dim_);
  MapMat omap(out.data.data(), x.n, out_dim_);
  omap.noalias() = xmap * wmap.transpose();
  ConstMapMat bmap(bias_.value.data(), 1, out_dim_);
  omap.rowwise() += bmap.row(0);
  return out;
}

Tensor Linear::backward(const Tensor& grad_out) {
  const Tensor& x = cached_input_;
  ConstMapMat gmap(grad_out.data.data(), x.n, out_dim_);
  ConstMapMat xmap(x.data.data(), x.n, in_dim_);
  MapMat gwmap(weight_.grad.data(), out_dim_, in_dim_);
  gwmap.noalias() += gmap.transpose() * xmap;
  // Scalar accumulation keeps the bias gradient independent of where the
  // batch buffer happens to sit in memory.
  for (int j = 0; j < out_dim_; ++j) {
    Real acc = 0;
    for (int i = 0; i < x.n; ++i) acc += gmap(i, j);
    bias_.grad[static_cast<std::size_t>(j)] += acc;
  }

  Tensor grad_in(x.n, in_dim_, 1, 1);
  ConstMapMat wmap(weight_.value.data(), out_dim_, in_dim_);
  MapMat gimap(grad_in.data.data(), x.n, in_dim_);
  gimap.noalias() = gmap * wmap;
  return grad_in;
}

void Linear::collect_params(std::vector<ParamTensor*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor ReLU::forward(const Tensor& x, bool, Rng*) {
  positive_.assign(x.size(), 0);
  Tensor out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] > Real(0)) {
      positive_[i] = 1;
    } else {
      out.data[i] = Real(0);
    }
  }
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.data.size(); ++i) {
    if (!positive_[i]) grad.data[i] = Real(0);
  }
  return grad;
}

Tensor AvgPool2d::forward(const Tensor& x, bool, Rng*) {
  const int ho = x.h / k_, wo = x.w / k_;
  if (ho <= 0 || wo <= 0) {
    throw PipelineError(ErrorCode::ShapeMismatch, "pool window larger than input");
  }
  in_h_ = x.h;
  in_w_ = x.w;
  const Real inv = Real(1) / (static_cast<Real>(k_) * k_);
  Tensor out(x.n, x.c, ho, wo);
  for (int i = 0; i < x.n; ++i) {
    for (int ch = 0; ch < x.c; ++ch) {
      for (int y = 0; y < ho; ++y) {
        for (int xo = 0; xo < wo; ++xo) {
          Real sum = 0;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              sum += x.at(i, ch, y * k_ + ky, xo * k_ + kx);
            }
          }
          out.at(i, ch, y, xo) = sum * inv;
        }
      }
    }
  }
  return out;
}

Tensor AvgPool2d::backward(const Tensor& grad_out) {
  Tensor grad_in(grad_out.n, grad_out.c, in_h_, in_w_);
  const Real inv = Real(1) / (static_cast<Real>(k_) * k_);
  for (int i = 0; i < grad_out.n; ++i) {
    for (int ch = 0; ch < grad_out.c; ++ch) {
      for (int y = 0; y < grad_out.h; ++y) {
        for (int xo = 0; xo < grad_out.w; ++xo) {
          const Real g = grad_out.at(i, ch, y, xo) * inv;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              grad_in.at(i, ch, y * k_ + ky, xo * k_ + kx) = g;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool, Rng*) {
  in_h_ = x.h;
  in_w_ = x.w;
  const Real inv = Real(1) / (static_cast<Real>(x.h) * x.w);
  Tensor out(x.n, x.c, 1, 1);
  for (int i = 0; i < x.n; ++i) {
    for (int ch = 0; ch < x.c; ++ch) {
      Real sum = 0;
      for (int y = 0; y < x.h; ++y) {
        for (int xo = 0; xo < x.w; ++xo) sum += x.at(i, ch, y, xo);
      }
      out.at(i, ch, 0, 0) = sum * inv;
    }
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  Tensor grad_in(grad_out.n, grad_out.c, in_h_, in_w_);
  const Real inv = Real(1) / (static_cast<Real>(in_h_) * in_w_);
  for (int i = 0; i < grad_out.n; ++i) {
    for (int ch = 0; ch < grad_out.c; ++ch) {
      const Real g = grad_out.at(i, ch, 0, 0) * inv;
      for (int y = 0; y < in_h_; ++y) {
        for (int xo = 0; xo < in_w_; ++xo) grad_in.at(i, ch, y, xo) = g;
      }
    }
  }
  return grad_in;
}

Dropout::Dropout(double rate) : rate_(rate) {
  if (rate < 0.0 || rate >= 1.0) {
    throw PipelineError(ErrorCode::InvalidConfig, "dropout rate must lie in [0,1)");
  }
}

Tensor Dropout::forward(const Tensor& x, bool train, Rng* rng) {
  active_ = train && rate_ > 0.0;
  if (!active_) return x;
  if (rng == nullptr) {
    throw PipelineError(ErrorCode::InvalidConfig, "dropout needs a random source in train mode");
  }
  const Real keep_scale = Real(1) / (Real(1) - rate_);
  mask_.resize(x.size());
  Tensor out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    mask_[i] = rng->uniform01() >= rate_ ? keep_scale : Real(0);
    out.data[i] *= mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!active_) return grad_out;
  Tensor grad = grad_out;
  for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] *= mask_[i];
  return grad;
}

Tensor Sequential::forward(const Tensor& x, bool train, Rng* rng) {
  Tensor cur = x;
  for (auto& layer : layers_) cur = layer->forward(cur, train, rng);
  return cur;
}

Tensor Sequential::backward(const Tensor& grad_out) {
  Tensor cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
  return cur;
}

void Sequential::collect_params(std::vector<ParamTensor*>& out) {
  for (auto& layer : layers_) layer->collect_params(out);
}

Tensor Residual::forward(const Tensor& x, bool train, Rng* rng) {
  Tensor y = inner_->forward(x, train, rng);
  if (!y.same_shape(x)) {
    throw PipelineError(ErrorCode::ShapeMismatch, "residual branch changed shape");
  }
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += x.data[i];
  return y;
}

Tensor Residual::backward(const Tensor& grad_out) {
  Tensor grad = inner_->backward(grad_out);
  for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += grad_out.data[i];
  return grad;
}

void Residual::collect_params(std::vector<ParamTensor*>& out) { inner_->collect_params(out); }

Tensor Branches::forward(const Tensor& x, bool train, Rng* rng) {
  std::vector<Tensor> outs;
  outs.reserve(branches_.size());
  out_channels_.clear();
  int total_c = 0;
  for (auto& branch : branches_) {
    outs.push_back(branch->forward(x, train, rng));
    const Tensor& y = outs.back();
    if (y.n != outs.front().n || y.h != outs.front().h || y.w != outs.front().w) {
      throw PipelineError(ErrorCode::ShapeMismatch, "branch outputs disagree on spatial shape");
    }
    out_channels_.push_back(y.c);
    total_c += y.c;
  }

  const Tensor& first = outs.front();
  Tensor out(first.n, total_c, first.h, first.w);
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  for (int i = 0; i < first.n; ++i) {
    std::size_t c_off = 0;
    for (const Tensor& y : outs) {
      std::memcpy(&out.data[(static_cast<std::size_t>(i) * total_c + c_off) * plane],
                  &y.data[static_cast<std::size_t>(i) * y.sample_size()],
                  sizeof(Real) * y.sample_size());
      c_off += y.c;
    }
  }
  return out;
}

Tensor Branches::backward(const Tensor& grad_out) {
  const std::size_t plane = static_cast<std::size_t>(grad_out.h) * grad_out.w;
  Tensor grad_in;
  std::size_t c_off = 0;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    Tensor part(grad_out.n, out_channels_[b], grad_out.h, grad_out.w);
    for (int i = 0; i < grad_out.n; ++i) {
      std::memcpy(&part.data[static_cast<std::size_t>(i) * part.sample_size()],
                  &grad_out.data[(static_cast<std::size_t>(i) * grad_out.c + c_off) * plane],
                  sizeof(Real) * part.sample_size());
    }
    Tensor g = branches_[b]->backward(part);
    if (grad_in.data.empty()) {
      grad_in = std::move(g);
    } else {
      for (std::size_t i = 0; i < grad_in.data.size(); ++i) grad_in.data[i] += g.data[i];
    }
    c_off += out_channels_[b];
  }
  return grad_in;
}

void Branches::collect_params(std::vector<ParamTensor*>& out) {
  for (auto& branch : branches_) branch->collect_params(out);
}

AdamW::AdamW(std::vector<ParamTensor*> params, const AdamWConfig& config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (ParamTensor* p : params_) {
    m_.emplace_back(p->value.size(), Real(0));
    v_.emplace_back(p->value.size(), Real(0));
  }
}

void AdamW::zero_grad() {
  for (ParamTensor* p : params_) std::fill(p->grad.begin(), p->grad.end(), Real(0));
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor& p = *params_[i];
    if (!p.trainable) continue;
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const Real g = p.grad[j];
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
      const Real m_hat = m_[i][j] / bc1;
      const Real v_hat = v_[i][j] / bc2;
      p.value[j] -=
          config_.lr * (m_hat / (std::sqrt(v_hat) + config_.eps) + config_.weight_decay * p.value[j]);
    }
  }
}

}  // namespace sonoclass
