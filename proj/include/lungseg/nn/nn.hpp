// Copyright (c) 2026 The lungseg Authors. All rights reserved.
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

#include <cmath>
#include <string>
#include <vector>

#include "lungseg/autograd/conv.hpp"
#include "lungseg/autograd/ops.hpp"
#include "lungseg/core/rng.hpp"

namespace lungseg::nn {

template <typename S>
struct NamedParam {
  std::string name;
  ag::Variable<S> var;
};

template <typename S>
using ParamList = std::vector<NamedParam<S>>;

enum class Init { kHeUniform, kXavierUniform, kZeros };

template <typename S>
Tensor<S> init_tensor(Shape shape, Init scheme, Index fan_in, Index fan_out, Rng& rng) {
  Tensor<S> t(shape);
  double bound = 0.0;
  switch (scheme) {
    case Init::kHeUniform:
      bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      break;
    case Init::kXavierUniform:
      bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      break;
    case Init::kZeros:
      return t;
  }
  for (Index i = 0; i < t.numel(); ++i)
    t.flat()[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

/// Convolution layer owning weight and bias parameters.
template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(Index in_c, Index out_c, Index kernel, Index stride, Index pad, Rng& rng,
         Init scheme = Init::kHeUniform)
      : stride_(stride), pad_(pad) {
    const Index fan_in = in_c * kernel * kernel;
    const Index fan_out = out_c * kernel * kernel;
    weight_ = ag::parameter(
        init_tensor<S>(Shape{out_c, in_c, kernel, kernel}, scheme, fan_in, fan_out, rng));
    bias_ = ag::parameter(Tensor<S>(Shape{1, out_c, 1, 1}));
  }

  ag::Variable<S> operator()(const ag::Variable<S>& x) const {
    return ag::conv2d(x, weight_, bias_, stride_, pad_);
  }

  void register_params(ParamList<S>& out, const std::string& prefix) {
    out.push_back({prefix + ".weight", weight_});
    out.push_back({prefix + ".bias", bias_});
  }

  ag::Variable<S>& weight() { return weight_; }
  ag::Variable<S>& bias() { return bias_; }

 private:
  ag::Variable<S> weight_, bias_;
  Index stride_ = 1, pad_ = 0;
};

/// Adam with bias correction; parameters without an accumulated gradient are
/// skipped for the step.
template <typename S>
class Adam {
 public:
  explicit Adam(ParamList<S> params, S lr = S(1e-4), S beta1 = S(0.9), S beta2 = S(0.999),
                S eps = S(1e-8))
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& p : params_) {
      m_.emplace_back(p.var.value().shape());
      v_.emplace_back(p.var.value().shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  void set_lr(S lr) { lr_ = lr; }

  void step() {
    ++t_;
    const S bc1 = S(1) - std::pow(beta1_, static_cast<S>(t_));
    const S bc2 = S(1) - std::pow(beta2_, static_cast<S>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto node = params_[i].var.node();
      if (!node->has_grad) continue;
      const auto& g = node->grad.flat();
      m_[i].flat() = beta1_ * m_[i].flat() + (S(1) - beta1_) * g;
      v_[i].flat() = beta2_ * v_[i].flat() + (S(1) - beta2_) * g.square();
      node->value.flat() -=
          lr_ * (m_[i].flat() / bc1) / ((v_[i].flat() / bc2).sqrt() + eps_);
    }
  }

 private:
  ParamList<S> params_;
  std::vector<Tensor<S>> m_, v_;
  S lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// SGD with classical momentum and decoupled-from-nothing L2 weight decay
/// folded into the gradient.
template <typename S>
class Sgd {
 public:
  explicit Sgd(ParamList<S> params, S lr, S momentum = S(0.99), S weight_decay = S(5e-4))
      : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    for (auto& p : params_) buf_.emplace_back(p.var.value().shape());
  }

  void zero_grad() {
    for (auto& p : params_) p.var.zero_grad();
  }

  void set_lr(S lr) { lr_ = lr; }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto node = params_[i].var.node();
      if (!node->has_grad) continue;
      buf_[i].flat() = momentum_ * buf_[i].flat() + node->grad.flat() +
                       weight_decay_ * node->value.flat();
      node->value.flat() -= lr_ * buf_[i].flat();
    }
  }

 private:
  ParamList<S> params_;
  std::vector<Tensor<S>> buf_;
  S lr_, momentum_, weight_decay_;
};

template <typename S>
Index count_parameters(const ParamList<S>& params) {
  Index n = 0;
  for (const auto& p : params) n += p.var.value().numel();
  return n;
}

}  // namespace lungseg::nn
