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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lungseg/autograd/conv.hpp"
#include "lungseg/autograd/ops.hpp"
#include "lungseg/autograd/spatial.hpp"
#include "lungseg/core/rng.hpp"
#include "support/gradcheck.hpp"

using namespace lungseg;
using ag::Variable;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(shape);
  for (Index i = 0; i < t.numel(); ++i) t.flat()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("tensor indexing and planes") {
  Tensor<double> t = Tensor<double>::zeros(2, 3, 4, 5);
  t(1, 2, 3, 4) = 7.0;
  CHECK(t.flat()[t.numel() - 1] == 7.0);
  t.plane(0, 1).setConstant(2.0);
  CHECK(t(0, 1, 0, 0) == 2.0);
  CHECK(t(0, 0, 0, 0) == 0.0);
  CHECK(t.plane(0, 1).rows() == 4);
  CHECK(t.plane(0, 1).cols() == 5);
}

TEST_CASE("elementwise forward values") {
  Rng rng(1);
  auto a = ag::constant(random_tensor(Shape{1, 1, 2, 3}, rng));
  auto b = ag::constant(random_tensor(Shape{1, 1, 2, 3}, rng, 0.5, 2.0));
  CHECK(ag::add(a, b).value().flat()[3] ==
        doctest::Approx(a.value().flat()[3] + b.value().flat()[3]));
  CHECK(ag::mul(a, b).value().flat()[5] ==
        doctest::Approx(a.value().flat()[5] * b.value().flat()[5]));
  CHECK(ag::div(a, b).value().flat()[0] ==
        doctest::Approx(a.value().flat()[0] / b.value().flat()[0]));
  CHECK(ag::sigmoid(a).value().flat()[1] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-a.value().flat()[1]))));
  CHECK(ag::rsub_scalar(1.0, a).value().flat()[2] == doctest::Approx(1.0 - a.value().flat()[2]));
  CHECK(ag::mean(a).value().item() == doctest::Approx(a.value().flat().mean()));
}

TEST_CASE("gradcheck: elementwise and reductions") {
  Rng rng(2);
  auto a = ag::parameter(random_tensor(Shape{1, 2, 3, 3}, rng));
  auto b = ag::parameter(random_tensor(Shape{1, 2, 3, 3}, rng, 0.5, 1.5));
  auto loss = [&] {
    auto x = ag::mul(ag::add(a, b), ag::sigmoid(ag::sub(a, b)));
    auto y = ag::div(x, ag::add_scalar(ag::mul(b, b), 0.7));
    auto z = ag::add(ag::relu(y), ag::abs_t(ag::mul_scalar(a, 0.3)));
    return ag::mean(ag::add(z, ag::rsub_scalar(0.25, ag::clamp(a, -0.5, 0.5))));
  };
  CHECK(lungseg::testing::max_grad_rel_error(loss, {a, b}) < 1e-6);
}

TEST_CASE("gradcheck: sum, expand_channels, concat_channels") {
  Rng rng(3);
  auto a = ag::parameter(random_tensor(Shape{2, 1, 2, 2}, rng));
  auto b = ag::parameter(random_tensor(Shape{2, 3, 2, 2}, rng));
  auto loss = [&] {
    auto e = ag::expand_channels(a, 3);
    auto c = ag::concat_channels(e, b);
    return ag::mean(ag::mul(c, c));
  };
  CHECK(lungseg::testing::max_grad_rel_error(loss, {a, b}) < 1e-6);
  auto s = ag::sum(ag::expand_channels(a, 4));
  CHECK(s.value().item() == doctest::Approx(4.0 * a.value().flat().sum()));
}

TEST_CASE("conv2d matches scalar reference") {
  Rng rng(4);
  const Index N = 2, IC = 3, OC = 4, H = 5, W = 6, K = 3, stride = 2, pad = 1;
  auto x = ag::constant(random_tensor(Shape{N, IC, H, W}, rng));
  auto w = ag::constant(random_tensor(Shape{OC, IC, K, K}, rng));
  auto b = ag::constant(random_tensor(Shape{1, OC, 1, 1}, rng));
  auto y = ag::conv2d(x, w, b, stride, pad);
  const Index OH = (H + 2 * pad - K) / stride + 1;
  const Index OW = (W + 2 * pad - K) / stride + 1;
  REQUIRE(y.shape() == Shape{N, OC, OH, OW});
  for (Index n = 0; n < N; ++n) {
    for (Index oc = 0; oc < OC; ++oc) {
      for (Index oy = 0; oy < OH; ++oy) {
        for (Index ox = 0; ox < OW; ++ox) {
          double acc = b.value()(0, oc, 0, 0);
          for (Index ic = 0; ic < IC; ++ic)
            for (Index ky = 0; ky < K; ++ky)
              for (Index kx = 0; kx < K; ++kx) {
                const Index iy = oy * stride - pad + ky;
                const Index ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.value()(n, ic, iy, ix) * w.value()(oc, ic, ky, kx);
              }
          CHECK(y.value()(n, oc, oy, ox) == doctest::Approx(acc).epsilon(1e-10));
        }
      }
    }
  }
}

TEST_CASE("gradcheck: conv2d") {
  Rng rng(5);
  auto x = ag::parameter(random_tensor(Shape{2, 2, 4, 4}, rng));
  auto w = ag::parameter(random_tensor(Shape{3, 2, 3, 3}, rng));
  auto b = ag::parameter(random_tensor(Shape{1, 3, 1, 1}, rng));
  auto loss = [&] { return ag::mean(ag::abs_t(ag::conv2d(x, w, b, 1, 1))); };
  CHECK(lungseg::testing::max_grad_rel_error(loss, {x, w, b}) < 1e-5);

  auto strided = [&] { return ag::mean(ag::mul(ag::conv2d(x, w, b, 2, 1), ag::conv2d(x, w, b, 2, 1))); };
  CHECK(lungseg::testing::max_grad_rel_error(strided, {x, w, b}) < 1e-5);
}

TEST_CASE("conv2d batch items stay independent") {
  Rng rng(6);
  auto x1 = random_tensor(Shape{2, 1, 6, 6}, rng);
  Tensor<double> x2 = x1;
  for (Index i = 0; i < 36; ++i) x2.flat()[i] = 0.0;  // zero out sample 0 only
  auto w = ag::constant(random_tensor(Shape{2, 1, 3, 3}, rng));
  auto b = ag::constant(Tensor<double>(Shape{1, 2, 1, 1}));
  auto y1 = ag::conv2d(ag::constant(x1), w, b, 1, 1);
  auto y2 = ag::conv2d(ag::constant(x2), w, b, 1, 1);
  // sample 1 output identical bit-for-bit
  const Index plane = 2 * 6 * 6;
  for (Index i = 0; i < plane; ++i)
    CHECK(y1.value().flat()[plane + i] == y2.value().flat()[plane + i]);
}

TEST_CASE("resize_bilinear identity and doubling") {
  Rng rng(7);
  auto x = ag::constant(random_tensor(Shape{1, 2, 5, 7}, rng));
  auto same = ag::resize_bilinear(x, 5, 7);
  CHECK((same.value().flat() - x.value().flat()).abs().maxCoeff() == 0.0);

  // 1x2 -> 1x4: half-pixel mapping gives src = {-0.25, 0.25, 0.75, 1.25}
  Tensor<double> row = Tensor<double>::zeros(1, 1, 1, 2);
  row(0, 0, 0, 0) = 1.0;
  row(0, 0, 0, 1) = 3.0;
  auto up = ag::resize_bilinear(ag::constant(row), 1, 4);
  CHECK(up.value()(0, 0, 0, 0) == doctest::Approx(1.0));
  CHECK(up.value()(0, 0, 0, 1) == doctest::Approx(1.5));
  CHECK(up.value()(0, 0, 0, 2) == doctest::Approx(2.5));
  CHECK(up.value()(0, 0, 0, 3) == doctest::Approx(3.0));
}

TEST_CASE("gradcheck: resize_bilinear up and down") {
  Rng rng(8);
  auto x = ag::parameter(random_tensor(Shape{1, 2, 4, 4}, rng));
  auto up = [&] { return ag::mean(ag::mul(ag::resize_bilinear(x, 8, 8), ag::resize_bilinear(x, 8, 8))); };
  CHECK(lungseg::testing::max_grad_rel_error(up, {x}) < 1e-6);
  auto down = [&] { return ag::mean(ag::abs_t(ag::resize_bilinear(x, 2, 2))); };
  CHECK(lungseg::testing::max_grad_rel_error(down, {x}) < 1e-6);
}

TEST_CASE("avg_pool divisors and values") {
  // 3x3 window, stride 1, pad 1, count_include_pad: corner output averages a
  // 2x2 live region over divisor 9.
  Tensor<double> x = Tensor<double>::full(Shape{1, 1, 4, 4}, 1.0);
  auto y = ag::avg_pool(ag::constant(x), 3, 1, 1, true);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  CHECK(y.value()(0, 0, 0, 0) == doctest::Approx(4.0 / 9.0));
  CHECK(y.value()(0, 0, 1, 1) == doctest::Approx(1.0));
  auto y2 = ag::avg_pool(ag::constant(x), 3, 1, 1, false);
  CHECK(y2.value()(0, 0, 0, 0) == doctest::Approx(1.0));

  // stride-2 non-padded pooling halves each spatial dim
  auto y3 = ag::avg_pool(ag::constant(x), 2, 2, 0, true);
  CHECK(y3.shape() == Shape{1, 1, 2, 2});
  CHECK(y3.value()(0, 0, 1, 1) == doctest::Approx(1.0));
}

TEST_CASE("gradcheck: avg_pool") {
  Rng rng(9);
  auto x = ag::parameter(random_tensor(Shape{1, 2, 5, 5}, rng));
  auto padded = [&] { return ag::mean(ag::mul(ag::avg_pool(x, 3, 1, 1, true), x)); };
  CHECK(lungseg::testing::max_grad_rel_error(padded, {x}) < 1e-6);
  auto strided = [&] { return ag::mean(ag::abs_t(ag::avg_pool(x, 2, 2, 0, true))); };
  CHECK(lungseg::testing::max_grad_rel_error(strided, {x}) < 1e-6);
}

TEST_CASE("bce_with_logits_mean matches clamped-probability reference") {
  Rng rng(10);
  const Shape sh{1, 1, 8, 8};
  auto z = ag::parameter(random_tensor(sh, rng, -4.0, 4.0));
  Tensor<double> t(sh);
  Tensor<double> w(sh);
  for (Index i = 0; i < sh.numel(); ++i) {
    t.flat()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    w.flat()[i] = rng.uniform(0.5, 3.0);
  }
  auto loss = ag::bce_with_logits_mean(z, t, w);
  double num = 0.0, den = 0.0;
  const double eps = 1e-12;
  for (Index i = 0; i < sh.numel(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-z.value().flat()[i]));
    p = std::min(std::max(p, eps), 1.0 - eps);
    num += w.flat()[i] * -(t.flat()[i] * std::log(p) + (1.0 - t.flat()[i]) * std::log(1.0 - p));
    den += w.flat()[i];
  }
  CHECK(loss.value().item() == doctest::Approx(num / den).epsilon(1e-10));

  auto rebuild = [&] { return ag::bce_with_logits_mean(z, t, w); };
  CHECK(lungseg::testing::max_grad_rel_error(rebuild, {z}) < 1e-6);
}

TEST_CASE("softmax_ce_mean matches reference and gradcheck") {
  Rng rng(11);
  const Shape sh{2, 3, 4, 4};
  auto z = ag::parameter(random_tensor(sh, rng, -2.0, 2.0));
  Tensor<double> labels(Shape{2, 1, 4, 4});
  for (Index i = 0; i < labels.numel(); ++i)
    labels.flat()[i] = static_cast<double>(rng.uniform_index(3));
  auto loss = ag::softmax_ce_mean(z, labels);

  double ref = 0.0;
  for (Index n = 0; n < 2; ++n)
    for (Index y = 0; y < 4; ++y)
      for (Index x = 0; x < 4; ++x) {
        double zmax = -1e30;
        for (Index k = 0; k < 3; ++k) zmax = std::max(zmax, z.value()(n, k, y, x));
        double denom = 0.0;
        for (Index k = 0; k < 3; ++k) denom += std::exp(z.value()(n, k, y, x) - zmax);
        const Index lbl = static_cast<Index>(labels(n, 0, y, x));
        ref -= z.value()(n, lbl, y, x) - zmax - std::log(denom);
      }
  ref /= 32.0;
  CHECK(loss.value().item() == doctest::Approx(ref).epsilon(1e-10));

  auto rebuild = [&] { return ag::softmax_ce_mean(z, labels); };
  CHECK(lungseg::testing::max_grad_rel_error(rebuild, {z}) < 1e-6);
}

TEST_CASE("gradient accumulates across shared subexpressions") {
  auto a = ag::parameter(Tensor<double>::scalar(0.7));
  auto s = ag::sigmoid(a);
  auto loss = ag::add(ag::mul(s, s), ag::mul_scalar(s, 2.0));  // d/ds = 2s + 2
  loss.backward();
  const double sv = 1.0 / (1.0 + std::exp(-0.7));
  CHECK(a.grad().item() == doctest::Approx((2.0 * sv + 2.0) * sv * (1.0 - sv)));
}
