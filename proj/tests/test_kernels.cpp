/*
 * Copyright 2026 The snnforge Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <doctest.h>

#include <cstdlib>
#include <random>

#include "snnforge/ann.hpp"
#include "snnforge/kernels.hpp"
#include "support.hpp"

using namespace snnforge;

TEST_CASE("reference and parallel kernels are bitwise equal") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    kernels::ConvGeometry g;
    g.in_c = 1 + trial % 3;
    g.in_h = 9 + trial % 4;
    g.in_w = 8 + trial % 5;
    g.kernel_h = g.kernel_w = 3;
    g.stride_h = g.stride_w = 1 + trial % 2;
    g.out_c = 4;
    const auto pad = conv_padding(g.in_h, g.in_w, 3, 3, {g.stride_h, g.stride_w},
                                  trial % 2 ? Padding::same : Padding::valid);
    g.out_h = pad.out_h;
    g.out_w = pad.out_w;
    g.pad_top = pad.top;
    g.pad_left = pad.left;
    const Tensor x = support::random_tensor({g.in_c * g.in_h * g.in_w}, rng, -1, 1);
    const Tensor w = support::random_tensor({g.out_c * g.in_c * 9}, rng, -1, 1);
    const Tensor b = support::random_tensor({g.out_c}, rng, -1, 1);
    std::vector<double> y1(g.out_c * g.out_h * g.out_w), y2(y1.size());
    kernels::reference::conv2d(g, x.data, w.data, b.data, y1);
    kernels::parallel::conv2d(g, x.data, w.data, b.data, y2);
    CHECK(y1 == y2);

    const Tensor dw = support::random_tensor({7 * 30}, rng, -1, 1);
    const Tensor dx = support::random_tensor({30}, rng, -1, 1);
    std::vector<double> d1(7), d2(7);
    kernels::reference::dense(7, 30, dx.data, dw.data, {}, d1);
    kernels::parallel::dense(7, 30, dx.data, dw.data, {}, d2);
    CHECK(d1 == d2);

    kernels::PoolGeometry pg{g.in_c, g.in_h, g.in_w, (g.in_h - 2) / 2 + 1, (g.in_w - 2) / 2 + 1, 2, 2, 2, 2};
    for (auto kind : {kernels::PoolKind::max, kernels::PoolKind::avg}) {
      std::vector<double> p1(g.in_c * pg.out_h * pg.out_w), p2(p1.size());
      kernels::reference::pool(pg, kind, x.data, p1);
      kernels::parallel::pool(pg, kind, x.data, p2);
      CHECK(p1 == p2);
    }
  }
}

TEST_CASE("conv2d kernel matches a naive loop nest") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Padding pad = trial % 2 ? Padding::same : Padding::valid;
    const std::size_t stride = 1 + trial % 3;
    const auto layer = support::make_conv("c", 3, 2, 3, stride, pad, rng);
    const Tensor x = support::random_tensor({2, 7, 9}, rng, -1, 1);
    const Tensor y = ann::conv2d(x, layer.weight, layer.bias.data, layer.stride, pad, ann::Exec::parallel);
    const auto expect = support::naive_linear(layer, x.shape, x.data, true);
    REQUIRE(y.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-12));
  }
}

TEST_CASE("max_threads is positive") { CHECK(kernels::max_threads() >= 1); }
