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
#pragma once

// Helpers shared by the unit tests and the acceptance runner: random network
// generators and naive loop-nest oracles written independently of the
// library kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "snnforge/network.hpp"
#include "snnforge/tensor.hpp"

namespace support {

using snnforge::LayerKind;
using snnforge::LayerSpec;
using snnforge::NetworkSpec;
using snnforge::Padding;
using snnforge::Shape;
using snnforge::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

inline LayerSpec make_simple(LayerKind kind, std::string name) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  return l;
}

inline LayerSpec make_dense(std::string name, std::size_t out, std::size_t in, std::mt19937_64& rng,
                            double w = 0.6, double b = 0.2) {
  LayerSpec l = make_simple(LayerKind::dense, std::move(name));
  l.weight = random_tensor({out, in}, rng, -w, w);
  l.bias = random_tensor({out}, rng, -b, b);
  return l;
}

inline LayerSpec make_conv(std::string name, std::size_t out, std::size_t in, std::size_t k,
                           std::size_t stride, Padding padding, std::mt19937_64& rng, double w = 0.6,
                           double b = 0.2) {
  LayerSpec l = make_simple(LayerKind::conv2d, std::move(name));
  l.weight = random_tensor({out, in, k, k}, rng, -w, w);
  l.bias = random_tensor({out}, rng, -b, b);
  l.stride = {stride, stride};
  l.padding = padding;
  return l;
}

inline LayerSpec make_pool(LayerKind kind, std::string name, std::size_t window, std::size_t stride) {
  LayerSpec l = make_simple(kind, std::move(name));
  l.window = {window, window};
  l.stride = {stride, stride};
  return l;
}

inline LayerSpec make_bn(std::string name, std::size_t channels, std::mt19937_64& rng) {
  LayerSpec l = make_simple(LayerKind::batchnorm, std::move(name));
  l.mean = random_tensor({channels}, rng, -0.5, 0.5);
  l.sigma = random_tensor({channels}, rng, 0.3, 2.0);
  l.gamma = random_tensor({channels}, rng, 0.5, 1.5);
  l.beta = random_tensor({channels}, rng, -0.3, 0.3);
  return l;
}

/// Random sequential network with `param_layers` conv2d/dense layers (>= 1).
/// Convolutions come first on a small image; pooling layers are sprinkled in
/// when `pooling` is set; the head is a dense layer followed by softmax when
/// `softmax_head` is set and by relu otherwise.
inline NetworkSpec random_network(std::mt19937_64& rng, std::size_t param_layers, bool pooling,
                                  bool softmax_head, bool batchnorm = false) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<std::size_t> channels(1, 3);
  NetworkSpec net;
  std::size_t c = channels(rng), h = 6 + 2 * static_cast<std::size_t>(coin(rng)), w = h;
  net.input_shape = {c, h, w};
  const std::size_t convs = param_layers == 1 ? 0 : std::min<std::size_t>(param_layers - 1, 2);
  std::size_t id = 0;
  const auto name = [&](const char* base) { return std::string(base) + std::to_string(id++); };
  for (std::size_t i = 0; i < convs; ++i) {
    const std::size_t out = channels(rng) + 1;
    const Padding pad = (coin(rng) && h >= 5) ? Padding::valid : Padding::same;
    const std::size_t stride = (coin(rng) && h >= 6) ? 2 : 1;
    net.layers.push_back(make_conv(name("conv"), out, c, 3, stride, pad, rng));
    if (batchnorm) net.layers.push_back(make_bn(name("bn"), out, rng));
    net.layers.push_back(make_simple(LayerKind::relu, name("relu")));
    const auto g = snnforge::conv_padding(h, w, 3, 3, {stride, stride}, pad);
    c = out;
    h = g.out_h;
    w = g.out_w;
    if (pooling && h >= 4 && w >= 4) {
      const LayerKind kind = coin(rng) ? LayerKind::maxpool : LayerKind::avgpool;
      net.layers.push_back(make_pool(kind, name("pool"), 2, 2));
      h /= 2;
      w /= 2;
    }
  }
  net.layers.push_back(make_simple(LayerKind::flatten, name("flatten")));
  std::size_t in = c * h * w;
  for (std::size_t i = convs; i < param_layers; ++i) {
    const bool last = i + 1 == param_layers;
    const std::size_t out = last ? 4 : 5 + channels(rng);
    net.layers.push_back(make_dense(name("fc"), out, in, rng));
    if (batchnorm && !last) net.layers.push_back(make_bn(name("bn"), out, rng));
    net.layers.push_back(make_simple(last && softmax_head ? LayerKind::softmax : LayerKind::relu, name("act")));
    in = out;
  }
  return net;
}

// ---- Naive oracles ----------------------------------------------------------

/// W x (+ b) computed with an explicit loop nest, for conv2d / dense / avgpool.
/// Same padding follows the usual ceil(in/stride) rule with the extra padding
/// row/column at the bottom/right.
inline std::vector<double> naive_linear(const LayerSpec& layer, const Shape& in_shape,
                                        const std::vector<double>& x, bool with_bias) {
  if (layer.kind == LayerKind::dense) {
    const std::size_t out = layer.weight.shape[0], in = layer.weight.shape[1];
    std::vector<double> y(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double s = with_bias ? layer.bias[o] : 0.0;
      for (std::size_t i = 0; i < in; ++i) s += layer.weight[o * in + i] * x[i];
      y[o] = s;
    }
    return y;
  }
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  if (layer.kind == LayerKind::avgpool) {
    const std::size_t wh = layer.window[0], ww = layer.window[1];
    const std::size_t sh = layer.stride[0], sw = layer.stride[1];
    const std::size_t OH = (H - wh) / sh + 1, OW = (W - ww) / sw + 1;
    std::vector<double> y(C * OH * OW, 0.0);
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t oy = 0; oy < OH; ++oy)
        for (std::size_t ox = 0; ox < OW; ++ox) {
          double s = 0.0;
          for (std::size_t ky = 0; ky < wh; ++ky)
            for (std::size_t kx = 0; kx < ww; ++kx) s += x[(ch * H + oy * sh + ky) * W + ox * sw + kx];
          y[(ch * OH + oy) * OW + ox] = s / static_cast<double>(wh * ww);
        }
    return y;
  }
  const std::size_t O = layer.weight.shape[0], KH = layer.weight.shape[2], KW = layer.weight.shape[3];
  const std::size_t sh = layer.stride[0], sw = layer.stride[1];
  std::size_t OH, OW, top = 0, left = 0;
  if (layer.padding == Padding::valid) {
    OH = (H - KH) / sh + 1;
    OW = (W - KW) / sw + 1;
  } else {
    OH = (H + sh - 1) / sh;
    OW = (W + sw - 1) / sw;
    const std::size_t ph = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((OH - 1) * sh + KH) -
                                                           static_cast<std::ptrdiff_t>(H));
    const std::size_t pw = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>((OW - 1) * sw + KW) -
                                                           static_cast<std::ptrdiff_t>(W));
    top = ph / 2;
    left = pw / 2;
  }
  std::vector<double> y(O * OH * OW, 0.0);
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t oy = 0; oy < OH; ++oy)
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double s = with_bias ? layer.bias[o] : 0.0;
        for (std::size_t ch = 0; ch < C; ++ch)
          for (std::size_t ky = 0; ky < KH; ++ky)
            for (std::size_t kx = 0; kx < KW; ++kx) {
              const auto iy = static_cast<std::ptrdiff_t>(oy * sh + ky) - static_cast<std::ptrdiff_t>(top);
              const auto ix = static_cast<std::ptrdiff_t>(ox * sw + kx) - static_cast<std::ptrdiff_t>(left);
              if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(H) || ix >= static_cast<std::ptrdiff_t>(W))
                continue;
              s += layer.weight[((o * C + ch) * KH + ky) * KW + kx] *
                   x[(ch * H + static_cast<std::size_t>(iy)) * W + static_cast<std::size_t>(ix)];
            }
        y[(o * OH + oy) * OW + ox] = s;
      }
  return y;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace support
