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
#include "snnforge/ann.hpp"

#include <algorithm>
#include <cmath>

#include "snnforge/error.hpp"
#include "snnforge/kernels.hpp"

namespace snnforge::ann {

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const Pair& stride, Padding padding, Exec exec) {
  if (input.rank() != 3 || kernel.rank() != 4 || kernel.shape[1] != input.shape[0])
    throw Error(ErrorCode::ShapeMismatch, "conv2d: input " + shape_to_string(input.shape) +
                                              " vs kernel " + shape_to_string(kernel.shape));
  if (!bias.empty() && bias.size() != kernel.shape[0])
    throw Error(ErrorCode::ShapeMismatch, "conv2d: bias length");
  if (stride[0] == 0 || stride[1] == 0) throw Error(ErrorCode::ShapeMismatch, "conv2d: zero stride");
  const auto pad = conv_padding(input.shape[1], input.shape[2], kernel.shape[2], kernel.shape[3],
                                stride, padding);
  if (pad.out_h == 0 || pad.out_w == 0)
    throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel larger than input");

  kernels::ConvGeometry g;
  g.in_c = input.shape[0];
  g.in_h = input.shape[1];
  g.in_w = input.shape[2];
  g.out_c = kernel.shape[0];
  g.out_h = pad.out_h;
  g.out_w = pad.out_w;
  g.kernel_h = kernel.shape[2];
  g.kernel_w = kernel.shape[3];
  g.stride_h = stride[0];
  g.stride_w = stride[1];
  g.pad_top = pad.top;
  g.pad_left = pad.left;

  Tensor out({g.out_c, g.out_h, g.out_w});
  if (exec == Exec::serial)
    kernels::reference::conv2d(g, input.values(), kernel.values(), bias, out.values());
  else
    kernels::parallel::conv2d(g, input.values(), kernel.values(), bias, out.values());
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weight, std::span<const double> bias, Exec exec) {
  if (weight.rank() != 2 || weight.shape[1] != input.size())
    throw Error(ErrorCode::ShapeMismatch, "dense: input " + shape_to_string(input.shape) +
                                              " vs weight " + shape_to_string(weight.shape));
  if (!bias.empty() && bias.size() != weight.shape[0])
    throw Error(ErrorCode::ShapeMismatch, "dense: bias length");
  Tensor out({weight.shape[0]});
  if (exec == Exec::serial)
    kernels::reference::dense(weight.shape[0], weight.shape[1], input.values(), weight.values(), bias,
                              out.values());
  else
    kernels::parallel::dense(weight.shape[0], weight.shape[1], input.values(), weight.values(), bias,
                             out.values());
  return out;
}

Tensor pool(const Tensor& input, PoolMode mode, const Pair& window, const Pair& stride, Exec exec) {
  if (input.rank() != 3) throw Error(ErrorCode::ShapeMismatch, "pool: expects [C,H,W]");
  if (window[0] == 0 || window[1] == 0 || stride[0] == 0 || stride[1] == 0)
    throw Error(ErrorCode::ShapeMismatch, "pool: zero window or stride");
  if (window[0] > input.shape[1] || window[1] > input.shape[2])
    throw Error(ErrorCode::ShapeMismatch, "pool: window larger than input");
  kernels::PoolGeometry g;
  g.channels = input.shape[0];
  g.in_h = input.shape[1];
  g.in_w = input.shape[2];
  g.window_h = window[0];
  g.window_w = window[1];
  g.stride_h = stride[0];
  g.stride_w = stride[1];
  g.out_h = (g.in_h - g.window_h) / g.stride_h + 1;
  g.out_w = (g.in_w - g.window_w) / g.stride_w + 1;
  Tensor out({g.channels, g.out_h, g.out_w});
  const auto kind = mode == PoolMode::max ? kernels::PoolKind::max : kernels::PoolKind::avg;
  if (exec == Exec::serial)
    kernels::reference::pool(g, kind, input.values(), out.values());
  else
    kernels::parallel::pool(g, kind, input.values(), out.values());
  return out;
}

Tensor activation(const Tensor& input, Activation kind) {
  Tensor out = input;
  if (kind == Activation::relu) {
    for (double& v : out.data) v = std::max(v, 0.0);
    return out;
  }
  if (input.rank() != 1) throw Error(ErrorCode::ShapeMismatch, "softmax expects a rank-1 input");
  const double peak = *std::max_element(out.data.begin(), out.data.end());
  double total = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : out.data) v /= total;
  return out;
}

Tensor batchnorm_infer(const Tensor& input, std::span<const double> mean,
                       std::span<const double> sigma, std::span<const double> gamma,
                       std::span<const double> beta) {
  if (input.rank() == 0) throw Error(ErrorCode::ShapeMismatch, "batchnorm on scalar");
  const std::size_t channels = input.shape[0];
  if (mean.size() != channels || sigma.size() != channels || gamma.size() != channels ||
      beta.size() != channels)
    throw Error(ErrorCode::ShapeMismatch, "batchnorm parameter length");
  for (double s : sigma)
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "batchnorm: sigma must be > 0");
  Tensor out = input;
  const std::size_t inner = input.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const double scale = gamma[c] / sigma[c];
    for (std::size_t k = 0; k < inner; ++k) {
      double& v = out.data[c * inner + k];
      v = scale * (v - mean[c]) + beta[c];
    }
  }
  return out;
}

Tensor apply_layer(const LayerSpec& layer, const Tensor& input, Exec exec) {
  switch (layer.kind) {
    case LayerKind::conv2d:
      return conv2d(input, layer.weight, layer.bias.values(), layer.stride, layer.padding, exec);
    case LayerKind::dense:
      return dense(input, layer.weight, layer.bias.values(), exec);
    case LayerKind::batchnorm:
      return batchnorm_infer(input, layer.mean.values(), layer.sigma.values(), layer.gamma.values(),
                             layer.beta.values());
    case LayerKind::relu:
      return activation(input, Activation::relu);
    case LayerKind::softmax:
      return activation(input, Activation::softmax);
    case LayerKind::maxpool:
      return pool(input, PoolMode::max, layer.window, layer.stride, exec);
    case LayerKind::avgpool:
      return pool(input, PoolMode::avg, layer.window, layer.stride, exec);
    case LayerKind::flatten:
      return input.reshaped({input.size()});
  }
  throw Error(ErrorCode::InvalidArgument, "unknown layer kind");
}

ActivationRecord forward(const NetworkSpec& net, const Tensor& input, Exec exec) {
  if (input.shape != net.input_shape)
    throw Error(ErrorCode::ShapeMismatch, "input " + shape_to_string(input.shape) +
                                              " does not match network input " +
                                              shape_to_string(net.input_shape));
  ActivationRecord record;
  record.layers.reserve(net.layers.size());
  const Tensor* current = &input;
  for (const LayerSpec& layer : net.layers) {
    record.layers.push_back(apply_layer(layer, *current, exec));
    current = &record.layers.back();
  }
  return record;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace snnforge::ann
