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
#include "snnforge/network.hpp"

#include <cmath>

#include "snnforge/error.hpp"

namespace snnforge {

namespace {

constexpr std::array<std::string_view, 8> kKindNames = {
    "conv2d", "dense", "batchnorm", "relu", "softmax", "maxpool", "avgpool", "flatten"};

[[noreturn]] void shape_error(const LayerSpec& layer, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch, "layer '" + layer.name + "': " + what);
}

void require_finite(const LayerSpec& layer, const Tensor& t, const char* field) {
  for (double v : t.data)
    if (!std::isfinite(v))
      throw Error(ErrorCode::NonFinite, "layer '" + layer.name + "' " + field + " has NaN/Inf");
}

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i)
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  return std::nullopt;
}

std::string_view to_string(Padding padding) { return padding == Padding::valid ? "valid" : "same"; }

std::optional<Padding> parse_padding(std::string_view name) {
  if (name == "valid") return Padding::valid;
  if (name == "same") return Padding::same;
  return std::nullopt;
}

ConvPadding conv_padding(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw,
                         const Pair& stride, Padding padding) {
  ConvPadding p;
  if (padding == Padding::valid) {
    if (kh > in_h || kw > in_w) return p;
    p.out_h = (in_h - kh) / stride[0] + 1;
    p.out_w = (in_w - kw) / stride[1] + 1;
    return p;
  }
  p.out_h = (in_h + stride[0] - 1) / stride[0];
  p.out_w = (in_w + stride[1] - 1) / stride[1];
  const std::size_t need_h = (p.out_h - 1) * stride[0] + kh;
  const std::size_t need_w = (p.out_w - 1) * stride[1] + kw;
  p.top = need_h > in_h ? (need_h - in_h) / 2 : 0;
  p.left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  return p;
}

Shape output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv2d: {
      if (in.size() != 3) shape_error(layer, "conv2d expects [C,H,W], got " + shape_to_string(in));
      const Shape& w = layer.weight.shape;
      if (w.size() != 4) shape_error(layer, "conv2d weight must be rank 4");
      if (w[1] != in[0])
        shape_error(layer, "kernel expects " + std::to_string(w[1]) + " channels, input has " +
                               std::to_string(in[0]));
      if (layer.bias.shape != Shape{w[0]}) shape_error(layer, "bias must have shape [O]");
      if (layer.stride[0] == 0 || layer.stride[1] == 0) shape_error(layer, "zero stride");
      const auto p = conv_padding(in[1], in[2], w[2], w[3], layer.stride, layer.padding);
      if (p.out_h == 0 || p.out_w == 0) shape_error(layer, "kernel larger than input");
      return {w[0], p.out_h, p.out_w};
    }
    case LayerKind::dense: {
      if (in.size() != 1) shape_error(layer, "dense expects a rank-1 input, got " + shape_to_string(in));
      const Shape& w = layer.weight.shape;
      if (w.size() != 2 || w[1] != in[0])
        shape_error(layer, "weight " + shape_to_string(w) + " incompatible with input " +
                               shape_to_string(in));
      if (layer.bias.shape != Shape{w[0]}) shape_error(layer, "bias must have shape [O]");
      return {w[0]};
    }
    case LayerKind::batchnorm: {
      if (in.empty()) shape_error(layer, "batchnorm on scalar input");
      const Shape c{in[0]};
      for (const Tensor* t : {&layer.mean, &layer.sigma, &layer.gamma, &layer.beta})
        if (t->shape != c) shape_error(layer, "batchnorm parameters must have shape " + shape_to_string(c));
      return in;
    }
    case LayerKind::relu:
      return in;
    case LayerKind::softmax:
      if (in.size() != 1) shape_error(layer, "softmax expects a rank-1 input");
      return in;
    case LayerKind::maxpool:
    case LayerKind::avgpool: {
      if (in.size() != 3) shape_error(layer, "pooling expects [C,H,W]");
      if (layer.window[0] == 0 || layer.window[1] == 0 || layer.stride[0] == 0 || layer.stride[1] == 0)
        shape_error(layer, "zero window or stride");
      if (layer.window[0] > in[1] || layer.window[1] > in[2])
        shape_error(layer, "window larger than input");
      return {in[0], (in[1] - layer.window[0]) / layer.stride[0] + 1,
              (in[2] - layer.window[1]) / layer.stride[1] + 1};
    }
    case LayerKind::flatten:
      return {element_count(in)};
  }
  shape_error(layer, "unknown layer kind");
}

std::vector<Shape> infer_shapes(const NetworkSpec& net) {
  if (net.input_shape.empty() || element_count(net.input_shape) == 0)
    throw Error(ErrorCode::ShapeMismatch, "empty input shape");
  if (net.layers.empty()) throw Error(ErrorCode::InvalidArgument, "network has no layers");
  std::vector<Shape> shapes;
  shapes.reserve(net.layers.size());
  Shape current = net.input_shape;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    if (layer.kind == LayerKind::softmax && i + 1 != net.layers.size())
      throw Error(ErrorCode::InvalidArgument, "softmax must be the final layer");
    current = output_shape(layer, current);
    shapes.push_back(current);
  }
  return shapes;
}

void validate(const NetworkSpec& net) {
  infer_shapes(net);
  for (const LayerSpec& layer : net.layers) {
    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense:
        require_finite(layer, layer.weight, "weight");
        require_finite(layer, layer.bias, "bias");
        break;
      case LayerKind::batchnorm:
        require_finite(layer, layer.mean, "mean");
        require_finite(layer, layer.sigma, "sigma");
        require_finite(layer, layer.gamma, "gamma");
        require_finite(layer, layer.beta, "beta");
        for (double s : layer.sigma.data)
          if (!(s > 0.0))
            throw Error(ErrorCode::InvalidArgument, "layer '" + layer.name + "': sigma must be > 0");
        break;
      default:
        break;
    }
  }
  bool has_param = false;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    has_param = has_param || net.layers[i].has_parameters();
    for (std::size_t j = 0; j < i; ++j)
      if (net.layers[j].name == net.layers[i].name)
        throw Error(ErrorCode::InvalidArgument, "duplicate layer name '" + net.layers[i].name + "'");
  }
  if (!has_param) throw Error(ErrorCode::InvalidArgument, "network has no conv2d/dense layer");
}

std::size_t activation_index(const NetworkSpec& net, std::size_t param_index) {
  std::size_t i = param_index + 1;
  // A batchnorm between the parameter layer and its activation is skipped.
  while (i < net.layers.size() && net.layers[i].kind == LayerKind::batchnorm) ++i;
  if (i < net.layers.size() &&
      (net.layers[i].kind == LayerKind::relu || net.layers[i].kind == LayerKind::softmax))
    return i;
  return i - 1;
}

bool feeds_softmax(const NetworkSpec& net, std::size_t param_index) {
  const std::size_t a = activation_index(net, param_index);
  return net.layers[a].kind == LayerKind::softmax;
}

}  // namespace snnforge
