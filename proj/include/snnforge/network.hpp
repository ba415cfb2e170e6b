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

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "snnforge/tensor.hpp"

namespace snnforge {

enum class LayerKind { conv2d, dense, batchnorm, relu, softmax, maxpool, avgpool, flatten };
enum class Padding { valid, same };

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);
std::string_view to_string(Padding padding);
std::optional<Padding> parse_padding(std::string_view name);

using Pair = std::array<std::size_t, 2>;

/// One node of the sequential layer graph. Only the fields relevant to `kind`
/// are populated:
///   conv2d    weight [O,C,KH,KW], bias [O], stride, padding
///   dense     weight [O,I], bias [O]
///   batchnorm mean, sigma, gamma, beta, each [C] (sigma is the standard
///             deviation including the training epsilon)
///   maxpool / avgpool  window, stride (valid padding, floor rule)
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;

  Tensor weight;
  Tensor bias;

  Tensor mean;
  Tensor sigma;
  Tensor gamma;
  Tensor beta;

  Pair window{1, 1};
  Pair stride{1, 1};
  Padding padding = Padding::valid;

  bool has_parameters() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }

  bool operator==(const LayerSpec&) const = default;
};

/// Sequential network in channels-first layout. A sample has shape
/// `input_shape` (e.g. [C,H,W] or [I]); there is no batch dimension.
struct NetworkSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;
  /// Set by parameter normalization; informational for the simulator.
  bool normalized = false;

  bool operator==(const NetworkSpec&) const = default;
};

/// Output shape of `layer` applied to a sample of shape `in`.
Shape output_shape(const LayerSpec& layer, const Shape& in);

/// Shapes after every layer (`result[i]` is the output of layer i).
/// Validates the whole graph and throws on the first inconsistency.
std::vector<Shape> infer_shapes(const NetworkSpec& net);

void validate(const NetworkSpec& net);

/// Zero padding applied before the first row/column for `same` convolution.
struct ConvPadding {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};
ConvPadding conv_padding(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw,
                         const Pair& stride, Padding padding);

/// Index of the layer whose output is the post-activation of parameter layer
/// `param_index`: the following relu/softmax if present, else the layer itself.
std::size_t activation_index(const NetworkSpec& net, std::size_t param_index);

/// True when parameter layer `param_index` feeds the final softmax.
bool feeds_softmax(const NetworkSpec& net, std::size_t param_index);

}  // namespace snnforge
