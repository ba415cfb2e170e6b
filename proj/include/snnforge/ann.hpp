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

#include <span>
#include <vector>

#include "snnforge/network.hpp"
#include "snnforge/tensor.hpp"

namespace snnforge::ann {

enum class Exec { serial, parallel };

enum class Activation { relu, softmax };
enum class PoolMode { max, avg };

/// Cross-correlation of a [C,H,W] input with an [O,C,KH,KW] kernel.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const double> bias,
              const Pair& stride, Padding padding, Exec exec = Exec::parallel);

/// W x + b for W of shape [O,I].
Tensor dense(const Tensor& input, const Tensor& weight, std::span<const double> bias,
             Exec exec = Exec::parallel);

Tensor pool(const Tensor& input, PoolMode mode, const Pair& window, const Pair& stride,
            Exec exec = Exec::parallel);

/// Softmax subtracts the maximum before exponentiating.
Tensor activation(const Tensor& input, Activation kind);

/// gamma/sigma * (x - mu) + beta, per channel (leading dimension).
Tensor batchnorm_infer(const Tensor& input, std::span<const double> mean,
                       std::span<const double> sigma, std::span<const double> gamma,
                       std::span<const double> beta);

Tensor apply_layer(const LayerSpec& layer, const Tensor& input, Exec exec = Exec::parallel);

/// Output of every layer for one sample; `layers[i]` is the output of layer i.
struct ActivationRecord {
  std::vector<Tensor> layers;

  const Tensor& output() const { return layers.back(); }
};

ActivationRecord forward(const NetworkSpec& net, const Tensor& input, Exec exec = Exec::parallel);

/// Index of the largest element; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace snnforge::ann
