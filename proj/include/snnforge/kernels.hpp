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

// Raw compute kernels behind the ANN forward pass. Each kernel exists twice:
// `reference` is a plain serial loop nest kept as the testing oracle, and
// `parallel` splits the outer loops across OpenMP threads. Both accumulate
// every output element in the same order, so their results are bitwise equal.

#include <cstddef>
#include <span>

namespace snnforge::kernels {

struct ConvGeometry {
  std::size_t in_c = 0, in_h = 0, in_w = 0;
  std::size_t out_c = 0, out_h = 0, out_w = 0;
  std::size_t kernel_h = 0, kernel_w = 0;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_top = 0, pad_left = 0;
};

struct PoolGeometry {
  std::size_t channels = 0, in_h = 0, in_w = 0;
  std::size_t out_h = 0, out_w = 0;
  std::size_t window_h = 1, window_w = 1;
  std::size_t stride_h = 1, stride_w = 1;
};

enum class PoolKind { max, avg };

// `bias` may be empty, in which case it is treated as zero.
namespace reference {
void conv2d(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
            std::span<const double> bias, std::span<double> output);
void dense(std::size_t out_dim, std::size_t in_dim, std::span<const double> input,
           std::span<const double> weight, std::span<const double> bias, std::span<double> output);
void pool(const PoolGeometry& g, PoolKind kind, std::span<const double> input,
          std::span<double> output);
}  // namespace reference

namespace parallel {
void conv2d(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
            std::span<const double> bias, std::span<double> output);
void dense(std::size_t out_dim, std::size_t in_dim, std::span<const double> input,
           std::span<const double> weight, std::span<const double> bias, std::span<double> output);
void pool(const PoolGeometry& g, PoolKind kind, std::span<const double> input,
          std::span<double> output);
}  // namespace parallel

/// Thread count used by the parallel kernels and sample-level fan-out.
/// Honors SNNFORGE_THREADS when set; 1 when built without OpenMP.
int max_threads();

}  // namespace snnforge::kernels
