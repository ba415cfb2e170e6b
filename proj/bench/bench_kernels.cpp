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

// Serial reference kernels against their OpenMP counterparts. Thread count
// follows SNNFORGE_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "snnforge/kernels.hpp"

namespace {

using namespace snnforge::kernels;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Same-padded 3x3 convolution, channels in -> channels * 2 on a square map.
ConvGeometry conv_geometry(std::size_t channels, std::size_t size) {
  ConvGeometry g;
  g.in_c = channels;
  g.in_h = g.in_w = size;
  g.out_c = channels * 2;
  g.out_h = g.out_w = size;
  g.kernel_h = g.kernel_w = 3;
  g.pad_top = g.pad_left = 1;
  return g;
}

template <auto Kernel>
void BM_conv2d(benchmark::State& state) {
  const ConvGeometry g = conv_geometry(static_cast<std::size_t>(state.range(0)),
                                       static_cast<std::size_t>(state.range(1)));
  const auto input = random_values(g.in_c * g.in_h * g.in_w, 1);
  const auto weight = random_values(g.out_c * g.in_c * g.kernel_h * g.kernel_w, 2);
  const auto bias = random_values(g.out_c, 3);
  std::vector<double> output(g.out_c * g.out_h * g.out_w);
  for (auto _ : state) {
    Kernel(g, input, weight, bias, output);
    benchmark::DoNotOptimize(output.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(output.size()));
}

template <auto Kernel>
void BM_dense(benchmark::State& state) {
  const auto in_dim = static_cast<std::size_t>(state.range(0));
  const auto out_dim = static_cast<std::size_t>(state.range(1));
  const auto input = random_values(in_dim, 4);
  const auto weight = random_values(out_dim * in_dim, 5);
  const auto bias = random_values(out_dim, 6);
  std::vector<double> output(out_dim);
  for (auto _ : state) {
    Kernel(out_dim, in_dim, input, weight, bias, output);
    benchmark::DoNotOptimize(output.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(out_dim * in_dim));
}

template <auto Kernel, PoolKind Kind>
void BM_pool(benchmark::State& state) {
  PoolGeometry g;
  g.channels = static_cast<std::size_t>(state.range(0));
  g.in_h = g.in_w = static_cast<std::size_t>(state.range(1));
  g.window_h = g.window_w = g.stride_h = g.stride_w = 2;
  g.out_h = g.out_w = g.in_h / 2;
  const auto input = random_values(g.channels * g.in_h * g.in_w, 7);
  std::vector<double> output(g.channels * g.out_h * g.out_w);
  for (auto _ : state) {
    Kernel(g, Kind, input, output);
    benchmark::DoNotOptimize(output.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(input.size()));
}

// MNIST-sized and CIFAR-sized layers.
void conv_args(benchmark::internal::Benchmark* b) { b->Args({1, 28})->Args({16, 14})->Args({32, 32}); }
void dense_args(benchmark::internal::Benchmark* b) { b->Args({1568, 128})->Args({4096, 512}); }
void pool_args(benchmark::internal::Benchmark* b) { b->Args({16, 28})->Args({64, 32}); }

BENCHMARK(BM_conv2d<reference::conv2d>)->Name("conv2d/reference")->Apply(conv_args);
BENCHMARK(BM_conv2d<parallel::conv2d>)->Name("conv2d/parallel")->Apply(conv_args)->UseRealTime();
BENCHMARK(BM_dense<reference::dense>)->Name("dense/reference")->Apply(dense_args);
BENCHMARK(BM_dense<parallel::dense>)->Name("dense/parallel")->Apply(dense_args)->UseRealTime();
BENCHMARK(BM_pool<reference::pool, PoolKind::max>)->Name("maxpool/reference")->Apply(pool_args);
BENCHMARK(BM_pool<parallel::pool, PoolKind::max>)->Name("maxpool/parallel")->Apply(pool_args)->UseRealTime();
BENCHMARK(BM_pool<reference::pool, PoolKind::avg>)->Name("avgpool/reference")->Apply(pool_args);
BENCHMARK(BM_pool<parallel::pool, PoolKind::avg>)->Name("avgpool/parallel")->Apply(pool_args)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
