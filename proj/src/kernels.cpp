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
#include "snnforge/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace snnforge::kernels {

namespace {

// One output element of a cross-correlation. Shared by both variants so the
// accumulation order is identical.
inline double conv_point(const ConvGeometry& g, std::span<const double> input,
                         std::span<const double> weight, std::size_t o, std::size_t oy,
                         std::size_t ox) {
  double acc = 0.0;
  const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(oy * g.stride_h) -
                            static_cast<std::ptrdiff_t>(g.pad_top);
  const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(ox * g.stride_w) -
                            static_cast<std::ptrdiff_t>(g.pad_left);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const double* w = weight.data() + ((o * g.in_c + c) * g.kernel_h) * g.kernel_w;
    const double* in = input.data() + c * g.in_h * g.in_w;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      const std::ptrdiff_t y = y0 + static_cast<std::ptrdiff_t>(ky);
      if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const std::ptrdiff_t x = x0 + static_cast<std::ptrdiff_t>(kx);
        if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
        acc += w[ky * g.kernel_w + kx] * in[y * static_cast<std::ptrdiff_t>(g.in_w) + x];
      }
    }
  }
  return acc;
}

inline double dense_row(std::size_t in_dim, std::span<const double> input,
                        std::span<const double> weight, std::size_t o) {
  const double* w = weight.data() + o * in_dim;
  double acc = 0.0;
  for (std::size_t j = 0; j < in_dim; ++j) acc += w[j] * input[j];
  return acc;
}

inline double pool_point(const PoolGeometry& g, PoolKind kind, std::span<const double> input,
                         std::size_t c, std::size_t oy, std::size_t ox) {
  const double* in = input.data() + c * g.in_h * g.in_w;
  double acc = kind == PoolKind::max ? -std::numeric_limits<double>::infinity() : 0.0;
  for (std::size_t ky = 0; ky < g.window_h; ++ky) {
    const std::size_t y = oy * g.stride_h + ky;
    for (std::size_t kx = 0; kx < g.window_w; ++kx) {
      const double v = in[y * g.in_w + ox * g.stride_w + kx];
      acc = kind == PoolKind::max ? std::max(acc, v) : acc + v;
    }
  }
  return kind == PoolKind::max ? acc : acc / static_cast<double>(g.window_h * g.window_w);
}

inline double bias_at(std::span<const double> bias, std::size_t o) {
  return bias.empty() ? 0.0 : bias[o];
}

}  // namespace

namespace reference {

void conv2d(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
            std::span<const double> bias, std::span<double> output) {
  for (std::size_t o = 0; o < g.out_c; ++o)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        output[(o * g.out_h + oy) * g.out_w + ox] =
            conv_point(g, input, weight, o, oy, ox) + bias_at(bias, o);
}

void dense(std::size_t out_dim, std::size_t in_dim, std::span<const double> input,
           std::span<const double> weight, std::span<const double> bias, std::span<double> output) {
  for (std::size_t o = 0; o < out_dim; ++o)
    output[o] = dense_row(in_dim, input, weight, o) + bias_at(bias, o);
}

void pool(const PoolGeometry& g, PoolKind kind, std::span<const double> input,
          std::span<double> output) {
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox)
        output[(c * g.out_h + oy) * g.out_w + ox] = pool_point(g, kind, input, c, oy, ox);
}

}  // namespace reference

namespace parallel {

void conv2d(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
            std::span<const double> bias, std::span<double> output) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(g.out_c * g.out_h);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t o = static_cast<std::size_t>(r) / g.out_h;
    const std::size_t oy = static_cast<std::size_t>(r) % g.out_h;
    double* out = output.data() + static_cast<std::size_t>(r) * g.out_w;
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
      out[ox] = conv_point(g, input, weight, o, oy, ox) + bias_at(bias, o);
  }
}

void dense(std::size_t out_dim, std::size_t in_dim, std::span<const double> input,
           std::span<const double> weight, std::span<const double> bias, std::span<double> output) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(out_dim);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::ptrdiff_t o = 0; o < n; ++o)
    output[o] = dense_row(in_dim, input, weight, static_cast<std::size_t>(o)) +
                bias_at(bias, static_cast<std::size_t>(o));
}

void pool(const PoolGeometry& g, PoolKind kind, std::span<const double> input,
          std::span<double> output) {
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(g.channels * g.out_h);
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t c = static_cast<std::size_t>(r) / g.out_h;
    const std::size_t oy = static_cast<std::size_t>(r) % g.out_h;
    for (std::size_t ox = 0; ox < g.out_w; ++ox)
      output[(c * g.out_h + oy) * g.out_w + ox] = pool_point(g, kind, input, c, oy, ox);
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  static const int threads = [] {
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("SNNFORGE_THREADS")) {
      try {
        const int cap = std::stoi(env);
        if (cap > 0) n = std::min(n, cap);
      } catch (...) {
      }
    }
    return std::max(n, 1);
  }();
  return threads;
#else
  return 1;
#endif
}

}  // namespace snnforge::kernels
