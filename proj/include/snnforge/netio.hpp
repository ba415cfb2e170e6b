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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "snnforge/network.hpp"
#include "snnforge/tensor.hpp"

namespace snnforge::netio {

// ASNN container:
//   "ASNN" | version u32 LE | manifest_len u64 LE | manifest (UTF-8 JSON,
//   sorted keys, compact) | payload (f32 LE tensors in manifest order)
//
// Tensor descriptors carry byte offsets/lengths into the payload. Values are
// stored as f32 and widened to double on load, so save() rounds to f32.
inline constexpr std::uint32_t kFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const NetworkSpec& net);
NetworkSpec parse_model(std::span<const std::uint8_t> bytes);

void save_model(const NetworkSpec& net, const std::filesystem::path& path);
NetworkSpec load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Images scaled to [0,1] plus integer labels. `pixels` holds `count` samples
/// of shape `sample_shape` back to back.
struct DatasetHandle {
  Shape sample_shape;
  std::size_t count = 0;
  std::vector<double> pixels;
  std::vector<int> labels;

  Tensor sample(std::size_t index) const;
  /// Sample reshaped to `shape` (element counts must agree).
  Tensor sample(std::size_t index, const Shape& shape) const;
  bool has_labels() const { return !labels.empty(); }
};

/// IDX image file (magic 0x00000803 for [N,H,W] or 0x00000804 for [N,C,H,W])
/// plus IDX label file (magic 0x00000801). Pixel bytes are divided by 255.
DatasetHandle load_idx(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);
DatasetHandle load_idx_images(const std::filesystem::path& images_path);

DatasetHandle parse_idx(std::span<const std::uint8_t> images,
                        std::span<const std::uint8_t> labels);

}  // namespace snnforge::netio
