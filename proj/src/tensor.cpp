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
#include "snnforge/tensor.hpp"

#include <functional>
#include <numeric>

#include "snnforge/error.hpp"

namespace snnforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotFoldable: return "NotFoldable";
    case ErrorCode::DeadLayer: return "DeadLayer";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::WrongResetMode: return "WrongResetMode";
  }
  return "Unknown";
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(element_count(shape), fill) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != element_count(shape))
    throw Error(ErrorCode::ShapeMismatch, "tensor of shape " + shape_to_string(shape) +
                                              " given " + std::to_string(data.size()) + " values");
}

Tensor::Tensor(Shape s, std::initializer_list<double> values)
    : Tensor(std::move(s), std::vector<double>(values)) {}

Tensor Tensor::reshaped(Shape s) const {
  if (element_count(s) != data.size())
    throw Error(ErrorCode::ShapeMismatch,
                "cannot reshape " + shape_to_string(shape) + " to " + shape_to_string(s));
  return Tensor(std::move(s), data);
}

}  // namespace snnforge
