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
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "snnforge/network.hpp"
#include "snnforge/netio.hpp"

namespace snnforge::convert {

struct FoldRecord {
  std::string batchnorm;
  std::string folded_into;
};

/// Absorbs every batchnorm into the conv2d/dense layer directly before it:
///   W' = (gamma/sigma) W   (per output channel)
///   b' = (gamma/sigma)(b - mu) + beta
NetworkSpec fold_batchnorm(const NetworkSpec& net, std::vector<FoldRecord>* log = nullptr);

/// Post-activation values of one parameter layer over the normalization set.
/// The multiset is held as a zero count plus the sorted non-zero values.
struct LayerActivations {
  std::string layer_name;
  std::uint64_t observed = 0;     // values seen (units x samples)
  std::uint64_t zero_count = 0;   // zeros in the retained multiset
  std::vector<double> nonzero;    // ascending

  std::uint64_t size() const { return zero_count + nonzero.size(); }
  /// k-th smallest value of the retained multiset.
  double at(std::uint64_t k) const { return k < zero_count ? 0.0 : nonzero[k - zero_count]; }
  double max() const { return nonzero.empty() ? 0.0 : nonzero.back(); }
};

struct ActivationStats {
  std::vector<LayerActivations> layers;
  std::size_t samples = 0;
  /// 0 for exhaustive collection, else the per-layer reservoir size.
  std::size_t reservoir_size = 0;

  const LayerActivations* find(const std::string& layer_name) const;
};

struct StatsOptions {
  std::size_t n_samples = 0;       // 0 means the whole dataset
  std::size_t reservoir_size = 0;  // 0 means exhaustive
  std::uint64_t seed = 42;
};

/// Runs the ANN on the first n samples and records the post-activation output
/// of every ReLU-activated (or linear-output) conv2d/dense layer. Layers that
/// feed the softmax are not recorded. BN layers are evaluated inline.
ActivationStats collect_stats(const NetworkSpec& net, const netio::DatasetHandle& data,
                              const StatsOptions& options);

/// Percentile by linear interpolation on the sorted multiset,
/// rank r = p/100 (n-1). p = 100 returns the maximum.
double percentile(const LayerActivations& layer, double p);

/// Normalization scale per parameter layer, keyed by layer name (names
/// survive BN folding, indices do not).
using LayerScales = std::map<std::string, double>;

/// Throws DeadLayer if a layer's percentile is zero.
LayerScales percentile_scale(const ActivationStats& stats, double p);

struct LayerScaleRecord {
  std::size_t layer_index = 0;
  std::string layer_name;
  double lambda = 1.0;
  double previous_lambda = 1.0;
  double weight_scale = 1.0;  // previous_lambda / lambda
  double bias_scale = 1.0;    // 1 / lambda
};

struct ConversionReport {
  std::optional<double> percentile;
  bool normalized = false;
  std::vector<FoldRecord> folds;
  std::vector<LayerScaleRecord> layers;
};

/// W' = W lambda_prev / lambda and b' = b / lambda per parameter layer, in
/// order, with lambda_0 = 1 and non-parameter layers carrying lambda through.
/// A layer feeding the softmax uses lambda = 1 when absent from `scales`.
std::pair<NetworkSpec, ConversionReport> normalize_params(const NetworkSpec& net,
                                                          const LayerScales& scales);

struct ConvertOptions {
  double percentile = 99.9;
  bool normalize = true;
};

/// fold_batchnorm, then (optionally) percentile_scale + normalize_params.
/// `stats` may come from the folded or the unfolded network; layers are
/// matched by name.
std::pair<NetworkSpec, ConversionReport> convert(const NetworkSpec& net, const ActivationStats& stats,
                                                 const ConvertOptions& options);

nlohmann::json to_json(const ActivationStats& stats);
ActivationStats stats_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConversionReport& report);
ConversionReport report_from_json(const nlohmann::json& j);

}  // namespace snnforge::convert
