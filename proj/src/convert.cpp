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
#include "snnforge/convert.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "snnforge/ann.hpp"
#include "snnforge/error.hpp"
#include "snnforge/kernels.hpp"

namespace snnforge::convert {

using nlohmann::json;

NetworkSpec fold_batchnorm(const NetworkSpec& net, std::vector<FoldRecord>* log) {
  validate(net);
  NetworkSpec out;
  out.input_shape = net.input_shape;
  out.normalized = net.normalized;
  for (const LayerSpec& layer : net.layers) {
    if (layer.kind != LayerKind::batchnorm) {
      out.layers.push_back(layer);
      continue;
    }
    if (out.layers.empty() || !out.layers.back().has_parameters())
      throw Error(ErrorCode::NotFoldable,
                  "batchnorm '" + layer.name + "' is not directly preceded by conv2d/dense");
    LayerSpec& target = out.layers.back();
    const std::size_t channels = target.weight.shape[0];
    if (layer.sigma.size() != channels)
      throw Error(ErrorCode::ShapeMismatch, "batchnorm '" + layer.name + "' channel count");
    const std::size_t fan_in = target.weight.size() / channels;
    for (std::size_t c = 0; c < channels; ++c) {
      if (!(layer.sigma[c] > 0.0))
        throw Error(ErrorCode::InvalidArgument, "batchnorm '" + layer.name + "': sigma must be > 0");
      const double scale = layer.gamma[c] / layer.sigma[c];
      for (std::size_t k = 0; k < fan_in; ++k) target.weight[c * fan_in + k] *= scale;
      target.bias[c] = scale * (target.bias[c] - layer.mean[c]) + layer.beta[c];
    }
    if (log) log->push_back({layer.name, target.name});
  }
  return out;
}

const LayerActivations* ActivationStats::find(const std::string& layer_name) const {
  for (const auto& layer : layers)
    if (layer.layer_name == layer_name) return &layer;
  return nullptr;
}

namespace {

struct Collector {
  std::size_t source_index = 0;  // index into the ActivationRecord
  std::vector<double> values;    // exhaustive: non-zero values; reservoir: all kept values
  std::uint64_t zeros = 0;
  std::uint64_t observed = 0;
};

}  // namespace

ActivationStats collect_stats(const NetworkSpec& net, const netio::DatasetHandle& data,
                              const StatsOptions& options) {
  validate(net);
  if (data.count == 0) throw Error(ErrorCode::EmptyDataset, "no samples to collect statistics from");
  const std::size_t n = options.n_samples == 0 ? data.count : std::min(options.n_samples, data.count);

  ActivationStats stats;
  stats.samples = n;
  stats.reservoir_size = options.reservoir_size;
  std::vector<Collector> collectors;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_parameters() || feeds_softmax(net, i)) continue;
    stats.layers.push_back({net.layers[i].name, 0, 0, {}});
    collectors.push_back({activation_index(net, i), {}, 0, 0});
  }

  std::mt19937_64 rng(options.seed);
  const auto observe = [&](Collector& c, double v) {
    v = std::max(v, 0.0);
    const std::uint64_t seen = c.observed++;
    if (options.reservoir_size == 0) {
      if (v == 0.0)
        ++c.zeros;
      else
        c.values.push_back(v);
      return;
    }
    if (seen < options.reservoir_size) {
      c.values.push_back(v);
      return;
    }
    const std::uint64_t slot = std::uniform_int_distribution<std::uint64_t>(0, seen)(rng);
    if (slot < options.reservoir_size) c.values[slot] = v;
  };

  // Forward passes run in parallel per chunk; values are fed into the
  // collectors in sample order so reservoir sampling stays deterministic.
  constexpr std::size_t kChunk = 64;
  std::vector<ann::ActivationRecord> records(kChunk);
  for (std::size_t begin = 0; begin < n; begin += kChunk) {
    const std::size_t end = std::min(n, begin + kChunk);
    const auto count = static_cast<std::ptrdiff_t>(end - begin);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::ptrdiff_t k = 0; k < count; ++k) {
      const std::size_t idx = begin + static_cast<std::size_t>(k);
      records[static_cast<std::size_t>(k)] =
          ann::forward(net, data.sample(idx, net.input_shape), ann::Exec::serial);
    }
    for (std::size_t k = 0; k < end - begin; ++k)
      for (Collector& c : collectors)
        for (double v : records[k].layers[c.source_index].data) observe(c, v);
  }

  for (std::size_t l = 0; l < collectors.size(); ++l) {
    Collector& c = collectors[l];
    LayerActivations& out = stats.layers[l];
    out.observed = c.observed;
    if (options.reservoir_size != 0) {
      c.zeros = static_cast<std::uint64_t>(std::count(c.values.begin(), c.values.end(), 0.0));
      std::erase(c.values, 0.0);
    }
    std::sort(c.values.begin(), c.values.end());
    out.zero_count = c.zeros;
    out.nonzero = std::move(c.values);
  }
  return stats;
}

double percentile(const LayerActivations& layer, double p) {
  if (!(p > 0.0 && p <= 100.0))
    throw Error(ErrorCode::InvalidArgument, "percentile must lie in (0, 100]");
  const std::uint64_t n = layer.size();
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "layer '" + layer.layer_name + "' has no statistics");
  if (p == 100.0) return layer.at(n - 1);
  const double rank = p / 100.0 * static_cast<double>(n - 1);
  const auto k = static_cast<std::uint64_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(k);
  const double lo = layer.at(k);
  if (k + 1 >= n) return lo;
  return lo + frac * (layer.at(k + 1) - lo);
}

LayerScales percentile_scale(const ActivationStats& stats, double p) {
  LayerScales scales;
  for (const LayerActivations& layer : stats.layers) {
    const double lambda = percentile(layer, p);
    if (!(lambda > 0.0))
      throw Error(ErrorCode::DeadLayer, "layer '" + layer.layer_name + "' has zero " +
                                            std::to_string(p) + "th percentile activation");
    scales[layer.layer_name] = lambda;
  }
  return scales;
}

std::pair<NetworkSpec, ConversionReport> normalize_params(const NetworkSpec& net,
                                                          const LayerScales& scales) {
  validate(net);
  for (const auto& [name, lambda] : scales)
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw Error(ErrorCode::InvalidArgument, "scale for '" + name + "' must be positive");

  NetworkSpec out = net;
  ConversionReport report;
  report.normalized = true;
  double previous = 1.0;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    LayerSpec& layer = out.layers[i];
    if (!layer.has_parameters()) continue;
    double lambda = 1.0;
    if (const auto it = scales.find(layer.name); it != scales.end())
      lambda = it->second;
    else if (!feeds_softmax(out, i))
      throw Error(ErrorCode::InvalidArgument, "no scale for layer '" + layer.name + "'");
    const double weight_scale = previous / lambda;
    for (double& w : layer.weight.data) w *= weight_scale;
    for (double& b : layer.bias.data) b /= lambda;
    report.layers.push_back({i, layer.name, lambda, previous, weight_scale, 1.0 / lambda});
    previous = lambda;
  }
  out.normalized = true;
  return {std::move(out), std::move(report)};
}

std::pair<NetworkSpec, ConversionReport> convert(const NetworkSpec& net, const ActivationStats& stats,
                                                 const ConvertOptions& options) {
  std::vector<FoldRecord> folds;
  NetworkSpec folded = fold_batchnorm(net, &folds);
  if (!options.normalize) {
    ConversionReport report;
    report.folds = std::move(folds);
    return {std::move(folded), std::move(report)};
  }
  auto [normalized, report] = normalize_params(folded, percentile_scale(stats, options.percentile));
  report.percentile = options.percentile;
  report.folds = std::move(folds);
  return {std::move(normalized), std::move(report)};
}

json to_json(const ActivationStats& stats) {
  json layers = json::array();
  for (const auto& layer : stats.layers)
    layers.push_back({{"layer", layer.layer_name},
                      {"observed", layer.observed},
                      {"zero_count", layer.zero_count},
                      {"nonzero", layer.nonzero}});
  return {{"samples", stats.samples}, {"reservoir_size", stats.reservoir_size}, {"layers", layers}};
}

ActivationStats stats_from_json(const json& j) {
  try {
    ActivationStats stats;
    stats.samples = j.at("samples").get<std::size_t>();
    stats.reservoir_size = j.at("reservoir_size").get<std::size_t>();
    for (const json& l : j.at("layers")) {
      LayerActivations layer;
      layer.layer_name = l.at("layer").get<std::string>();
      layer.observed = l.at("observed").get<std::uint64_t>();
      layer.zero_count = l.at("zero_count").get<std::uint64_t>();
      layer.nonzero = l.at("nonzero").get<std::vector<double>>();
      for (double v : layer.nonzero)
        if (!(v > 0.0) || !std::isfinite(v))
          throw Error(ErrorCode::InvalidArgument, "stats values must be positive and finite");
      if (!std::is_sorted(layer.nonzero.begin(), layer.nonzero.end()))
        throw Error(ErrorCode::InvalidArgument, "stats values must be sorted");
      stats.layers.push_back(std::move(layer));
    }
    return stats;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed stats JSON: ") + e.what());
  }
}

json to_json(const ConversionReport& report) {
  json layers = json::array();
  for (const auto& l : report.layers)
    layers.push_back({{"index", l.layer_index},
                      {"layer", l.layer_name},
                      {"lambda", l.lambda},
                      {"previous_lambda", l.previous_lambda},
                      {"weight_scale", l.weight_scale},
                      {"bias_scale", l.bias_scale}});
  json folds = json::array();
  for (const auto& f : report.folds) folds.push_back({{"batchnorm", f.batchnorm}, {"into", f.folded_into}});
  return {{"percentile", report.percentile ? json(*report.percentile) : json(nullptr)},
          {"normalized", report.normalized},
          {"folds", folds},
          {"layers", layers}};
}

ConversionReport report_from_json(const json& j) {
  try {
    ConversionReport report;
    if (!j.at("percentile").is_null()) report.percentile = j.at("percentile").get<double>();
    report.normalized = j.at("normalized").get<bool>();
    for (const json& f : j.at("folds"))
      report.folds.push_back({f.at("batchnorm").get<std::string>(), f.at("into").get<std::string>()});
    for (const json& l : j.at("layers"))
      report.layers.push_back({l.at("index").get<std::size_t>(), l.at("layer").get<std::string>(),
                               l.at("lambda").get<double>(), l.at("previous_lambda").get<double>(),
                               l.at("weight_scale").get<double>(), l.at("bias_scale").get<double>()});
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed report JSON: ") + e.what());
  }
}

}  // namespace snnforge::convert
