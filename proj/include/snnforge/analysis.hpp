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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/netio.hpp"
#include "snnforge/network.hpp"
#include "snnforge/snn.hpp"

namespace snnforge::analysis {

struct LayerResidual {
  std::size_t layer_index = 0;
  std::string name;
  snn::StageKind kind = snn::StageKind::neuron;
  std::size_t units = 0;
  double max_abs_residual = 0.0;  // Hz
};

/// Constant-input reset-to-zero probe: predicted vs simulated rate.
struct ResetZeroProbe {
  double activation = 0.0;
  std::size_t steps_between_spikes = 0;
  double overshoot = 0.0;  // epsilon = n z - tau
  double predicted_rate = 0.0;
  double measured_rate = 0.0;
  std::uint64_t predicted_count = 0;
  std::uint64_t measured_count = 0;
};

struct TheoryReport {
  /// Per spiking stage, max |r - (W r_prev + r_max b - V/(tau D))|.
  std::vector<LayerResidual> rate_identity;
  /// Max difference between the closed-form error expansion and the
  /// recursive layer identity, over all chained stages.
  std::optional<double> expansion_residual;
  std::vector<ResetZeroProbe> reset_zero_probes;

  double max_rate_identity_residual() const;
};

/// Checks r = W r_prev + r_max b - V(T)/(tau D) for every integrate-and-fire
/// stage (conv2d, dense, avgpool) and V(T) = tau (W N_prev + T b) for a
/// softmax accumulator. Requires a by_subtraction trace without clamping.
TheoryReport verify_rate_identity(const snn::SimTrace& trace, const NetworkSpec& net);

/// Evaluates every chained stage's rate twice: by iterating the layer
/// identity from the chain's input rates, and by the closed-form expansion
///   r^l = r_max a^l - dV^l - W^l dV^(l-1) - W^l W^(l-1) dV^(l-2) - ...
/// with a^l the bias-including linear forward pass and dV = V/(tau D). A chain
/// starts at the input or at a max-pool stage. Returns the max difference.
double expansion_residual(const snn::SimTrace& trace, const NetworkSpec& net);

/// Reset-to-zero rate for constant input z = tau a, 0 < a < 1:
/// n = ceil(tau / z), eps = n z - tau, r = (a - eps / (n tau)) r_max.
double predict_rate_reset_zero(double a, double tau, double dt);

/// Simulates a single neuron per activation (analog constant input, reset to
/// zero) and pairs the result with predict_rate_reset_zero.
std::vector<ResetZeroProbe> probe_reset_to_zero(std::span<const double> activations,
                                                const snn::SimConfig& cfg);

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct LayerCorrelation {
  std::size_t layer_index = 0;
  std::string name;
  std::optional<double> pearson;
  std::string reason;  // why pearson is missing
};

/// Correlates r / r_max of every non-softmax stage with the ANN activations it
/// approximates, divided by that layer's scale (lambda from `scales`, carried
/// through pooling). Empty `scales` compares against the raw activations.
std::vector<LayerCorrelation> correlate(const snn::SimTrace& trace, const ann::ActivationRecord& record,
                                        const NetworkSpec& net, const convert::LayerScales& scales = {});

struct AccuracyCurve {
  std::vector<std::size_t> steps;
  std::vector<double> accuracy;
  std::size_t samples = 0;
  std::optional<double> ann_accuracy;
  snn::SimConfig config;
};

inline const std::vector<std::size_t> kDefaultCheckpoints = {1, 2, 5, 10, 20, 50, 100, 200, 300};

/// SNN accuracy on the first `n_samples` labelled samples using the output
/// readout at each checkpoint. Samples run in parallel; sample i uses RNG
/// streams derived from (config.rng_seed, i).
AccuracyCurve accuracy_curve(const NetworkSpec& net, const snn::SimConfig& cfg,
                             const netio::DatasetHandle& data, const std::vector<std::size_t>& checkpoints,
                             std::size_t n_samples = 0);

/// "step,accuracy" header followed by one row per checkpoint.
void write_csv(const AccuracyCurve& curve, std::ostream& out);
AccuracyCurve read_csv(std::istream& in);

nlohmann::json to_json(const TheoryReport& report);
TheoryReport theory_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<LayerCorrelation>& correlations);
std::vector<LayerCorrelation> correlations_from_json(const nlohmann::json& j);

}  // namespace snnforge::analysis
