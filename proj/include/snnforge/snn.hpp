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
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "snnforge/network.hpp"
#include "snnforge/tensor.hpp"

namespace snnforge::snn {

enum class ResetMode { to_zero, by_subtraction };
enum class InputMode { analog_current, poisson };

std::string_view to_string(ResetMode mode);
std::string_view to_string(InputMode mode);
/// Accepts "to_zero"/"zero" and "by_subtraction"/"subtract".
std::optional<ResetMode> parse_reset_mode(std::string_view name);
/// Accepts "analog"/"analog_current" and "poisson".
std::optional<InputMode> parse_input_mode(std::string_view name);

struct SimConfig {
  double tau = 1.0;      // firing threshold, membrane units
  double dt = 1e-3;      // seconds per step; r_max = 1/dt
  std::size_t n_steps = 300;
  ResetMode reset_mode = ResetMode::by_subtraction;
  InputMode input_mode = InputMode::analog_current;
  std::uint64_t rng_seed = 42;
  double maxpool_gamma = 0.999;
  /// Rate of the external clock driving the spiking softmax; r_max if unset.
  std::optional<double> softmax_gen_rate;
  bool clamp_negative_v = false;
  /// Steps after which the output layer state is snapshotted (0 allowed).
  std::vector<std::size_t> checkpoints;

  double r_max() const { return 1.0 / dt; }
  /// Total presentation time D = n_steps * dt; rates are N / D.
  double duration() const { return static_cast<double>(n_steps) * dt; }
  double generator_rate() const { return softmax_gen_rate.value_or(r_max()); }

  void validate() const;
};

/// Relative slack on the threshold comparison so that inputs which reach the
/// threshold exactly in real arithmetic (e.g. ten steps of 0.1) still fire
/// despite accumulated rounding.
inline constexpr double kThresholdSlack = 1e-12;

/// Integrate-and-fire update of one membrane. Spikes iff v + z >= tau; then
/// resets to zero or subtracts tau. Membranes may go negative unless
/// clamp_negative_v is set.
inline bool step_neuron(double& v, double z, const SimConfig& cfg) {
  v += z;
  const bool spiked = v >= cfg.tau * (1.0 - kThresholdSlack);
  if (spiked) v = cfg.reset_mode == ResetMode::to_zero ? 0.0 : v - cfg.tau;
  if (cfg.clamp_negative_v && v < 0.0) v = 0.0;
  return spiked;
}

/// Membranes, cumulative spike counts and current-step spike flags of one
/// layer of integrate-and-fire neurons. Starts at V = 0.
struct NeuronLayerState {
  std::vector<double> v;
  std::vector<std::uint32_t> count;
  std::vector<std::uint8_t> spiked;

  NeuronLayerState() = default;
  explicit NeuronLayerState(std::size_t n) : v(n, 0.0), count(n, 0), spiked(n, 0) {}

  std::size_t size() const { return v.size(); }

  /// Applies step_neuron to every unit; appends indices of spiking units to
  /// `active` when given. Returns the number of spikes.
  std::size_t step(std::span<const double> z, const SimConfig& cfg,
                   std::vector<std::uint32_t>* active = nullptr);
};

/// z = tau (W x + b) for a conv2d/dense layer, where x is either analog values
/// (first hidden layer) or 0/1 spike indicators.
Tensor input_current(const LayerSpec& layer, const Tensor& presyn, const SimConfig& cfg);

/// mt19937_64 seeded from (seed, sample, stream) through splitmix64, so that
/// every sample and purpose gets its own reproducible stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  static Rng for_stream(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Bernoulli spike with probability x (target rate x * r_max).
inline bool poisson_spike(double x, Rng& rng) { return rng.uniform() < x; }

/// n_steps independent Bernoulli(x) draws; x must lie in [0, 1].
std::vector<std::uint8_t> encode_poisson(double x, Rng& rng, const SimConfig& cfg);

/// Max-pooling by gating: every input holds an exponentially weighted rate
/// estimate rho <- gamma rho + (1 - gamma) spike, and each window forwards
/// the spike of the unit with the largest estimate (lowest index on ties).
/// Gating uses the estimates from before the current step; they are updated
/// afterwards.
class GatedMaxPool {
 public:
  GatedMaxPool() = default;
  GatedMaxPool(const Shape& in_shape, const Pair& window, const Pair& stride, double gamma);

  void step(std::span<const std::uint8_t> presyn, std::span<std::uint8_t> out);

  const Shape& output_shape() const { return out_shape_; }
  std::span<const double> rates() const { return rho_; }
  std::span<double> rates() { return rho_; }

 private:
  Shape in_shape_, out_shape_;
  Pair window_{1, 1}, stride_{1, 1};
  double gamma_ = 0.999;
  std::vector<double> rho_;
};

/// Functional form of one gated max-pool step over `gate_state`.
std::vector<std::uint8_t> spiking_maxpool(std::span<const std::uint8_t> presyn, const Shape& in_shape,
                                          const Pair& window, const Pair& stride,
                                          std::vector<double>& gate_state, const SimConfig& cfg);

/// Output layer whose units only accumulate input (no threshold, no reset).
/// An external Poisson clock with rate generator_rate() decides each step
/// whether one class spike is drawn from softmax(V).
class SpikingSoftmax {
 public:
  SpikingSoftmax() = default;
  explicit SpikingSoftmax(std::size_t classes) : v_(classes, 0.0), count_(classes, 0) {}

  std::optional<std::size_t> step(std::span<const double> z, Rng& rng, const SimConfig& cfg);

  std::span<const double> membrane() const { return v_; }
  std::span<const std::uint32_t> counts() const { return count_; }

 private:
  std::vector<double> v_;
  std::vector<std::uint32_t> count_;
  std::vector<double> p_;
};

/// Functional form: accumulates z into `membrane`, maybe emits a class spike.
std::optional<std::size_t> spiking_softmax(std::vector<double>& membrane, std::span<const double> z,
                                           Rng& rng, const SimConfig& cfg);

/// Draws an index from softmax(v) (max-subtracted) with one uniform.
std::size_t sample_softmax(std::span<const double> v, double u, std::vector<double>& scratch);

enum class StageKind { neuron, avgpool, maxpool, softmax };
std::string_view to_string(StageKind kind);

/// Final state of one spiking stage. `layer_index` is the conv2d/dense/pool
/// layer driving it; `activation_index` the layer whose ANN output it
/// approximates (the ReLU after a conv2d/dense, if any).
struct LayerTrace {
  std::size_t layer_index = 0;
  std::size_t activation_index = 0;
  std::string name;
  StageKind kind = StageKind::neuron;
  Shape shape;
  std::vector<std::uint32_t> counts;
  std::vector<double> membrane;  // empty for maxpool stages
};

/// What reached the first spiking stage. In analog mode `values` holds the
/// static input (after any leading non-parameter layers); in Poisson mode
/// `counts` holds the input spike counts.
struct InputTrace {
  InputMode mode = InputMode::analog_current;
  Shape shape;
  std::vector<double> values;
  std::vector<std::uint32_t> counts;
};

struct OutputSnapshot {
  std::size_t step = 0;
  std::vector<std::uint32_t> counts;
  std::vector<double> membrane;
};

struct SimTrace {
  SimConfig config;
  std::uint64_t sample_index = 0;
  InputTrace input;
  std::vector<LayerTrace> layers;
  /// Indices of output units that spiked, per step.
  std::vector<std::vector<std::uint32_t>> output_spikes;
  std::vector<OutputSnapshot> snapshots;

  const LayerTrace& output() const { return layers.back(); }
  /// N / D for every unit of `layer`.
  std::vector<double> rates(const LayerTrace& layer) const;
  /// Presynaptic rates feeding stage `stage` (input rates for stage 0).
  std::vector<double> presyn_rates(std::size_t stage) const;
};

/// Runs n_steps synchronous updates; at each step every stage consumes the
/// spikes its predecessor emitted in the same step. The network must not
/// contain batchnorm layers (fold them first). Deterministic given
/// (config.rng_seed, sample_index).
SimTrace simulate(const NetworkSpec& net, const Tensor& input, const SimConfig& cfg,
                  std::uint64_t sample_index = 0);

/// Argmax of spike counts; ties (including all-zero counts) are broken by the
/// larger membrane among the tied classes, then by the lower index.
std::size_t classify(std::span<const std::uint32_t> counts, std::span<const double> membrane);
std::size_t classify(const SimTrace& trace);

nlohmann::json to_json(const SimConfig& cfg);
SimConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimTrace& trace);
SimTrace trace_from_json(const nlohmann::json& j);

}  // namespace snnforge::snn
