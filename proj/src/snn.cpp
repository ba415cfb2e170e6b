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
#include "snnforge/snn.hpp"

#include <algorithm>
#include <cmath>

#include "snnforge/ann.hpp"
#include "snnforge/error.hpp"

namespace snnforge::snn {

using nlohmann::json;

std::string_view to_string(ResetMode mode) {
  return mode == ResetMode::to_zero ? "to_zero" : "by_subtraction";
}

std::string_view to_string(InputMode mode) {
  return mode == InputMode::analog_current ? "analog_current" : "poisson";
}

std::optional<ResetMode> parse_reset_mode(std::string_view name) {
  if (name == "to_zero" || name == "zero") return ResetMode::to_zero;
  if (name == "by_subtraction" || name == "subtract" || name == "subtraction")
    return ResetMode::by_subtraction;
  return std::nullopt;
}

std::optional<InputMode> parse_input_mode(std::string_view name) {
  if (name == "analog" || name == "analog_current") return InputMode::analog_current;
  if (name == "poisson") return InputMode::poisson;
  return std::nullopt;
}

std::string_view to_string(StageKind kind) {
  switch (kind) {
    case StageKind::neuron: return "neuron";
    case StageKind::avgpool: return "avgpool";
    case StageKind::maxpool: return "maxpool";
    case StageKind::softmax: return "softmax";
  }
  return "neuron";
}

void SimConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidConfig, "tau must be > 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidConfig, "dt must be > 0");
  if (n_steps < 1) throw Error(ErrorCode::InvalidConfig, "n_steps must be >= 1");
  if (!(maxpool_gamma > 0.0 && maxpool_gamma < 1.0))
    throw Error(ErrorCode::InvalidConfig, "maxpool_gamma must lie in (0, 1)");
  const double rate = generator_rate();
  if (!(rate >= 0.0) || rate > r_max() * (1.0 + 1e-12))
    throw Error(ErrorCode::InvalidConfig, "softmax generator rate must lie in [0, r_max]");
  for (std::size_t c : checkpoints)
    if (c > n_steps) throw Error(ErrorCode::InvalidConfig, "checkpoint beyond n_steps");
}

std::size_t NeuronLayerState::step(std::span<const double> z, const SimConfig& cfg,
                                   std::vector<std::uint32_t>* active) {
  std::size_t spikes = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool s = step_neuron(v[i], z[i], cfg);
    spiked[i] = s;
    if (s) {
      ++count[i];
      ++spikes;
      if (active) active->push_back(static_cast<std::uint32_t>(i));
    }
  }
  return spikes;
}

Tensor input_current(const LayerSpec& layer, const Tensor& presyn, const SimConfig& cfg) {
  if (!layer.has_parameters())
    throw Error(ErrorCode::InvalidArgument, "input_current needs a conv2d/dense layer");
  Tensor z = ann::apply_layer(layer, presyn, ann::Exec::serial);
  for (double& v : z.data) v *= cfg.tau;
  return z;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream) {
  std::uint64_t state = seed;
  std::uint64_t mixed = splitmix64(state);
  state = mixed ^ sample;
  mixed = splitmix64(state);
  state = mixed ^ stream;
  return Rng(splitmix64(state));
}

std::vector<std::uint8_t> encode_poisson(double x, Rng& rng, const SimConfig& cfg) {
  if (!(x >= 0.0 && x <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "Poisson input must lie in [0, 1]");
  std::vector<std::uint8_t> train(cfg.n_steps);
  for (auto& s : train) s = poisson_spike(x, rng);
  return train;
}

GatedMaxPool::GatedMaxPool(const Shape& in_shape, const Pair& window, const Pair& stride, double gamma)
    : in_shape_(in_shape), window_(window), stride_(stride), gamma_(gamma),
      rho_(element_count(in_shape), 0.0) {
  if (in_shape.size() != 3) throw Error(ErrorCode::ShapeMismatch, "gated max-pool expects [C,H,W]");
  if (window[0] == 0 || window[1] == 0 || stride[0] == 0 || stride[1] == 0 ||
      window[0] > in_shape[1] || window[1] > in_shape[2])
    throw Error(ErrorCode::ShapeMismatch, "gated max-pool window");
  out_shape_ = {in_shape[0], (in_shape[1] - window[0]) / stride[0] + 1,
                (in_shape[2] - window[1]) / stride[1] + 1};
}

void GatedMaxPool::step(std::span<const std::uint8_t> presyn, std::span<std::uint8_t> out) {
  const std::size_t h = in_shape_[1], w = in_shape_[2];
  const std::size_t oh = out_shape_[1], ow = out_shape_[2];
  for (std::size_t c = 0; c < out_shape_[0]; ++c)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (c * h + oy * stride_[0]) * w + ox * stride_[1];
        for (std::size_t ky = 0; ky < window_[0]; ++ky)
          for (std::size_t kx = 0; kx < window_[1]; ++kx) {
            const std::size_t j = (c * h + oy * stride_[0] + ky) * w + ox * stride_[1] + kx;
            if (rho_[j] > rho_[best]) best = j;
          }
        out[(c * oh + oy) * ow + ox] = presyn[best];
      }

  const double keep = gamma_;
  const double gain = 1.0 - gamma_;
  for (std::size_t j = 0; j < rho_.size(); ++j) rho_[j] = keep * rho_[j] + gain * presyn[j];
}

std::vector<std::uint8_t> spiking_maxpool(std::span<const std::uint8_t> presyn, const Shape& in_shape,
                                          const Pair& window, const Pair& stride,
                                          std::vector<double>& gate_state, const SimConfig& cfg) {
  GatedMaxPool pool(in_shape, window, stride, cfg.maxpool_gamma);
  if (gate_state.size() != presyn.size())
    throw Error(ErrorCode::ShapeMismatch, "gate state size must match the input");
  std::copy(gate_state.begin(), gate_state.end(), pool.rates().begin());
  std::vector<std::uint8_t> out(element_count(pool.output_shape()));
  pool.step(presyn, out);
  std::copy(pool.rates().begin(), pool.rates().end(), gate_state.begin());
  return out;
}

std::size_t sample_softmax(std::span<const double> v, double u, std::vector<double>& scratch) {
  const double peak = *std::max_element(v.begin(), v.end());
  scratch.resize(v.size());
  double total = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    scratch[k] = std::exp(v[k] - peak);
    total += scratch[k];
  }
  double target = u * total;
  for (std::size_t k = 0; k < v.size(); ++k) {
    target -= scratch[k];
    if (target < 0.0) return k;
  }
  // u * total rounded up to total: fall back to the last class with mass.
  for (std::size_t k = v.size(); k-- > 0;)
    if (scratch[k] > 0.0) return k;
  return 0;
}

std::optional<std::size_t> SpikingSoftmax::step(std::span<const double> z, Rng& rng,
                                                 const SimConfig& cfg) {
  for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += z[k];
  const double p_event = cfg.generator_rate() * cfg.dt;
  // The clock draw is skipped when it cannot fail, keeping r_max runs cheap.
  if (p_event < 1.0 && !(rng.uniform() < p_event)) return std::nullopt;
  const std::size_t k = sample_softmax(v_, rng.uniform(), p_);
  ++count_[k];
  return k;
}

std::optional<std::size_t> spiking_softmax(std::vector<double>& membrane, std::span<const double> z,
                                           Rng& rng, const SimConfig& cfg) {
  if (z.size() != membrane.size()) throw Error(ErrorCode::ShapeMismatch, "softmax input size");
  for (std::size_t k = 0; k < membrane.size(); ++k) membrane[k] += z[k];
  const double p_event = cfg.generator_rate() * cfg.dt;
  if (p_event < 1.0 && !(rng.uniform() < p_event)) return std::nullopt;
  std::vector<double> scratch;
  return sample_softmax(membrane, rng.uniform(), scratch);
}

std::vector<double> SimTrace::rates(const LayerTrace& layer) const {
  std::vector<double> r(layer.counts.size());
  const double d = config.duration();
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = layer.counts[i] / d;
  return r;
}

std::vector<double> SimTrace::presyn_rates(std::size_t stage) const {
  if (stage > 0) return rates(layers.at(stage - 1));
  if (input.mode == InputMode::analog_current) {
    std::vector<double> r(input.values);
    for (double& v : r) v *= config.r_max();
    return r;
  }
  std::vector<double> r(input.counts.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = input.counts[i] / config.duration();
  return r;
}

namespace {

/// Fan-out table: for presynaptic unit j, targets[offset[j]..offset[j+1]) with
/// matching weights. Used to push spikes instead of recomputing full sums.
struct Projection {
  std::vector<std::uint32_t> offset;
  std::vector<std::uint32_t> target;
  std::vector<double> weight;
  std::vector<double> bias;  // per target; empty for avgpool

  void add_spikes(std::span<const std::uint32_t> active, std::span<double> acc) const {
    for (std::uint32_t j : active)
      for (std::uint32_t e = offset[j]; e < offset[j + 1]; ++e) acc[target[e]] += weight[e];
  }
};

Projection dense_projection(const LayerSpec& layer) {
  const std::size_t out = layer.weight.shape[0], in = layer.weight.shape[1];
  Projection p;
  p.offset.reserve(in + 1);
  p.target.reserve(in * out);
  p.weight.reserve(in * out);
  p.offset.push_back(0);
  for (std::size_t j = 0; j < in; ++j) {
    for (std::size_t o = 0; o < out; ++o) {
      p.target.push_back(static_cast<std::uint32_t>(o));
      p.weight.push_back(layer.weight[o * in + j]);
    }
    p.offset.push_back(static_cast<std::uint32_t>(p.target.size()));
  }
  p.bias = layer.bias.data;
  return p;
}

// Generic fan-out of a strided window operator: conv2d (weights per
// out-channel/in-channel/tap) or avgpool (per-channel, constant weight).
Projection window_projection(const Shape& in, const Shape& out, std::size_t kh, std::size_t kw,
                             const Pair& stride, std::size_t pad_top, std::size_t pad_left,
                             const LayerSpec* conv) {
  const std::size_t c_in = in[0], h = in[1], w = in[2];
  const std::size_t c_out = out[0], oh = out[1], ow = out[2];
  const double avg_weight = 1.0 / static_cast<double>(kh * kw);
  Projection p;
  p.offset.reserve(c_in * h * w + 1);
  p.offset.push_back(0);
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t first_o = conv ? 0 : c;
        const std::size_t last_o = conv ? c_out : c + 1;
        for (std::size_t o = first_o; o < last_o; ++o)
          for (std::size_t ky = 0; ky < kh; ++ky) {
            const std::ptrdiff_t ny = static_cast<std::ptrdiff_t>(y + pad_top) - static_cast<std::ptrdiff_t>(ky);
            if (ny < 0 || ny % static_cast<std::ptrdiff_t>(stride[0]) != 0) continue;
            const std::size_t oy = static_cast<std::size_t>(ny) / stride[0];
            if (oy >= oh) continue;
            for (std::size_t kx = 0; kx < kw; ++kx) {
              const std::ptrdiff_t nx = static_cast<std::ptrdiff_t>(x + pad_left) - static_cast<std::ptrdiff_t>(kx);
              if (nx < 0 || nx % static_cast<std::ptrdiff_t>(stride[1]) != 0) continue;
              const std::size_t ox = static_cast<std::size_t>(nx) / stride[1];
              if (ox >= ow) continue;
              p.target.push_back(static_cast<std::uint32_t>((o * oh + oy) * ow + ox));
              p.weight.push_back(conv ? conv->weight[((o * c_in + c) * kh + ky) * kw + kx] : avg_weight);
            }
          }
        p.offset.push_back(static_cast<std::uint32_t>(p.target.size()));
      }
  if (conv) {
    p.bias.resize(c_out * oh * ow);
    for (std::size_t o = 0; o < c_out; ++o)
      std::fill_n(p.bias.begin() + static_cast<std::ptrdiff_t>(o * oh * ow), oh * ow, conv->bias[o]);
  }
  return p;
}

struct Stage {
  StageKind kind = StageKind::neuron;
  std::size_t layer_index = 0;
  std::size_t activation_index = 0;
  Shape in_shape, out_shape;
  bool analog = false;  // driven by the static analog input
  Projection projection;
  std::vector<double> constant_current;  // analog stages only

  NeuronLayerState neurons;
  GatedMaxPool pool;
  SpikingSoftmax softmax;

  std::vector<double> acc;
  std::vector<double> z;
  std::vector<std::uint8_t> flags;
  std::vector<std::uint32_t> active;
};

}  // namespace

SimTrace simulate(const NetworkSpec& net, const Tensor& input, const SimConfig& cfg,
                  std::uint64_t sample_index) {
  cfg.validate();
  const std::vector<Shape> shapes = infer_shapes(net);
  if (input.shape != net.input_shape)
    throw Error(ErrorCode::ShapeMismatch, "input " + shape_to_string(input.shape) +
                                              " does not match network input " +
                                              shape_to_string(net.input_shape));
  for (const LayerSpec& layer : net.layers)
    if (layer.kind == LayerKind::batchnorm)
      throw Error(ErrorCode::InvalidConfig, "fold batchnorm layer '" + layer.name + "' before simulating");

  const bool analog = cfg.input_mode == InputMode::analog_current;
  if (!analog)
    for (double x : input.data)
      if (!(x >= 0.0 && x <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "Poisson input must lie in [0, 1]");

  SimTrace trace;
  trace.config = cfg;
  trace.sample_index = sample_index;
  trace.input.mode = cfg.input_mode;

  // In analog mode the layers before the first conv2d/dense act on the static
  // input directly; everything from there on is spiking.
  std::size_t first = 0;
  Tensor analog_input = input;
  if (analog) {
    while (first < net.layers.size() && !net.layers[first].has_parameters()) {
      analog_input = ann::apply_layer(net.layers[first], analog_input, ann::Exec::serial);
      ++first;
    }
    trace.input.shape = analog_input.shape;
    trace.input.values = analog_input.data;
  } else {
    trace.input.shape = input.shape;
    trace.input.counts.assign(input.size(), 0);
  }

  std::vector<Stage> stages;
  for (std::size_t i = first; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    const Shape& in_shape = i == 0 ? net.input_shape : shapes[i - 1];
    const Shape& out_shape = shapes[i];
    Stage s;
    s.layer_index = i;
    s.activation_index = i;
    s.in_shape = in_shape;
    s.out_shape = out_shape;
    switch (layer.kind) {
      case LayerKind::conv2d:
      case LayerKind::dense: {
        s.activation_index = activation_index(net, i);
        s.kind = feeds_softmax(net, i) ? StageKind::softmax : StageKind::neuron;
        s.analog = analog && stages.empty();
        if (s.analog) {
          s.constant_current = input_current(layer, analog_input, cfg).data;
        } else if (layer.kind == LayerKind::dense) {
          s.projection = dense_projection(layer);
        } else {
          const auto pad = conv_padding(in_shape[1], in_shape[2], layer.weight.shape[2],
                                        layer.weight.shape[3], layer.stride, layer.padding);
          s.projection = window_projection(in_shape, out_shape, layer.weight.shape[2],
                                           layer.weight.shape[3], layer.stride, pad.top, pad.left, &layer);
        }
        break;
      }
      case LayerKind::avgpool:
        s.kind = StageKind::avgpool;
        s.projection = window_projection(in_shape, out_shape, layer.window[0], layer.window[1],
                                         layer.stride, 0, 0, nullptr);
        break;
      case LayerKind::maxpool:
        s.kind = StageKind::maxpool;
        s.pool = GatedMaxPool(in_shape, layer.window, layer.stride, cfg.maxpool_gamma);
        break;
      case LayerKind::softmax:
        if (stages.empty() || stages.back().kind != StageKind::softmax)
          throw Error(ErrorCode::InvalidConfig, "softmax must follow a conv2d/dense layer");
        continue;
      case LayerKind::relu:
      case LayerKind::flatten:
      case LayerKind::batchnorm:
        continue;
    }
    const std::size_t n = element_count(out_shape);
    if (s.kind == StageKind::softmax)
      s.softmax = SpikingSoftmax(n);
    else if (s.kind != StageKind::maxpool)
      s.neurons = NeuronLayerState(n);
    s.acc.resize(n);
    s.z.resize(n);
    s.flags.assign(n, 0);
    stages.push_back(std::move(s));
  }
  if (stages.empty()) throw Error(ErrorCode::InvalidConfig, "network has no spiking stage");

  std::vector<std::size_t> checkpoints = cfg.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  auto next_checkpoint = checkpoints.begin();

  // Max-pool stages keep their own counters.
  std::vector<std::vector<std::uint32_t>> pool_counts(stages.size());
  for (std::size_t k = 0; k < stages.size(); ++k)
    if (stages[k].kind == StageKind::maxpool) pool_counts[k].assign(stages[k].flags.size(), 0);

  const auto snapshot = [&](std::size_t step) {
    const Stage& out = stages.back();
    OutputSnapshot snap;
    snap.step = step;
    if (out.kind == StageKind::softmax) {
      snap.counts.assign(out.softmax.counts().begin(), out.softmax.counts().end());
      snap.membrane.assign(out.softmax.membrane().begin(), out.softmax.membrane().end());
    } else if (out.kind == StageKind::maxpool) {
      snap.counts = pool_counts.back();
    } else {
      snap.counts = out.neurons.count;
      snap.membrane = out.neurons.v;
    }
    trace.snapshots.push_back(std::move(snap));
  };

  while (next_checkpoint != checkpoints.end() && *next_checkpoint == 0) {
    snapshot(0);
    ++next_checkpoint;
  }

  Rng input_rng = Rng::for_stream(cfg.rng_seed, sample_index, 0);
  Rng softmax_rng = Rng::for_stream(cfg.rng_seed, sample_index, 1);
  std::vector<std::uint8_t> input_flags(analog ? 0 : input.size(), 0);
  std::vector<std::uint32_t> input_active;
  trace.output_spikes.reserve(cfg.n_steps);

  for (std::size_t t = 1; t <= cfg.n_steps; ++t) {
    if (!analog) {
      input_active.clear();
      for (std::size_t j = 0; j < input.size(); ++j) {
        const bool s = poisson_spike(input.data[j], input_rng);
        input_flags[j] = s;
        if (s) {
          ++trace.input.counts[j];
          input_active.push_back(static_cast<std::uint32_t>(j));
        }
      }
    }
    std::span<const std::uint8_t> prev_flags = input_flags;
    std::span<const std::uint32_t> prev_active = input_active;

    for (std::size_t k = 0; k < stages.size(); ++k) {
      Stage& s = stages[k];
      s.active.clear();
      if (s.kind == StageKind::maxpool) {
        s.pool.step(prev_flags, s.flags);
        for (std::size_t i = 0; i < s.flags.size(); ++i)
          if (s.flags[i]) {
            s.active.push_back(static_cast<std::uint32_t>(i));
            ++pool_counts[k][i];
          }
      } else {
        std::span<const double> z;
        if (s.analog) {
          z = s.constant_current;
        } else {
          if (s.projection.bias.empty())
            std::fill(s.acc.begin(), s.acc.end(), 0.0);
          else
            std::copy(s.projection.bias.begin(), s.projection.bias.end(), s.acc.begin());
          s.projection.add_spikes(prev_active, s.acc);
          for (std::size_t i = 0; i < s.acc.size(); ++i) s.z[i] = cfg.tau * s.acc[i];
          z = s.z;
        }
        if (s.kind == StageKind::softmax) {
          std::fill(s.flags.begin(), s.flags.end(), 0);
          if (const auto cls = s.softmax.step(z, softmax_rng, cfg)) {
            s.flags[*cls] = 1;
            s.active.push_back(static_cast<std::uint32_t>(*cls));
          }
        } else {
          s.neurons.step(z, cfg, &s.active);
          std::copy(s.neurons.spiked.begin(), s.neurons.spiked.end(), s.flags.begin());
        }
      }
      prev_flags = s.flags;
      prev_active = s.active;
    }
    trace.output_spikes.push_back(stages.back().active);
    while (next_checkpoint != checkpoints.end() && *next_checkpoint == t) {
      snapshot(t);
      ++next_checkpoint;
    }
  }

  for (std::size_t k = 0; k < stages.size(); ++k) {
    const Stage& s = stages[k];
    LayerTrace lt;
    lt.layer_index = s.layer_index;
    lt.activation_index = s.activation_index;
    lt.name = net.layers[s.layer_index].name;
    lt.kind = s.kind;
    lt.shape = s.out_shape;
    switch (s.kind) {
      case StageKind::maxpool:
        lt.counts = pool_counts[k];
        break;
      case StageKind::softmax:
        lt.counts.assign(s.softmax.counts().begin(), s.softmax.counts().end());
        lt.membrane.assign(s.softmax.membrane().begin(), s.softmax.membrane().end());
        break;
      default:
        lt.counts = s.neurons.count;
        lt.membrane = s.neurons.v;
        break;
    }
    trace.layers.push_back(std::move(lt));
  }
  return trace;
}

std::size_t classify(std::span<const std::uint32_t> counts, std::span<const double> membrane) {
  if (counts.empty()) throw Error(ErrorCode::InvalidArgument, "no output units");
  const std::uint32_t top = *std::max_element(counts.begin(), counts.end());
  std::size_t best = counts.size();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] != top) continue;
    if (best == counts.size()) {
      best = k;
      continue;
    }
    if (membrane.size() == counts.size() && membrane[k] > membrane[best]) best = k;
  }
  return best;
}

std::size_t classify(const SimTrace& trace) {
  const LayerTrace& out = trace.output();
  return classify(out.counts, out.membrane);
}

json to_json(const SimConfig& cfg) {
  return {{"tau", cfg.tau},
          {"dt", cfg.dt},
          {"n_steps", cfg.n_steps},
          {"reset_mode", std::string(to_string(cfg.reset_mode))},
          {"input_mode", std::string(to_string(cfg.input_mode))},
          {"rng_seed", cfg.rng_seed},
          {"maxpool_gamma", cfg.maxpool_gamma},
          {"softmax_gen_rate", cfg.generator_rate()},
          {"clamp_negative_v", cfg.clamp_negative_v},
          {"checkpoints", cfg.checkpoints}};
}

SimConfig config_from_json(const json& j) {
  SimConfig cfg;
  cfg.tau = j.at("tau").get<double>();
  cfg.dt = j.at("dt").get<double>();
  cfg.n_steps = j.at("n_steps").get<std::size_t>();
  const auto reset = parse_reset_mode(j.at("reset_mode").get<std::string>());
  const auto input = parse_input_mode(j.at("input_mode").get<std::string>());
  if (!reset || !input) throw Error(ErrorCode::InvalidConfig, "unknown reset or input mode");
  cfg.reset_mode = *reset;
  cfg.input_mode = *input;
  cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  cfg.maxpool_gamma = j.at("maxpool_gamma").get<double>();
  cfg.softmax_gen_rate = j.at("softmax_gen_rate").get<double>();
  cfg.clamp_negative_v = j.at("clamp_negative_v").get<bool>();
  cfg.checkpoints = j.value("checkpoints", std::vector<std::size_t>{});
  cfg.validate();
  return cfg;
}

json to_json(const SimTrace& trace) {
  json layers = json::array();
  for (const LayerTrace& l : trace.layers)
    layers.push_back({{"index", l.layer_index},
                      {"activation_index", l.activation_index},
                      {"name", l.name},
                      {"kind", std::string(to_string(l.kind))},
                      {"shape", l.shape},
                      {"counts", l.counts},
                      {"membrane", l.membrane},
                      {"rates", trace.rates(l)}});
  json snapshots = json::array();
  for (const OutputSnapshot& s : trace.snapshots)
    snapshots.push_back({{"step", s.step}, {"counts", s.counts}, {"membrane", s.membrane}});
  json input = {{"mode", std::string(to_string(trace.input.mode))}, {"shape", trace.input.shape}};
  if (trace.input.mode == InputMode::analog_current)
    input["values"] = trace.input.values;
  else
    input["counts"] = trace.input.counts;
  return {{"config", to_json(trace.config)},
          {"sample_index", trace.sample_index},
          {"input", input},
          {"layers", layers},
          {"output_spikes", trace.output_spikes},
          {"snapshots", snapshots},
          {"predicted_class", classify(trace)}};
}

SimTrace trace_from_json(const json& j) {
  try {
    SimTrace trace;
    trace.config = config_from_json(j.at("config"));
    trace.sample_index = j.at("sample_index").get<std::uint64_t>();
    const json& in = j.at("input");
    const auto mode = parse_input_mode(in.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::InvalidArgument, "unknown input mode");
    trace.input.mode = *mode;
    trace.input.shape = in.at("shape").get<Shape>();
    if (*mode == InputMode::analog_current)
      trace.input.values = in.at("values").get<std::vector<double>>();
    else
      trace.input.counts = in.at("counts").get<std::vector<std::uint32_t>>();
    for (const json& l : j.at("layers")) {
      LayerTrace lt;
      lt.layer_index = l.at("index").get<std::size_t>();
      lt.activation_index = l.at("activation_index").get<std::size_t>();
      lt.name = l.at("name").get<std::string>();
      const std::string kind = l.at("kind").get<std::string>();
      lt.kind = kind == "softmax"   ? StageKind::softmax
                : kind == "maxpool" ? StageKind::maxpool
                : kind == "avgpool" ? StageKind::avgpool
                                    : StageKind::neuron;
      lt.shape = l.at("shape").get<Shape>();
      lt.counts = l.at("counts").get<std::vector<std::uint32_t>>();
      lt.membrane = l.at("membrane").get<std::vector<double>>();
      trace.layers.push_back(std::move(lt));
    }
    trace.output_spikes = j.at("output_spikes").get<std::vector<std::vector<std::uint32_t>>>();
    for (const json& s : j.at("snapshots"))
      trace.snapshots.push_back({s.at("step").get<std::size_t>(),
                                 s.at("counts").get<std::vector<std::uint32_t>>(),
                                 s.at("membrane").get<std::vector<double>>()});
    if (trace.layers.empty()) throw Error(ErrorCode::InvalidArgument, "trace has no layers");
    return trace;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed trace JSON: ") + e.what());
  }
}

}  // namespace snnforge::snn
