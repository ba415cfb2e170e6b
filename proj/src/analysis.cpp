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
#include "snnforge/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "snnforge/error.hpp"
#include "snnforge/kernels.hpp"

namespace snnforge::analysis {

using nlohmann::json;
using snn::StageKind;

namespace {

// Shape of the tensor layer `index` consumes.
Shape layer_input_shape(const NetworkSpec& net, const std::vector<Shape>& shapes, std::size_t index) {
  return index == 0 ? net.input_shape : shapes[index - 1];
}

// W x for the linear part of a spiking stage (no bias).
std::vector<double> linear(const LayerSpec& layer, const Shape& in_shape, std::span<const double> x) {
  Tensor input(in_shape, std::vector<double>(x.begin(), x.end()));
  switch (layer.kind) {
    case LayerKind::conv2d:
      return ann::conv2d(input, layer.weight, {}, layer.stride, layer.padding, ann::Exec::serial).data;
    case LayerKind::dense:
      return ann::dense(input.reshaped({input.size()}), layer.weight, {}, ann::Exec::serial).data;
    case LayerKind::avgpool:
      return ann::pool(input, ann::PoolMode::avg, layer.window, layer.stride, ann::Exec::serial).data;
    default:
      throw Error(ErrorCode::InvalidArgument, "layer '" + layer.name + "' is not linear");
  }
}

// Bias of output element i; conv2d biases are per channel.
double bias_at(const LayerSpec& layer, std::size_t i, std::size_t n) {
  return layer.bias[i / (n / layer.bias.size())];
}

void require_subtraction(const snn::SimTrace& trace) {
  if (trace.config.reset_mode != snn::ResetMode::by_subtraction)
    throw Error(ErrorCode::WrongResetMode, "the rate identity only holds under reset by subtraction");
  if (trace.config.clamp_negative_v)
    throw Error(ErrorCode::WrongResetMode, "the rate identity does not hold with clamped membranes");
}

std::vector<double> delta_v(const snn::SimTrace& trace, const snn::LayerTrace& layer) {
  std::vector<double> dv(layer.membrane);
  const double scale = trace.config.tau * trace.config.duration();
  for (double& v : dv) v /= scale;
  return dv;
}

}  // namespace

double TheoryReport::max_rate_identity_residual() const {
  double worst = 0.0;
  for (const auto& l : rate_identity) worst = std::max(worst, l.max_abs_residual);
  return worst;
}

TheoryReport verify_rate_identity(const snn::SimTrace& trace, const NetworkSpec& net) {
  require_subtraction(trace);
  const auto shapes = infer_shapes(net);
  const double r_max = trace.config.r_max();
  TheoryReport report;
  for (std::size_t k = 0; k < trace.layers.size(); ++k) {
    const snn::LayerTrace& lt = trace.layers[k];
    if (lt.kind == StageKind::maxpool) continue;
    const LayerSpec& layer = net.layers.at(lt.layer_index);
    const std::vector<double> prev = trace.presyn_rates(k);
    const Shape in_shape = k == 0 && trace.input.mode == snn::InputMode::analog_current
                               ? trace.input.shape
                               : layer_input_shape(net, shapes, lt.layer_index);
    std::vector<double> expected = linear(layer, in_shape, prev);
    if (expected.size() != lt.counts.size())
      throw Error(ErrorCode::ShapeMismatch, "trace does not match network at '" + lt.name + "'");
    const std::vector<double> dv = delta_v(trace, lt);
    const std::vector<double> measured = lt.kind == StageKind::softmax ? dv : trace.rates(lt);

    LayerResidual res{lt.layer_index, lt.name, lt.kind, expected.size(), 0.0};
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (layer.has_parameters()) expected[i] += r_max * bias_at(layer, i, expected.size());
      // Softmax units never fire: V/(tau D) equals the full drive.
      if (lt.kind != StageKind::softmax) expected[i] -= dv[i];
      res.max_abs_residual = std::max(res.max_abs_residual, std::abs(measured[i] - expected[i]));
    }
    report.rate_identity.push_back(std::move(res));
  }
  report.expansion_residual = expansion_residual(trace, net);
  return report;
}

double expansion_residual(const snn::SimTrace& trace, const NetworkSpec& net) {
  require_subtraction(trace);
  const auto shapes = infer_shapes(net);
  const double r_max = trace.config.r_max();

  struct Link {
    const LayerSpec* layer;
    Shape in_shape;
    std::vector<double> dv;
  };

  double worst = 0.0;
  std::size_t k = 0;
  while (k < trace.layers.size()) {
    if (trace.layers[k].kind == StageKind::maxpool || trace.layers[k].kind == StageKind::softmax) {
      ++k;
      continue;
    }
    const std::vector<double> start = trace.presyn_rates(k);
    std::vector<Link> chain;
    for (; k < trace.layers.size(); ++k) {
      const snn::LayerTrace& lt = trace.layers[k];
      if (lt.kind == StageKind::maxpool || lt.kind == StageKind::softmax) break;
      const Shape in_shape = k == 0 && trace.input.mode == snn::InputMode::analog_current
                                 ? trace.input.shape
                                 : layer_input_shape(net, shapes, lt.layer_index);
      chain.push_back({&net.layers.at(lt.layer_index), in_shape, delta_v(trace, lt)});
    }

    const auto add_bias = [&](const LayerSpec& layer, std::vector<double>& v) {
      if (layer.has_parameters())
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += r_max * bias_at(layer, i, v.size());
    };

    // Recursive route.
    std::vector<std::vector<double>> recursive;
    std::vector<double> r = start;
    for (const Link& link : chain) {
      r = linear(*link.layer, link.in_shape, r);
      add_bias(*link.layer, r);
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= link.dv[i];
      recursive.push_back(r);
    }

    // Expansion route: linear forward of the start rates, minus every dV
    // pushed through the weights of the layers above it.
    std::vector<double> a = start;
    std::vector<std::vector<double>> propagated;  // propagated[m]: dV^m at the current depth
    for (std::size_t l = 0; l < chain.size(); ++l) {
      const Link& link = chain[l];
      a = linear(*link.layer, link.in_shape, a);
      add_bias(*link.layer, a);
      for (auto& p : propagated) p = linear(*link.layer, link.in_shape, p);
      propagated.push_back(link.dv);
      for (std::size_t i = 0; i < a.size(); ++i) {
        double value = a[i];
        for (const auto& p : propagated) value -= p[i];
        worst = std::max(worst, std::abs(value - recursive[l][i]));
      }
    }
  }
  return worst;
}

double predict_rate_reset_zero(double a, double tau, double dt) {
  if (!(a > 0.0 && a < 1.0))
    throw Error(ErrorCode::InvalidArgument, "constant-input prediction needs 0 < a < 1");
  if (!(tau > 0.0) || !(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau and dt must be > 0");
  const double z = tau * a;
  // Same threshold convention as the simulator's step function.
  const double n = std::ceil(tau * (1.0 - snn::kThresholdSlack) / z);
  const double eps = n * z - tau;
  return (a - eps / (n * tau)) / dt;
}

std::vector<ResetZeroProbe> probe_reset_to_zero(std::span<const double> activations,
                                                const snn::SimConfig& cfg) {
  snn::SimConfig sim = cfg;
  sim.reset_mode = snn::ResetMode::to_zero;
  sim.input_mode = snn::InputMode::analog_current;
  sim.clamp_negative_v = false;
  sim.checkpoints.clear();

  NetworkSpec unit;
  unit.input_shape = {1};
  LayerSpec dense;
  dense.kind = LayerKind::dense;
  dense.name = "probe";
  dense.weight = Tensor({1, 1}, {1.0});
  dense.bias = Tensor({1}, {0.0});
  unit.layers.push_back(dense);
  LayerSpec relu;
  relu.kind = LayerKind::relu;
  relu.name = "probe_relu";
  unit.layers.push_back(relu);

  std::vector<ResetZeroProbe> probes;
  for (double a : activations) {
    ResetZeroProbe p;
    p.activation = a;
    p.predicted_rate = predict_rate_reset_zero(a, sim.tau, sim.dt);
    const double z = sim.tau * a;
    p.steps_between_spikes = static_cast<std::size_t>(std::ceil(sim.tau * (1.0 - snn::kThresholdSlack) / z));
    p.overshoot = static_cast<double>(p.steps_between_spikes) * z - sim.tau;
    p.predicted_count = sim.n_steps / p.steps_between_spikes;
    const snn::SimTrace trace = snn::simulate(unit, Tensor({1}, {a}), sim);
    p.measured_count = trace.output().counts[0];
    p.measured_rate = trace.rates(trace.output())[0];
    probes.push_back(p);
  }
  return probes;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "pearson: length mismatch");
  if (a.size() < 2) return std::nullopt;
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<LayerCorrelation> correlate(const snn::SimTrace& trace, const ann::ActivationRecord& record,
                                        const NetworkSpec& net, const convert::LayerScales& scales) {
  std::vector<LayerCorrelation> out;
  double lambda = 1.0;
  std::size_t next_layer = 0;
  for (const snn::LayerTrace& lt : trace.layers) {
    // Carry lambda through non-parameter layers up to this stage.
    for (; next_layer <= lt.layer_index; ++next_layer) {
      const LayerSpec& layer = net.layers.at(next_layer);
      if (!layer.has_parameters() || scales.empty()) continue;
      const auto it = scales.find(layer.name);
      lambda = it != scales.end() ? it->second : 1.0;
    }
    LayerCorrelation c{lt.layer_index, lt.name, std::nullopt, ""};
    if (lt.kind == StageKind::softmax) {
      c.reason = "softmax output is sampled, not rate coded";
      out.push_back(std::move(c));
      continue;
    }
    const Tensor& act = record.layers.at(lt.activation_index);
    if (act.size() != lt.counts.size())
      throw Error(ErrorCode::ShapeMismatch, "record does not match trace at '" + lt.name + "'");
    std::vector<double> rate = trace.rates(lt);
    std::vector<double> target(act.data);
    for (double& r : rate) r /= trace.config.r_max();
    for (double& v : target) v /= lambda;
    c.pearson = pearson(rate, target);
    if (!c.pearson) c.reason = "zero variance";
    out.push_back(std::move(c));
  }
  return out;
}

AccuracyCurve accuracy_curve(const NetworkSpec& net, const snn::SimConfig& cfg,
                             const netio::DatasetHandle& data, const std::vector<std::size_t>& checkpoints,
                             std::size_t n_samples) {
  if (data.count == 0 || !data.has_labels())
    throw Error(ErrorCode::EmptyDataset, "accuracy needs labelled samples");
  if (checkpoints.empty()) throw Error(ErrorCode::InvalidArgument, "no checkpoints");
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1])
      throw Error(ErrorCode::InvalidArgument, "checkpoints must be strictly increasing");
  const std::size_t n = n_samples == 0 ? data.count : std::min(n_samples, data.count);

  snn::SimConfig sim = cfg;
  sim.checkpoints = checkpoints;
  sim.n_steps = std::max<std::size_t>(checkpoints.back(), 1);
  sim.validate();

  std::vector<std::vector<std::uint8_t>> correct(n, std::vector<std::uint8_t>(checkpoints.size(), 0));
  std::vector<std::uint8_t> ann_correct(n, 0);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
  for (std::ptrdiff_t s = 0; s < count; ++s) {
    const auto i = static_cast<std::size_t>(s);
    const Tensor x = data.sample(i, net.input_shape);
    const snn::SimTrace trace = snn::simulate(net, x, sim, i);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const auto& snap = trace.snapshots[c];
      correct[i][c] = static_cast<int>(snn::classify(snap.counts, snap.membrane)) == data.labels[i];
    }
    const auto record = ann::forward(net, x, ann::Exec::serial);
    ann_correct[i] = static_cast<int>(ann::argmax(record.output().values())) == data.labels[i];
  }

  AccuracyCurve curve;
  curve.steps = checkpoints;
  curve.samples = n;
  curve.config = sim;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += correct[i][c];
    curve.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  std::size_t ann_hits = 0;
  for (auto v : ann_correct) ann_hits += v;
  curve.ann_accuracy = static_cast<double>(ann_hits) / static_cast<double>(n);
  return curve;
}

void write_csv(const AccuracyCurve& curve, std::ostream& out) {
  out << "step,accuracy\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.steps.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", curve.steps[i], curve.accuracy[i]);
    out << buf;
  }
}

AccuracyCurve read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "step,accuracy")
    throw Error(ErrorCode::InvalidArgument, "accuracy CSV must start with 'step,accuracy'");
  AccuracyCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::InvalidArgument, "bad CSV row: " + line);
    try {
      curve.steps.push_back(std::stoull(line.substr(0, comma)));
      curve.accuracy.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "bad CSV row: " + line);
    }
  }
  return curve;
}

json to_json(const TheoryReport& report) {
  json layers = json::array();
  for (const auto& l : report.rate_identity)
    layers.push_back({{"index", l.layer_index},
                      {"name", l.name},
                      {"kind", std::string(snn::to_string(l.kind))},
                      {"units", l.units},
                      {"max_abs_residual", l.max_abs_residual}});
  json probes = json::array();
  for (const auto& p : report.reset_zero_probes)
    probes.push_back({{"activation", p.activation},
                      {"steps_between_spikes", p.steps_between_spikes},
                      {"overshoot", p.overshoot},
                      {"predicted_rate", p.predicted_rate},
                      {"measured_rate", p.measured_rate},
                      {"predicted_count", p.predicted_count},
                      {"measured_count", p.measured_count}});
  return {{"rate_identity", layers},
          {"max_rate_identity_residual", report.max_rate_identity_residual()},
          {"expansion_residual",
           report.expansion_residual ? json(*report.expansion_residual) : json(nullptr)},
          {"reset_zero_probes", probes}};
}

TheoryReport theory_report_from_json(const json& j) {
  try {
    TheoryReport report;
    for (const json& l : j.at("rate_identity")) {
      LayerResidual r;
      r.layer_index = l.at("index").get<std::size_t>();
      r.name = l.at("name").get<std::string>();
      const std::string kind = l.at("kind").get<std::string>();
      r.kind = kind == "softmax" ? StageKind::softmax
               : kind == "avgpool" ? StageKind::avgpool
                                   : StageKind::neuron;
      r.units = l.at("units").get<std::size_t>();
      r.max_abs_residual = l.at("max_abs_residual").get<double>();
      report.rate_identity.push_back(std::move(r));
    }
    if (!j.at("expansion_residual").is_null())
      report.expansion_residual = j.at("expansion_residual").get<double>();
    for (const json& p : j.at("reset_zero_probes"))
      report.reset_zero_probes.push_back(
          {p.at("activation").get<double>(), p.at("steps_between_spikes").get<std::size_t>(),
           p.at("overshoot").get<double>(), p.at("predicted_rate").get<double>(),
           p.at("measured_rate").get<double>(), p.at("predicted_count").get<std::uint64_t>(),
           p.at("measured_count").get<std::uint64_t>()});
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed theory report: ") + e.what());
  }
}

json to_json(const std::vector<LayerCorrelation>& correlations) {
  json out = json::array();
  for (const auto& c : correlations) {
    json entry = {{"index", c.layer_index}, {"name", c.name}};
    entry["pearson"] = c.pearson ? json(*c.pearson) : json(nullptr);
    if (!c.pearson) entry["reason"] = c.reason;
    out.push_back(std::move(entry));
  }
  return out;
}

std::vector<LayerCorrelation> correlations_from_json(const json& j) {
  std::vector<LayerCorrelation> out;
  for (const json& e : j) {
    LayerCorrelation c;
    c.layer_index = e.at("index").get<std::size_t>();
    c.name = e.at("name").get<std::string>();
    if (!e.at("pearson").is_null()) c.pearson = e.at("pearson").get<double>();
    c.reason = e.value("reason", std::string());
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace snnforge::analysis
