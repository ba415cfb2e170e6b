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
// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit status if
// any criterion fails. Oracles are computed here from the naive loop nests in
// support.hpp, not from the library's analysis module.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "snnforge/analysis.hpp"
#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/kernels.hpp"
#include "snnforge/netio.hpp"
#include "snnforge/snn.hpp"
#include "support.hpp"

using namespace snnforge;

namespace {

const std::string kData = SNNFORGE_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> dv_of(const snn::SimTrace& trace, const snn::LayerTrace& l) {
  std::vector<double> dv(l.membrane);
  for (double& v : dv) v /= trace.config.tau * trace.config.duration();
  return dv;
}

std::vector<double> rates_of(const snn::SimTrace& trace, const snn::LayerTrace& l) {
  std::vector<double> r(l.counts.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = l.counts[i] / trace.config.duration();
  return r;
}

std::vector<double> input_rates(const snn::SimTrace& trace) {
  std::vector<double> r(trace.input.counts.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = trace.input.counts[i] / trace.config.duration();
  return r;
}

Shape input_shape_of(const NetworkSpec& net, const std::vector<Shape>& shapes, std::size_t layer) {
  return layer == 0 ? net.input_shape : shapes[layer - 1];
}

// Random single conv2d or dense layer with analog input; checks
// r = a r_max - V(T)/(tau D) per neuron with a = W x + b.
Outcome first_layer_identity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> tau_dist(0.5, 2.0);
  std::uniform_int_distribution<std::size_t> steps_dist(50, 1000);
  double worst = 0.0;
  std::size_t neurons = 0;
  for (int trial = 0; trial < 100; ++trial) {
    NetworkSpec net;
    if (trial % 2 == 0) {
      net.input_shape = {2, 7, 7};
      net.layers.push_back(support::make_conv("conv", 3, 2, 3, 1 + trial % 3,
                                              trial % 4 < 2 ? Padding::valid : Padding::same, rng, 0.8, 0.3));
    } else {
      net.input_shape = {20};
      net.layers.push_back(support::make_dense("fc", 8, 20, rng, 0.8, 0.3));
    }
    net.layers.push_back(support::make_simple(LayerKind::relu, "relu"));
    const Tensor x = support::random_tensor(net.input_shape, rng, 0, 1);
    snn::SimConfig cfg;
    cfg.tau = tau_dist(rng);
    cfg.n_steps = steps_dist(rng);
    const auto trace = snn::simulate(net, x, cfg, static_cast<std::uint64_t>(trial));
    const auto& l = trace.layers.at(0);
    const auto a = support::naive_linear(net.layers[0], net.input_shape, x.data, true);
    const auto r = rates_of(trace, l);
    const auto dv = dv_of(trace, l);
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, std::abs(r[i] - (a[i] * cfg.r_max() - dv[i])));
    neurons += a.size();
  }
  return {worst <= 1e-9, "max residual " + fmt("%.3g Hz", worst) + " over " + std::to_string(neurons) + " neurons"};
}

// Random 2-4 layer nets with Poisson input under reset by subtraction; checks
// r = W r_prev + r_max b - V/(tau D) on every conv2d/dense/avgpool stage.
Outcome layer_identity() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0, worst_lib = 0.0;
  std::size_t stages = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t depth = 2 + static_cast<std::size_t>(trial % 3);
    const NetworkSpec net = support::random_network(rng, depth, true, trial % 2 == 0);
    const auto shapes = infer_shapes(net);
    // Arbitrary input statistics: per-pixel intensities anywhere in [0, 1].
    Tensor x(net.input_shape);
    const double sparsity = unit(rng);
    for (double& v : x.data) v = unit(rng) < sparsity ? 0.0 : unit(rng);
    snn::SimConfig cfg;
    cfg.input_mode = snn::InputMode::poisson;
    cfg.n_steps = 100 + static_cast<std::size_t>(trial) * 7;
    cfg.rng_seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto trace = snn::simulate(net, x, cfg, 0);

    for (std::size_t k = 0; k < trace.layers.size(); ++k) {
      const auto& l = trace.layers[k];
      if (l.kind != snn::StageKind::neuron && l.kind != snn::StageKind::avgpool) continue;
      const LayerSpec& layer = net.layers[l.layer_index];
      const auto prev = k == 0 ? input_rates(trace) : rates_of(trace, trace.layers[k - 1]);
      auto expect = support::naive_linear(layer, input_shape_of(net, shapes, l.layer_index), prev, false);
      const auto r = rates_of(trace, l);
      const auto dv = dv_of(trace, l);
      const std::size_t per_channel = layer.has_parameters() ? expect.size() / layer.bias.size() : 1;
      for (std::size_t i = 0; i < expect.size(); ++i) {
        if (layer.has_parameters()) expect[i] += cfg.r_max() * layer.bias[i / per_channel];
        worst = std::max(worst, std::abs(r[i] - (expect[i] - dv[i])));
      }
      ++stages;
    }
    worst_lib = std::max(worst_lib, analysis::verify_rate_identity(trace, net).max_rate_identity_residual());
  }
  return {worst <= 1e-9 && worst_lib <= 1e-9,
          "max residual " + fmt("%.3g Hz", worst) + " (library check " + fmt("%.3g Hz", worst_lib) + ") over " +
              std::to_string(stages) + " stages"};
}

// Constant input z = tau a into a single reset-to-zero neuron; the simulated
// spike count must equal the predicted rate times the duration exactly.
Outcome reset_zero_grid() {
  snn::SimConfig cfg;
  cfg.reset_mode = snn::ResetMode::to_zero;
  cfg.n_steps = 4200;  // a multiple of every inter-spike interval on the grid
  NetworkSpec net;
  net.input_shape = {1};
  LayerSpec d = support::make_simple(LayerKind::dense, "unit");
  d.weight = Tensor({1, 1}, {1.0});
  d.bias = Tensor({1}, {0.0});
  net.layers = {d, support::make_simple(LayerKind::relu, "relu")};
  std::size_t matched = 0, total = 0;
  std::string mismatch;
  for (int k = 1; k <= 19; ++k) {
    const double a = 0.05 * k;
    const auto trace = snn::simulate(net, Tensor({1}, {a}), cfg);
    const std::uint32_t measured = trace.output().counts[0];
    const double predicted = analysis::predict_rate_reset_zero(a, cfg.tau, cfg.dt) * cfg.duration();
    ++total;
    if (std::abs(predicted - measured) < 1e-6)
      ++matched;
    else
      mismatch += " a=" + fmt("%.2f", a) + " (" + std::to_string(measured) + " vs " + fmt("%.4f", predicted) + ")";
  }
  return {matched == total, std::to_string(matched) + "/" + std::to_string(total) + " grid points match" + mismatch};
}

// Random 3-layer chains (no max-pooling); the closed-form error expansion and
// the recursive layer identity are evaluated independently and compared.
Outcome expansion_vs_recursion() {
  std::mt19937_64 rng(303);
  double worst = 0.0, worst_lib = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    NetworkSpec net = support::random_network(rng, 3, true, false);
    for (auto& l : net.layers)
      if (l.kind == LayerKind::maxpool) l.kind = LayerKind::avgpool;
    const auto shapes = infer_shapes(net);
    snn::SimConfig cfg;
    cfg.input_mode = snn::InputMode::poisson;
    cfg.n_steps = 200 + 10 * static_cast<std::size_t>(trial);
    cfg.rng_seed = 77 + static_cast<std::uint64_t>(trial);
    const auto x = support::random_tensor(net.input_shape, rng, 0, 1);
    const auto trace = snn::simulate(net, x, cfg);
    const double r_max = cfg.r_max();

    const auto apply = [&](const snn::LayerTrace& l, const std::vector<double>& v, bool bias) {
      const LayerSpec& layer = net.layers[l.layer_index];
      auto y = support::naive_linear(layer, input_shape_of(net, shapes, l.layer_index), v, false);
      if (bias && layer.has_parameters()) {
        const std::size_t per = y.size() / layer.bias.size();
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += r_max * layer.bias[i / per];
      }
      return y;
    };

    std::vector<double> recursive = input_rates(trace), linear = recursive;
    std::vector<std::vector<double>> errors;  // dV^k pushed up to the current stage
    for (const auto& l : trace.layers) {
      const auto dv = dv_of(trace, l);
      recursive = apply(l, recursive, true);
      for (std::size_t i = 0; i < recursive.size(); ++i) recursive[i] -= dv[i];
      linear = apply(l, linear, true);
      for (auto& e : errors) e = apply(l, e, false);
      errors.push_back(dv);
      for (std::size_t i = 0; i < linear.size(); ++i) {
        double expansion = linear[i];
        for (const auto& e : errors) expansion -= e[i];
        worst = std::max(worst, std::abs(expansion - recursive[i]));
      }
    }
    worst_lib = std::max(worst_lib, analysis::expansion_residual(trace, net));
  }
  return {worst <= 1e-9 && worst_lib <= 1e-9,
          "max difference " + fmt("%.3g Hz", worst) + " (library check " + fmt("%.3g Hz", worst_lib) + ")"};
}

double relative_error(const Tensor& got, const Tensor& ref) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(got[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return scale > 0.0 ? diff / scale : diff;
}

Outcome batchnorm_fold() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    NetworkSpec net = support::random_network(rng, 2 + static_cast<std::size_t>(trial % 3), true, true, true);
    net.layers.pop_back();  // compare logits; the softmax would hide differences
    const NetworkSpec folded = convert::fold_batchnorm(net);
    for (int k = 0; k < 100; ++k) {
      const Tensor x = support::random_tensor(net.input_shape, rng, 0, 1);
      worst = std::max(worst, relative_error(ann::forward(folded, x).output(), ann::forward(net, x).output()));
    }
  }
  return {worst <= 1e-5, "max relative difference " + fmt("%.3g", worst) + " over 20 nets x 100 inputs"};
}

struct MnistSetup {
  NetworkSpec model;
  netio::DatasetHandle norm_set;
  netio::DatasetHandle test;
  convert::ActivationStats stats;
};

const MnistSetup& mnist() {
  static const MnistSetup s = [] {
    MnistSetup m;
    const std::string dir = kData + "/mnist5k/";
    m.model = netio::load_model(kData + "/models/mnist_cnn.asnn");
    m.norm_set = netio::load_idx_images(dir + "train-images-idx3-ubyte");
    m.norm_set.count = 1000;
    m.norm_set.pixels.resize(1000 * element_count(m.norm_set.sample_shape));
    m.test = netio::load_idx(dir + "test-images-idx3-ubyte", dir + "test-labels-idx1-ubyte");
    m.stats = convert::collect_stats(m.model, m.norm_set, {});
    return m;
  }();
  return s;
}

Outcome normalization_argmax() {
  const auto& m = mnist();
  std::size_t bad = 0, checked = 0;
  for (double p : {99.9, 100.0}) {
    const NetworkSpec norm = convert::convert(m.model, m.stats, {p, true}).first;
    for (std::size_t i = 0; i < m.norm_set.count; ++i) {
      const Tensor x = m.norm_set.sample(i, m.model.input_shape);
      bad += ann::argmax(ann::forward(norm, x).output().values()) !=
             ann::argmax(ann::forward(m.model, x).output().values());
      ++checked;
    }
  }
  return {bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) +
                        " normalization-set predictions preserved (p=99.9 and p=100)"};
}

Outcome max_norm_bound() {
  const auto& m = mnist();
  const NetworkSpec norm = convert::convert(m.model, m.stats, {100.0, true}).first;
  const auto after = convert::collect_stats(norm, m.norm_set, {});
  double worst = 0.0;
  for (const auto& l : after.layers) worst = std::max(worst, l.max());
  return {worst <= 1.0 + 1e-9, "max normalized activation " + fmt("%.12f", worst)};
}

Outcome maxpool_rate() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  std::vector<std::vector<double>> cases = {{0.9, 0.1, 0.0, 0.0}, {0.1, 0.3, 0.5, 0.2}, {0.3, 0.25, 0.1, 0.05},
                                            {0.3, 0.29, 0.28, 0.27}, {0.28, 0.28, 0.28, 0.28}, {0.5, 0.5, 0.1, 0.1}};
  for (int k = 0; k < 17; ++k) cases.push_back({unit(rng), unit(rng), unit(rng), unit(rng)});
  double worst = 0.0;
  snn::Rng spikes = snn::Rng::for_stream(9, 0, 0);
  for (const auto& rates : cases) {
    snn::GatedMaxPool pool({1, 2, 2}, {2, 2}, {2, 2}, 0.999);
    std::vector<std::uint64_t> in_counts(4, 0);
    std::uint64_t out_count = 0;
    std::vector<std::uint8_t> in(4), out(1);
    for (int t = 0; t < 10000; ++t) {
      for (std::size_t j = 0; j < 4; ++j) {
        in[j] = snn::poisson_spike(rates[j], spikes);
        in_counts[j] += in[j];
      }
      pool.step(in, out);
      out_count += out[0];
    }
    const double best = static_cast<double>(*std::max_element(in_counts.begin(), in_counts.end()));
    worst = std::max(worst, std::abs(static_cast<double>(out_count) - best) / best);
  }
  return {worst <= 0.02, "max relative rate gap " + fmt("%.4f", worst) + " over " + std::to_string(cases.size()) +
                             " windows"};
}

Outcome softmax_negative() {
  NetworkSpec net;
  net.input_shape = {3};
  LayerSpec d = support::make_simple(LayerKind::dense, "out");
  d.weight = Tensor({4, 3}, -0.5);
  d.bias = Tensor({4}, {-0.1, -0.2, -0.3, -0.4});
  net.layers = {d, support::make_simple(LayerKind::softmax, "softmax")};
  snn::SimConfig cfg;
  const auto trace = snn::simulate(net, Tensor({3}, {0.2, 0.6, 0.9}), cfg);
  std::uint64_t spikes = 0;
  for (auto c : trace.output().counts) spikes += c;
  bool negative = true;
  for (double v : trace.output().membrane) negative = negative && v < 0.0;
  return {negative && spikes > 0,
          std::to_string(spikes) + " output spikes in " + std::to_string(cfg.n_steps) + " steps, all membranes < 0"};
}

Outcome softmax_frequencies() {
  const std::vector<double> v = {-1.2, 0.3, 0.8, -0.5, 0.1, -2.0};
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  std::vector<double> p(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sum += p[i] = std::exp(v[i] - mx);
  for (double& x : p) x /= sum;

  snn::SimConfig cfg;
  snn::SpikingSoftmax sm(v.size());
  snn::Rng rng = snn::Rng::for_stream(11, 0, 1);
  std::vector<double> freq(v.size(), 0.0);
  const std::vector<double> zero(v.size(), 0.0);
  std::size_t events = 0;
  for (int t = 0; t < 10000; ++t) {
    const auto cls = sm.step(t == 0 ? std::span<const double>(v) : std::span<const double>(zero), rng, cfg);
    if (cls) {
      freq[*cls] += 1;
      ++events;
    }
  }
  double worst_sigma = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double n = static_cast<double>(events);
    worst_sigma = std::max(worst_sigma, std::abs(freq[i] - n * p[i]) / std::sqrt(n * p[i] * (1 - p[i])));
  }
  return {events == 10000 && worst_sigma <= 3.0,
          std::to_string(events) + " events, worst deviation " + fmt("%.2f sigma", worst_sigma)};
}

Outcome ablation_ladder() {
  const auto& m = mnist();
  const NetworkSpec raw = convert::fold_batchnorm(m.model);
  const NetworkSpec max_norm = convert::convert(m.model, m.stats, {100.0, true}).first;
  const NetworkSpec p999 = convert::convert(m.model, m.stats, {99.9, true}).first;
  struct Rung {
    const char* label;
    const NetworkSpec* net;
    snn::ResetMode reset;
    snn::InputMode input;
  };
  const Rung rungs[] = {
      {"no-norm/to_zero/poisson", &raw, snn::ResetMode::to_zero, snn::InputMode::poisson},
      {"max-norm/to_zero/poisson", &max_norm, snn::ResetMode::to_zero, snn::InputMode::poisson},
      {"max-norm/subtract/poisson", &max_norm, snn::ResetMode::by_subtraction, snn::InputMode::poisson},
      {"max-norm/subtract/analog", &max_norm, snn::ResetMode::by_subtraction, snn::InputMode::analog_current},
      {"p99.9/subtract/analog", &p999, snn::ResetMode::by_subtraction, snn::InputMode::analog_current},
  };
  std::vector<double> acc;
  std::string detail;
  for (const auto& r : rungs) {
    snn::SimConfig cfg;
    cfg.reset_mode = r.reset;
    cfg.input_mode = r.input;
    const auto curve = analysis::accuracy_curve(*r.net, cfg, m.test, {300}, 400);
    acc.push_back(curve.accuracy.back());
    detail += std::string(detail.empty() ? "" : " | ") + r.label + " " + fmt("%.4f", acc.back());
  }
  const bool ordered = acc[0] < acc[1] && acc[1] < acc[2] && acc[2] <= acc[3] && acc[3] <= acc[4];
  return {ordered, detail};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;
  };
  const Criterion criteria[] = {
      {"first-layer rate identity, 100 random single-layer nets", first_layer_identity, 10},
      {"layer rate identity, 100 random 2-4 layer nets, Poisson input", layer_identity, 30},
      {"reset-to-zero rate prediction on a = 0.05..0.95", reset_zero_grid, 5},
      {"error expansion equals recursive identity, random 3-layer nets", expansion_vs_recursion, 0},
      {"batchnorm folding preserves outputs", batchnorm_fold, 0},
      {"normalization preserves ANN argmax on the normalization set", normalization_argmax, 0},
      {"max normalization bounds activations by 1", max_norm_bound, 0},
      {"spiking max-pool tracks the max input rate (10000 steps)", maxpool_rate, 0},
      {"spiking softmax fires with all-negative inputs", softmax_negative, 0},
      {"spiking softmax class frequencies within 3 sigma", softmax_frequencies, 0},
      {"ablation ladder ordering on 400 MNIST test samples, 300 steps", ablation_ladder, 600},
  };
  int failures = 0;
  std::printf("threads: %d\n", kernels::max_threads());
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2fs", seconds);
    if (c.budget_seconds > 0) {
      timing += fmt(" (budget %.0fs)", c.budget_seconds);
      if (seconds > c.budget_seconds) {
        o.pass = false;
        o.detail += "; over time budget";
      }
    }
    failures += !o.pass;
    std::printf("[%s] %s: %s [%s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
