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
#include "snnforge/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "snnforge/analysis.hpp"
#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/error.hpp"
#include "snnforge/netio.hpp"
#include "snnforge/snn.hpp"

namespace snnforge::cli {

namespace {

using nlohmann::json;

struct Options {
  std::string model, images, labels, stats, out, csv, report, raw_model;
  std::size_t n = 0;
  std::size_t index = 0;
  double percentile = 99.9;
  bool no_normalization = false;
  std::string reset = "subtract";
  std::string input = "analog";
  std::size_t steps = 300;
  std::uint64_t seed = 42;
  std::vector<std::size_t> checkpoints;
  double tau = 1.0;
  double dt = 1e-3;
  double gamma = 0.999;
  std::optional<double> softmax_rate;
  bool clamp_negative = false;
  std::size_t reservoir = 0;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing required flag ") + flag);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error(ErrorCode::IoError, "failed writing '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

netio::DatasetHandle load_dataset(const Options& o, bool labels_required) {
  require(o.images, "--images");
  if (labels_required) require(o.labels, "--labels");
  return o.labels.empty() ? netio::load_idx_images(o.images) : netio::load_idx(o.images, o.labels);
}

// Batchnorm folding is exact, so simulation commands accept unfolded models.
NetworkSpec load_simulatable(const std::string& path) {
  NetworkSpec net = netio::load_model(path);
  const bool has_bn = std::any_of(net.layers.begin(), net.layers.end(),
                                  [](const LayerSpec& l) { return l.kind == LayerKind::batchnorm; });
  return has_bn ? convert::fold_batchnorm(net) : net;
}

snn::SimConfig sim_config(const Options& o) {
  snn::SimConfig cfg;
  const auto reset = snn::parse_reset_mode(o.reset);
  if (!reset) throw Error(ErrorCode::InvalidArgument, "unknown reset mode '" + o.reset + "'");
  const auto input = snn::parse_input_mode(o.input);
  if (!input) throw Error(ErrorCode::InvalidArgument, "unknown input mode '" + o.input + "'");
  if (o.steps < 1) throw Error(ErrorCode::InvalidArgument, "--steps must be >= 1");
  cfg.reset_mode = *reset;
  cfg.input_mode = *input;
  cfg.n_steps = o.steps;
  cfg.rng_seed = o.seed;
  cfg.tau = o.tau;
  cfg.dt = o.dt;
  cfg.maxpool_gamma = o.gamma;
  cfg.softmax_gen_rate = o.softmax_rate;
  cfg.clamp_negative_v = o.clamp_negative;
  cfg.validate();
  return cfg;
}

void check_percentile(double p) {
  if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "--percentile must lie in (0, 100]");
}

int cmd_stats(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  require(o.out, "--out");
  const NetworkSpec net = netio::load_model(o.model);
  const auto data = load_dataset(o, false);
  const auto stats = convert::collect_stats(net, data, {o.n, o.reservoir, o.seed});
  write_json(o.out, convert::to_json(stats));
  out << "collected statistics for " << stats.layers.size() << " layers over " << stats.samples
      << " samples\n";
  return kExitOk;
}

int cmd_convert(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  require(o.out, "--out");
  check_percentile(o.percentile);
  const NetworkSpec net = netio::load_model(o.model);
  convert::ActivationStats stats;
  if (!o.no_normalization) {
    if (!o.stats.empty())
      stats = convert::stats_from_json(read_json(o.stats));
    else if (!o.images.empty())
      stats = convert::collect_stats(net, load_dataset(o, false), {o.n, o.reservoir, o.seed});
    else
      throw Error(ErrorCode::InvalidArgument, "normalization needs --stats or --images");
  }
  const auto [converted, report] = convert::convert(net, stats, {o.percentile, !o.no_normalization});
  netio::save_model(converted, o.out);
  if (!o.report.empty()) write_json(o.report, convert::to_json(report));
  out << "folded " << report.folds.size() << " batchnorm layers";
  if (report.normalized) out << ", normalized " << report.layers.size() << " layers at p=" << o.percentile;
  out << "\n";
  return kExitOk;
}

int cmd_run(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  require(o.out, "--out");
  const NetworkSpec net = load_simulatable(o.model);
  const auto data = load_dataset(o, false);
  if (o.index >= data.count) throw Error(ErrorCode::InvalidArgument, "--index out of range");
  snn::SimConfig cfg = sim_config(o);
  cfg.checkpoints = o.checkpoints;
  const auto trace = snn::simulate(net, data.sample(o.index, net.input_shape), cfg, o.index);
  write_json(o.out, snn::to_json(trace));
  out << "sample " << o.index << ": predicted class " << snn::classify(trace);
  if (data.has_labels()) out << ", label " << data.labels[o.index];
  out << "\n";
  return kExitOk;
}

std::vector<std::size_t> eval_checkpoints(const Options& o) {
  if (!o.checkpoints.empty()) {
    for (std::size_t c : o.checkpoints)
      if (c > o.steps) throw Error(ErrorCode::InvalidArgument, "checkpoint beyond --steps");
    return o.checkpoints;
  }
  std::vector<std::size_t> cps;
  for (std::size_t c : analysis::kDefaultCheckpoints)
    if (c < o.steps) cps.push_back(c);
  cps.push_back(o.steps);
  return cps;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  if (o.csv.empty() && o.out.empty()) throw Error(ErrorCode::InvalidArgument, "missing --csv or --out");
  const NetworkSpec net = load_simulatable(o.model);
  const auto data = load_dataset(o, true);
  const auto curve = analysis::accuracy_curve(net, sim_config(o), data, eval_checkpoints(o), o.n);
  if (!o.csv.empty()) {
    std::ostringstream csv;
    analysis::write_csv(curve, csv);
    write_text(o.csv, csv.str());
  }
  if (!o.out.empty()) {
    json j = {{"steps", curve.steps},
              {"accuracy", curve.accuracy},
              {"samples", curve.samples},
              {"ann_accuracy", curve.ann_accuracy ? json(*curve.ann_accuracy) : json(nullptr)},
              {"config", snn::to_json(curve.config)}};
    write_json(o.out, j);
  }
  out << "snn accuracy " << curve.accuracy.back() << " at " << curve.steps.back() << " steps over "
      << curve.samples << " samples";
  if (curve.ann_accuracy) out << " (ann " << *curve.ann_accuracy << ")";
  out << "\n";
  return kExitOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  require(o.model, "--model");
  require(o.out, "--out");
  const NetworkSpec net = load_simulatable(o.model);
  const auto data = load_dataset(o, false);
  if (o.index >= data.count) throw Error(ErrorCode::InvalidArgument, "--index out of range");
  const snn::SimConfig cfg = sim_config(o);
  const Tensor x = data.sample(o.index, net.input_shape);
  const auto trace = snn::simulate(net, x, cfg, o.index);
  const auto record = ann::forward(net, x);

  json j;
  j["sample_index"] = o.index;
  j["predicted_class"] = snn::classify(trace);
  j["ann_class"] = ann::argmax(record.output().values());
  j["correlations"] = analysis::to_json(analysis::correlate(trace, record, net));
  if (!o.raw_model.empty()) {
    const NetworkSpec raw = load_simulatable(o.raw_model);
    j["raw_correlations"] = analysis::to_json(analysis::correlate(trace, ann::forward(raw, x), raw));
  }

  analysis::TheoryReport theory;
  if (cfg.reset_mode == snn::ResetMode::by_subtraction && !cfg.clamp_negative_v)
    theory = analysis::verify_rate_identity(trace, net);
  std::vector<double> grid;
  for (int k = 1; k <= 19; ++k) grid.push_back(0.05 * k);
  theory.reset_zero_probes = analysis::probe_reset_to_zero(grid, cfg);
  j["theory"] = analysis::to_json(theory);
  write_json(o.out, j);

  out << "sample " << o.index << ": snn class " << j["predicted_class"] << ", ann class " << j["ann_class"];
  if (!theory.rate_identity.empty()) out << ", max identity residual " << theory.max_rate_identity_residual();
  out << "\n";
  return kExitOk;
}

void add_data_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--images", o.images, "IDX image file");
  cmd->add_option("--labels", o.labels, "IDX label file");
}

void add_sim_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--reset", o.reset, "to_zero | subtract")->capture_default_str();
  cmd->add_option("--input", o.input, "analog | poisson")->capture_default_str();
  cmd->add_option("--steps", o.steps, "time steps")->capture_default_str();
  cmd->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  cmd->add_option("--tau", o.tau, "firing threshold")->capture_default_str();
  cmd->add_option("--dt", o.dt, "seconds per step")->capture_default_str();
  cmd->add_option("--gamma", o.gamma, "max-pool rate estimate decay")->capture_default_str();
  cmd->add_option("--softmax-rate", o.softmax_rate, "softmax clock rate in Hz (default 1/dt)");
  cmd->add_flag("--clamp-negative", o.clamp_negative, "clamp membranes at zero");
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Convert trained CNNs to spiking networks and simulate them", "snnforge"};
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "collect per-layer activation statistics");
  stats->add_option("--model", o.model, "ASNN model")->required();
  add_data_flags(stats, o);
  stats->add_option("--n", o.n, "number of samples (0 = all)");
  stats->add_option("--reservoir", o.reservoir, "reservoir size per layer (0 = keep everything)");
  stats->add_option("--seed", o.seed, "reservoir RNG seed")->capture_default_str();
  stats->add_option("--out", o.out, "statistics JSON")->required();

  auto* conv = app.add_subcommand("convert", "fold batchnorm and normalize weights");
  conv->add_option("--model", o.model, "ASNN model")->required();
  conv->add_option("--stats", o.stats, "statistics JSON from `stats`");
  add_data_flags(conv, o);
  conv->add_option("--n", o.n, "samples for inline statistics (0 = all)");
  conv->add_option("--reservoir", o.reservoir, "reservoir size for inline statistics");
  conv->add_option("--percentile", o.percentile, "activation percentile used as layer scale")
      ->capture_default_str();
  conv->add_flag("--no-normalization", o.no_normalization, "fold batchnorm only");
  conv->add_option("--out", o.out, "converted ASNN model")->required();
  conv->add_option("--report", o.report, "conversion report JSON");

  auto* run = app.add_subcommand("run", "simulate one sample and write its trace");
  run->add_option("--model", o.model, "converted ASNN model")->required();
  add_data_flags(run, o);
  run->add_option("--index", o.index, "sample index")->capture_default_str();
  run->add_option("--checkpoints", o.checkpoints, "steps at which to snapshot the output")->delimiter(',');
  add_sim_flags(run, o);
  run->add_option("--out", o.out, "trace JSON")->required();

  auto* eval = app.add_subcommand("eval", "accuracy as a function of simulation time");
  eval->add_option("--model", o.model, "converted ASNN model")->required();
  add_data_flags(eval, o);
  eval->add_option("--n", o.n, "number of samples (0 = all)");
  eval->add_option("--checkpoints", o.checkpoints, "comma-separated steps")->delimiter(',');
  add_sim_flags(eval, o);
  eval->add_option("--csv", o.csv, "accuracy CSV");
  eval->add_option("--out", o.out, "accuracy JSON");

  auto* cmp = app.add_subcommand("compare", "correlate SNN rates with ANN activations");
  cmp->add_option("--model", o.model, "converted ASNN model")->required();
  cmp->add_option("--raw-model", o.raw_model, "unnormalized model for raw-activation correlations");
  add_data_flags(cmp, o);
  cmp->add_option("--index", o.index, "sample index")->capture_default_str();
  add_sim_flags(cmp, o);
  cmp->add_option("--out", o.out, "comparison JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const CLI::ConversionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*stats) return cmd_stats(o, out);
    if (*conv) return cmd_convert(o, out);
    if (*run) return cmd_run(o, out);
    if (*eval) return cmd_eval(o, out);
    return cmd_compare(o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitFailure;
}

}  // namespace snnforge::cli
