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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "snnforge/ann.hpp"
#include "snnforge/convert.hpp"
#include "snnforge/error.hpp"
#include "support.hpp"

using namespace snnforge;

namespace {

netio::DatasetHandle random_dataset(const Shape& shape, std::size_t n, std::mt19937_64& rng) {
  netio::DatasetHandle d;
  d.sample_shape = shape;
  d.count = n;
  d.pixels = support::random_tensor({n * element_count(shape)}, rng, 0, 1).data;
  return d;
}

convert::LayerActivations layer_of(std::vector<double> values) {
  convert::LayerActivations l;
  l.layer_name = "l";
  for (double v : values)
    if (v == 0.0)
      ++l.zero_count;
    else
      l.nonzero.push_back(v);
  std::sort(l.nonzero.begin(), l.nonzero.end());
  l.observed = values.size();
  return l;
}

double rel_diff(const Tensor& a, const Tensor& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, 1e-300);
}

}  // namespace

TEST_CASE("fold_batchnorm examples") {
  NetworkSpec net;
  net.input_shape = {1};
  LayerSpec d = support::make_simple(LayerKind::dense, "d");
  d.weight = Tensor({1, 1}, {3.0});
  d.bias = Tensor({1}, {1.0});
  LayerSpec bn = support::make_simple(LayerKind::batchnorm, "bn");
  bn.gamma = Tensor({1}, {2.0});
  bn.sigma = Tensor({1}, {4.0});
  bn.mean = Tensor({1}, {1.0});
  bn.beta = Tensor({1}, {0.5});
  net.layers = {d, bn};
  std::vector<convert::FoldRecord> log;
  const NetworkSpec folded = convert::fold_batchnorm(net, &log);
  REQUIRE(folded.layers.size() == 1);
  CHECK(folded.layers[0].weight[0] == 1.5);
  CHECK(folded.layers[0].bias[0] == 0.5);
  REQUIRE(log.size() == 1);
  CHECK(log[0].batchnorm == "bn");
  CHECK(log[0].folded_into == "d");

  bn.gamma = Tensor({1}, {1.0});
  bn.sigma = Tensor({1}, {1.0});
  bn.mean = Tensor({1}, {0.0});
  bn.beta = Tensor({1}, {0.0});
  net.layers = {d, bn};
  const NetworkSpec same = convert::fold_batchnorm(net);
  CHECK(same.layers.size() == 1);
  CHECK(same.layers[0] == d);

  NetworkSpec orphan;
  orphan.input_shape = {1};
  orphan.layers = {d, support::make_simple(LayerKind::relu, "r"), bn};
  try {
    convert::fold_batchnorm(orphan);
    FAIL("expected NotFoldable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFoldable);
  }
}

TEST_CASE("folded and unfolded nets agree") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const NetworkSpec net = support::random_network(rng, 2 + trial % 3, true, true, true);
    const NetworkSpec folded = convert::fold_batchnorm(net);
    for (const auto& l : folded.layers) CHECK(l.kind != LayerKind::batchnorm);
    for (int k = 0; k < 20; ++k) {
      const Tensor x = support::random_tensor(net.input_shape, rng, 0, 1);
      CHECK(rel_diff(ann::forward(folded, x).output(), ann::forward(net, x).output()) <= 1e-5);
    }
  }
}

TEST_CASE("percentile examples") {
  std::vector<double> ramp;
  for (int i = 1; i <= 100; ++i) ramp.push_back(i);
  const auto layer = layer_of(ramp);
  CHECK(convert::percentile(layer, 100) == 100.0);
  // rank 0.99 * 99 = 98.01 -> v[98] + 0.01 (v[99] - v[98]) = 99.01
  CHECK(convert::percentile(layer, 99) == doctest::Approx(99.01).epsilon(1e-12));
  CHECK(convert::percentile(layer_of({2.5, 2.5, 2.5}), 37) == 2.5);
  CHECK(convert::percentile(layer_of({0.7}), 99.9) == doctest::Approx(0.7));
  // Zeros are part of the multiset.
  CHECK(convert::percentile(layer_of({0, 0, 0, 4}), 50) == 0.0);
  CHECK(convert::percentile(layer_of({0, 0, 0, 4}), 100) == 4.0);
  CHECK_THROWS_AS(convert::percentile(layer, 0), Error);
  CHECK_THROWS_AS(convert::percentile(layer, 100.5), Error);
  CHECK_THROWS_AS(convert::percentile(layer_of({}), 50), Error);
}

TEST_CASE("collect_stats gathers the union over samples") {
  NetworkSpec net;
  net.input_shape = {2};
  LayerSpec d = support::make_simple(LayerKind::dense, "d");
  d.weight = Tensor({2, 2}, {1, 0, 0, 1});
  d.bias = Tensor({2}, {0, 0});
  net.layers = {d, support::make_simple(LayerKind::relu, "r")};
  netio::DatasetHandle data;
  data.sample_shape = {2};
  data.count = 2;
  data.pixels = {0.1, 0.2, 0.3, 0.4};
  const auto stats = convert::collect_stats(net, data, {});
  REQUIRE(stats.layers.size() == 1);
  const auto& l = stats.layers[0];
  CHECK(l.size() == 4);
  CHECK(l.nonzero == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(stats.find("d") == &l);

  data.count = 1;
  data.pixels = {0.7, 0.0};
  const auto one = convert::collect_stats(net, data, {});
  CHECK(one.layers[0].zero_count == 1);
  CHECK(one.layers[0].nonzero == std::vector<double>{0.7});

  data.count = 0;
  data.pixels.clear();
  CHECK_THROWS_AS(convert::collect_stats(net, data, {}), Error);
}

TEST_CASE("reservoir statistics are deterministic and bounded") {
  std::mt19937_64 rng(4);
  const NetworkSpec net = support::random_network(rng, 3, true, true);
  const auto data = random_dataset(net.input_shape, 50, rng);
  const auto a = convert::collect_stats(net, data, {0, 64, 7});
  const auto b = convert::collect_stats(net, data, {0, 64, 7});
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(a.layers[i].nonzero == b.layers[i].nonzero);
    CHECK(a.layers[i].size() <= 64);
  }
  const auto all = convert::collect_stats(net, data, {});
  const auto json = convert::to_json(all);
  const auto back = convert::stats_from_json(json);
  CHECK(back.layers[0].nonzero == all.layers[0].nonzero);
  CHECK(back.layers[0].zero_count == all.layers[0].zero_count);
}

TEST_CASE("normalize_params examples") {
  NetworkSpec net;
  net.input_shape = {1};
  LayerSpec d1 = support::make_simple(LayerKind::dense, "d1");
  d1.weight = Tensor({1, 1}, {1.0});
  d1.bias = Tensor({1}, {0.0});
  LayerSpec d2 = d1;
  d2.name = "d2";
  d2.bias = Tensor({1}, {2.0});
  net.layers = {d1, support::make_simple(LayerKind::relu, "r1"), d2, support::make_simple(LayerKind::relu, "r2")};
  const auto [out, report] = convert::normalize_params(net, {{"d1", 2.0}, {"d2", 4.0}});
  CHECK(out.layers[2].weight[0] == 0.5);
  CHECK(out.layers[2].bias[0] == 0.5);
  CHECK(out.normalized);
  REQUIRE(report.layers.size() == 2);
  CHECK(report.layers[1].previous_lambda == 2.0);
  CHECK(report.layers[1].weight_scale == 0.5);

  const auto [same, r2] = convert::normalize_params(net, {{"d1", 1.0}, {"d2", 1.0}});
  CHECK(same.layers == net.layers);
  CHECK_THROWS_AS(convert::normalize_params(net, {{"d1", 1.0}}), Error);
}

TEST_CASE("max normalization bounds activations by one") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const NetworkSpec net = support::random_network(rng, 3, true, true, true);
    const auto data = random_dataset(net.input_shape, 40, rng);
    const auto stats = convert::collect_stats(net, data, {});
    const auto [norm, report] = convert::convert(net, stats, {100.0, true});
    CHECK(report.percentile == 100.0);
    CHECK(report.folds.size() == 2);
    const auto after = convert::collect_stats(norm, data, {});
    for (const auto& l : after.layers) CHECK(l.max() <= 1.0 + 1e-9);
    for (std::size_t i = 0; i < data.count; ++i) {
      const Tensor x = data.sample(i, net.input_shape);
      CHECK(ann::argmax(ann::forward(norm, x).output().values()) ==
            ann::argmax(ann::forward(net, x).output().values()));
    }
    const auto json = convert::to_json(report);
    const auto back = convert::report_from_json(json);
    CHECK(back.layers.size() == report.layers.size());
    CHECK(back.percentile == report.percentile);
  }
}

TEST_CASE("dead layers are rejected") {
  NetworkSpec net;
  net.input_shape = {1};
  LayerSpec d = support::make_simple(LayerKind::dense, "d");
  d.weight = Tensor({1, 1}, {-1.0});
  d.bias = Tensor({1}, {0.0});
  LayerSpec out = d;
  out.name = "out";
  net.layers = {d, support::make_simple(LayerKind::relu, "r"), out, support::make_simple(LayerKind::softmax, "s")};
  netio::DatasetHandle data;
  data.sample_shape = {1};
  data.count = 1;
  data.pixels = {0.5};
  const auto stats = convert::collect_stats(net, data, {});
  CHECK(stats.layers.size() == 1);  // the softmax head is not recorded
  try {
    convert::percentile_scale(stats, 99.9);
    FAIL("expected DeadLayer");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DeadLayer);
  }
}
