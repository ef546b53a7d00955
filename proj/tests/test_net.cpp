/**
 * Copyright 2026 The QNet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "qnet/graph.hpp"
#include "qnet/net.hpp"

using namespace qnet;

namespace {

bool throws_with(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

GraphSpec celsius_graph() {
  GraphSpec g;
  g.name = "celsius";
  LayerSpec in;
  in.name = "celsius";
  in.kind = LayerKind::INPUT;
  in.tops = {"celsius"};
  in.input_shape = {1, 1};
  LayerSpec ip;
  ip.name = "neuron";
  ip.kind = LayerKind::INNER_PRODUCT;
  ip.bottoms = {"celsius"};
  ip.tops = {"neuron"};
  ip.num_output = 1;
  LayerSpec qz;
  qz.name = "output";
  qz.kind = LayerKind::QUANTIZER;
  qz.bottoms = {"neuron"};
  qz.tops = {"output"};
  g.layers = {in, ip, qz};
  return g;
}

void set_celsius_params(Net* net, const std::string& prefix = "") {
  net->set_param(prefix + "neuron.weight", Tensor::fp32({1, 1}, {1.8f}));
  net->set_param(prefix + "neuron.bias", Tensor::fp32({1}, {32.0f}));
}

// Calibration ranges for the thermometer task: inputs span [-273, 1000),
// outputs the matching Fahrenheit interval; the weight range includes
// zero so its grid stays faithful.
void set_celsius_ranges(Net* net) {
  net->set_range("celsius", -273.0, 1000.0);
  net->set_range("neuron", -459.4, 1832.0);
  net->set_range("neuron.weight", 0.0, 1.8);
}

Tensor one_value(float v) { return Tensor::fp32({1, 1}, {v}); }

std::vector<uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(f),
                              std::istreambuf_iterator<char>());
}

std::filesystem::path temp_model_path(const char* tag) {
  return std::filesystem::temp_directory_path() /
         (std::string("qnet_net_test_") + tag + ".qcnm");
}

// A two-expert MOE network whose gating features are produced by a nested
// inner-product net.
GraphSpec moe_graph() {
  auto gating = std::make_shared<GraphSpec>();
  gating->name = "gating";
  {
    LayerSpec in;
    in.name = "gin";
    in.kind = LayerKind::INPUT;
    in.tops = {"gin"};
    in.input_shape = {1, 2};
    LayerSpec ip;
    ip.name = "gfc";
    ip.kind = LayerKind::INNER_PRODUCT;
    ip.bottoms = {"gin"};
    ip.tops = {"gfc"};
    ip.num_output = 2;
    gating->layers = {in, ip};
  }
  auto expert = std::make_shared<GraphSpec>();
  expert->name = "expert";
  {
    LayerSpec in;
    in.name = "ein";
    in.kind = LayerKind::INPUT;
    in.tops = {"ein"};
    in.input_shape = {1, 2};
    LayerSpec ip;
    ip.name = "efc";
    ip.kind = LayerKind::INNER_PRODUCT;
    ip.bottoms = {"ein"};
    ip.tops = {"efc"};
    ip.num_output = 2;
    expert->layers = {in, ip};
  }

  GraphSpec g;
  g.name = "moe_net";
  LayerSpec in;
  in.name = "x";
  in.kind = LayerKind::INPUT;
  in.tops = {"x"};
  in.input_shape = {1, 2};
  LayerSpec moe;
  moe.name = "mix";
  moe.kind = LayerKind::MOE;
  moe.bottoms = {"x"};
  moe.tops = {"mix"};
  moe.moe = std::make_shared<MoeLayerParams>();
  moe.moe->n_experts = 2;
  moe.moe->top_k = 1;
  moe.moe->gating_graph = gating;
  moe.moe->expert_graph = expert;
  g.layers = {in, moe};
  return g;
}

void set_moe_params(Net* net) {
  // Gating feature extractor: identity.
  net->set_param("mix.gating.gfc.weight", Tensor::fp32({2, 2}, {1, 0, 0, 1}));
  net->set_param("mix.gating.gfc.bias", Tensor::fp32({2}, {0, 0}));
  // Gate matrices: logits equal the gating features.
  net->set_param("mix.gate_a", Tensor::fp32({2, 2}, {1, 0, 0, 1}));
  net->set_param("mix.gate_b", Tensor::fp32({2, 2}, {0, 0, 0, 0}));
  net->set_param("mix.gate_c", Tensor::fp32({2}, {0, 0}));
  // Expert 0 doubles, expert 1 negates.
  net->set_param("mix.expert0.efc.weight", Tensor::fp32({2, 2}, {2, 0, 0, 2}));
  net->set_param("mix.expert0.efc.bias", Tensor::fp32({2}, {0, 0}));
  net->set_param("mix.expert1.efc.weight",
                 Tensor::fp32({2, 2}, {-1, 0, 0, -1}));
  net->set_param("mix.expert1.efc.bias", Tensor::fp32({2}, {0, 0}));
}

}  // namespace

TEST_CASE("constructing a net from an invalid graph throws") {
  GraphSpec g = celsius_graph();
  g.layers[1].bottoms = {"nowhere"};
  CHECK_THROWS_AS(Net{std::move(g)}, std::invalid_argument);
}

TEST_CASE("celsius fp32 forward computes the conversion formula") {
  Net net(celsius_graph());
  set_celsius_params(&net);
  const auto out = net.forward({{"celsius", one_value(100.0f)}});
  REQUIRE(out.count("output") == 1);
  CHECK(out.at("output").fget(0) == doctest::Approx(212.0f));

  CHECK(net.forward({{"celsius", one_value(0.0f)}})
            .at("output")
            .fget(0) == doctest::Approx(32.0f));
  CHECK(net.forward({{"celsius", one_value(-40.0f)}})
            .at("output")
            .fget(0) == doctest::Approx(-40.0f));
}

TEST_CASE("input and output names") {
  Net net(celsius_graph());
  CHECK(net.input_names() == std::vector<std::string>{"celsius"});
  CHECK(net.output_names() == std::vector<std::string>{"output"});
}

TEST_CASE("forward requires all declared inputs") {
  Net net(celsius_graph());
  set_celsius_params(&net);
  CHECK(throws_with([&] { net.forward({}); }, "missing input: celsius"));
  CHECK(throws_with(
      [&] {
        net.forward({{"celsius", Tensor::fp32({1, 2}, {1.0f, 2.0f})}});
      },
      "shape mismatch"));
}

TEST_CASE("forward requires parameters") {
  Net net(celsius_graph());
  CHECK(throws_with([&] { net.forward({{"celsius", one_value(1.0f)}}); },
                    "missing parameter: neuron.weight"));
}

TEST_CASE("a leading batch extent may differ from the declared shape") {
  Net net(celsius_graph());
  set_celsius_params(&net);
  Tensor batch = Tensor::fp32({3, 1}, {0.0f, 100.0f, -40.0f});
  const Tensor out = net.forward({{"celsius", batch}}).at("output");
  REQUIRE(out.count() == 3);
  CHECK(out.fget(0) == doctest::Approx(32.0f));
  CHECK(out.fget(1) == doctest::Approx(212.0f));
  CHECK(out.fget(2) == doctest::Approx(-40.0f));
}

TEST_CASE("passive mode matches a quantizer-free graph bit for bit") {
  Net with_q(celsius_graph());
  set_celsius_params(&with_q);

  GraphSpec bare = celsius_graph();
  bare.layers.pop_back();  // drop the output quantizer
  Net without_q(std::move(bare));
  set_celsius_params(&without_q);

  std::mt19937_64 rng(61);
  std::uniform_real_distribution<float> dist(-273.0f, 1000.0f);
  for (int i = 0; i < 100; ++i) {
    const float x = dist(rng);
    const float a = with_q.forward({{"celsius", one_value(x)}})
                        .at("output")
                        .fget(0);
    const float b = without_q.forward({{"celsius", one_value(x)}})
                        .at("neuron")
                        .fget(0);
    CHECK(a == b);
  }
}

TEST_CASE("observe mode records blob ranges") {
  Net net(celsius_graph());
  set_celsius_params(&net);
  net.set_quant_mode(QuantMode::OBSERVE);
  net.forward({{"celsius", one_value(-273.0f)}});
  net.forward({{"celsius", one_value(999.0f)}});

  const ObservationState* in_range = net.range("celsius");
  REQUIRE(in_range != nullptr);
  CHECK(in_range->seen_min == -273.0);
  CHECK(in_range->seen_max == 999.0);

  const ObservationState* out_range = net.range("neuron");
  REQUIRE(out_range != nullptr);
  CHECK(out_range->seen_min == doctest::Approx(-459.4).epsilon(1e-4));
  CHECK(out_range->seen_max == doctest::Approx(1830.2).epsilon(1e-4));
}

TEST_CASE("set_range overrides observations") {
  Net net(celsius_graph());
  net.set_range("celsius", -5.0, 5.0);
  const ObservationState* r = net.range("celsius");
  REQUIRE(r != nullptr);
  CHECK(r->seen_min == -5.0);
  CHECK(r->seen_max == 5.0);
}

TEST_CASE("quantized mode requires finalized quantizers") {
  GraphSpec g = override_precision(celsius_graph(), DataType::INT8Q);
  Net net(std::move(g));
  set_celsius_params(&net);
  CHECK(throws_with([&] { net.set_quant_mode(QuantMode::QUANTIZED); },
                    "quantizer not finalized"));
}

TEST_CASE("calibrated int8 inference tracks the fp32 line") {
  GraphSpec g = override_precision(celsius_graph(), DataType::INT8Q);
  Net net(std::move(g));
  set_celsius_params(&net);
  set_celsius_ranges(&net);
  net.finalize_quantizers();
  net.set_quant_mode(QuantMode::QUANTIZED);

  // One output quantization step over [-459.4, 1832) is about 8.99; a
  // single inference stays within one step of the exact formula.
  const QuantizerValues* qv = net.blob_qvals("neuron");
  REQUIRE(qv != nullptr);
  for (float x : {-273.0f, -40.0f, 0.0f, 100.0f, 999.0f}) {
    const float got = net.forward({{"celsius", one_value(x)}})
                          .at("output")
                          .fget(0);
    const float want = x * 1.8f + 32.0f;
    CHECK(std::abs(got - want) <= 2.0 * qv->scale);
  }
}

TEST_CASE("pseudo mode bins flagged blobs to the quantized grid") {
  GraphSpec g = override_precision(celsius_graph(), DataType::INT8Q);
  Net net(std::move(g));
  set_celsius_params(&net);
  set_celsius_ranges(&net);
  net.finalize_quantizers();
  net.set_quant_mode(QuantMode::PSEUDO);

  std::mt19937_64 rng(67);
  std::uniform_real_distribution<float> dist(-273.0f, 1000.0f);
  std::set<float> distinct;
  for (int i = 0; i < 1000; ++i) {
    distinct.insert(net.forward({{"celsius", one_value(dist(rng))}})
                        .at("output")
                        .fget(0));
  }
  // The grid has i_max - i_min + 1 = 256 reachable levels; a thousand
  // random draws leave a few bins empty.
  CHECK(distinct.size() <= 255);
  CHECK(distinct.size() > 100);  // the grid is actually exercised
}

TEST_CASE("finalize quantizes the weights of quantized layers") {
  GraphSpec g = override_precision(celsius_graph(), DataType::INT8Q);
  Net net(std::move(g));
  set_celsius_params(&net);
  set_celsius_ranges(&net);
  net.finalize_quantizers();

  const Tensor* w = net.param("neuron.weight");
  REQUIRE(w != nullptr);
  CHECK(w->dtype() == DataType::INT8Q);
  REQUIRE(w->qvals().has_value());
  // The dequantized weight still reads 1.8 within one weight step.
  const Tensor back = net.param_float("neuron.weight");
  CHECK(std::abs(back.fget(0) - 1.8f) <= w->qvals()->scale);
  // Bias stays FP32.
  CHECK(net.param("neuron.bias")->dtype() == DataType::FP32);
}

TEST_CASE("moe net routes nested parameters and mixes experts") {
  Net net(moe_graph());
  set_moe_params(&net);

  // Positive feature sum selects expert 0 (doubling), negative selects
  // expert 1 (negation).
  Tensor x = Tensor::fp32({2, 2}, {5.0f, 1.0f, -5.0f, -1.0f});
  const Tensor out = net.forward({{"x", x}}).at("mix");
  REQUIRE(out.count() == 4);
  CHECK(out.fget(0) == doctest::Approx(10.0f));
  CHECK(out.fget(1) == doctest::Approx(2.0f));
  CHECK(out.fget(2) == doctest::Approx(5.0f));
  CHECK(out.fget(3) == doctest::Approx(1.0f));
}

TEST_CASE("moe nested parameters appear in the model with prefixes") {
  Net net(moe_graph());
  set_moe_params(&net);
  const Model m = net.to_model();
  CHECK(m.find("mix.gate_a") != nullptr);
  CHECK(m.find("mix.gating.gfc.weight") != nullptr);
  CHECK(m.find("mix.expert0.efc.weight") != nullptr);
  CHECK(m.find("mix.expert1.efc.bias") != nullptr);

  // Round trip through a fresh net reproduces the forward pass.
  Net other(moe_graph());
  other.load_weights(m);
  Tensor x = Tensor::fp32({1, 2}, {3.0f, 4.0f});
  const float a = net.forward({{"x", x}}).at("mix").fget(0);
  const float b = other.forward({{"x", x}}).at("mix").fget(0);
  CHECK(a == b);
}

TEST_CASE("model save and load round trip preserves everything") {
  const auto path = temp_model_path("roundtrip");
  GraphSpec g = override_precision(celsius_graph(), DataType::INT8Q);
  Net net(std::move(g));
  set_celsius_params(&net);
  set_celsius_ranges(&net);
  net.finalize_quantizers();

  save_model(net.to_model(), path.string());
  const Model loaded = load_model(path.string());

  // Weight payload bit-exact.
  const ParamRecord* w = loaded.find("neuron.weight");
  REQUIRE(w != nullptr);
  CHECK(w->dtype == DataType::INT8Q);
  CHECK(w->scale > 0.0f);

  // Ranges preserved via blob records.
  const ParamRecord* r = loaded.find("blob:celsius");
  REQUIRE(r != nullptr);
  CHECK(r->f_min == doctest::Approx(-273.0f));
  CHECK(r->f_max == doctest::Approx(1000.0f));
  CHECK(r->scale == 0.0f);  // pure range record

  // Loading into a fresh net and saving again is byte-identical.
  GraphSpec g2 = override_precision(celsius_graph(), DataType::INT8Q);
  Net net2(std::move(g2));
  net2.load_weights(loaded);
  net2.finalize_quantizers();
  const auto path2 = temp_model_path("roundtrip2");
  save_model(net2.to_model(), path2.string());
  CHECK(file_bytes(path) == file_bytes(path2));

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("load_model rejects foreign and truncated files") {
  const auto bad = temp_model_path("bad");
  {
    std::ofstream f(bad, std::ios::binary);
    f << "definitely not a model";
  }
  CHECK(throws_with([&] { load_model(bad.string()); }, "not a model file"));
  std::filesystem::remove(bad);

  const auto trunc = temp_model_path("trunc");
  Net net(celsius_graph());
  set_celsius_params(&net);
  save_model(net.to_model(), trunc.string());
  const auto full = std::filesystem::file_size(trunc);
  std::filesystem::resize_file(trunc, full - 3);
  CHECK(throws_with([&] { load_model(trunc.string()); },
                    "truncated model file"));
  std::filesystem::remove(trunc);
}

TEST_CASE("pool and dropout tops share their bottom's range key") {
  GraphSpec g;
  LayerSpec in;
  in.name = "in";
  in.kind = LayerKind::INPUT;
  in.tops = {"in"};
  in.input_shape = {1, 1, 4, 4};
  LayerSpec pool;
  pool.name = "pooled";
  pool.kind = LayerKind::POOL;
  pool.bottoms = {"in"};
  pool.tops = {"pooled"};
  LayerSpec drop;
  drop.name = "dropped";
  drop.kind = LayerKind::DROPOUT;
  drop.bottoms = {"pooled"};
  drop.tops = {"dropped"};
  g.layers = {in, pool, drop};

  Net net(std::move(g));
  net.set_range("in", -3.0, 3.0);
  // The value-preserving layers' tops resolve to the same statistics.
  const ObservationState* a = net.range("pooled");
  const ObservationState* b = net.range("dropped");
  REQUIRE(a != nullptr);
  REQUIRE(b != nullptr);
  CHECK(a->seen_min == -3.0);
  CHECK(b->seen_min == -3.0);
}

TEST_CASE("fp16 layers compute through widened fp32") {
  GraphSpec g = override_precision(celsius_graph(), DataType::FP16);
  Net net(std::move(g));
  set_celsius_params(&net);
  net.finalize_quantizers();
  net.set_quant_mode(QuantMode::QUANTIZED);
  const float got = net.forward({{"celsius", one_value(100.0f)}})
                        .at("output")
                        .fget(0);
  // 212 is exactly representable in binary16.
  CHECK(got == 212.0f);
}
