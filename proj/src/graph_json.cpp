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

#include "qnet/graph_json.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace qnet {

namespace {

using nlohmann::json;

DataType parse_dtype(const json& j, const char* field, DataType fallback) {
  if (!j.contains(field)) return fallback;
  const std::string s = j.at(field).get<std::string>();
  const auto t = dtype_from_name(s);
  if (!t) throw std::runtime_error(std::string("unknown data type: ") + s);
  return *t;
}

std::vector<std::string> parse_names(const json& j, const char* field) {
  std::vector<std::string> out;
  if (!j.contains(field)) return out;
  for (const json& e : j.at(field)) out.push_back(e.get<std::string>());
  return out;
}

GraphSpec parse_graph(const json& j);

LayerSpec parse_layer(const json& j) {
  LayerSpec l;
  l.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  const auto k = layer_kind_from_name(kind);
  if (!k) throw std::runtime_error("unknown layer kind: " + kind);
  l.kind = *k;
  l.mi_type = parse_dtype(j, "bottom_data_type", DataType::FP32);
  l.d_type = parse_dtype(j, "compute_data_type", l.mi_type);
  l.mo_type = parse_dtype(j, "top_data_type", l.d_type);
  l.bottoms = parse_names(j, "bottom");
  l.tops = parse_names(j, "top");

  switch (l.kind) {
    case LayerKind::INPUT:
      if (j.contains("input_shape")) {
        for (const json& e : j.at("input_shape")) {
          l.input_shape.push_back(e.get<int64_t>());
        }
      }
      break;
    case LayerKind::CONV: {
      const json& c = j.at("conv");
      l.conv.out_channels = c.value("out_channels", int64_t{0});
      l.conv.kernel_h = c.value("kernel_h", int64_t{1});
      l.conv.kernel_w = c.value("kernel_w", int64_t{1});
      l.conv.stride_h = c.value("stride_h", int64_t{1});
      l.conv.stride_w = c.value("stride_w", int64_t{1});
      l.conv.pad_h = c.value("pad_h", int64_t{0});
      l.conv.pad_w = c.value("pad_w", int64_t{0});
      l.conv.groups = c.value("groups", int64_t{1});
      l.bias_term = c.value("bias_term", true);
      break;
    }
    case LayerKind::POOL: {
      const json& p = j.at("pool");
      l.pool.kernel = p.value("kernel", int64_t{2});
      l.pool.stride = p.value("stride", int64_t{2});
      break;
    }
    case LayerKind::INNER_PRODUCT:
      l.num_output = j.value("num_output", int64_t{0});
      l.bias_term = j.value("bias_term", true);
      break;
    case LayerKind::RELU:
      l.negative_slope = j.value("negative_slope", 0.0f);
      break;
    case LayerKind::LRN:
      if (j.contains("lrn")) {
        const json& r = j.at("lrn");
        l.lrn.local_size = r.value("local_size", int64_t{5});
        l.lrn.alpha = r.value("alpha", 1e-4);
        l.lrn.beta = r.value("beta", 0.75);
        l.lrn.k = r.value("k", 1.0);
      }
      break;
    case LayerKind::MOE: {
      const json& mj = j.at("moe");
      auto mp = std::make_shared<MoeLayerParams>();
      mp->n_experts = mj.value("n_experts", int64_t{0});
      mp->top_k = mj.value("top_k", int64_t{1});
      const std::string mode = mj.value("batch_mode", "per_sample");
      if (mode == "per_sample") {
        mp->batch_mode = MoeBatchMode::PER_SAMPLE;
      } else if (mode == "all_experts") {
        mp->batch_mode = MoeBatchMode::ALL_EXPERTS;
      } else {
        throw std::runtime_error("unknown batch mode: " + mode);
      }
      mp->noise_enabled = mj.value("noise_enabled", false);
      mp->seed = mj.value("seed", uint64_t{0});
      mp->gating_graph = std::make_shared<GraphSpec>(parse_graph(mj.at("gating")));
      mp->expert_graph = std::make_shared<GraphSpec>(parse_graph(mj.at("expert")));
      l.moe = std::move(mp);
      break;
    }
    default:
      break;
  }
  return l;
}

GraphSpec parse_graph(const json& j) {
  GraphSpec g;
  g.name = j.value("name", std::string());
  g.inspect = parse_names(j, "inspect");
  if (j.contains("range_aliases")) {
    for (const auto& [key, value] : j.at("range_aliases").items()) {
      g.range_aliases[key] = value.get<std::string>();
    }
  }
  for (const json& lj : j.at("layers")) g.layers.push_back(parse_layer(lj));
  return g;
}

json dump_graph(const GraphSpec& g);

json dump_layer(const LayerSpec& l) {
  json j;
  j["name"] = l.name;
  j["kind"] = layer_kind_name(l.kind);
  j["bottom_data_type"] = dtype_name(l.mi_type);
  j["compute_data_type"] = dtype_name(l.d_type);
  j["top_data_type"] = dtype_name(l.mo_type);
  if (!l.bottoms.empty()) j["bottom"] = l.bottoms;
  j["top"] = l.tops;
  switch (l.kind) {
    case LayerKind::INPUT:
      j["input_shape"] = l.input_shape;
      break;
    case LayerKind::CONV:
      j["conv"] = {{"out_channels", l.conv.out_channels},
                   {"kernel_h", l.conv.kernel_h},
                   {"kernel_w", l.conv.kernel_w},
                   {"stride_h", l.conv.stride_h},
                   {"stride_w", l.conv.stride_w},
                   {"pad_h", l.conv.pad_h},
                   {"pad_w", l.conv.pad_w},
                   {"groups", l.conv.groups},
                   {"bias_term", l.bias_term}};
      break;
    case LayerKind::POOL:
      j["pool"] = {{"kernel", l.pool.kernel}, {"stride", l.pool.stride}};
      break;
    case LayerKind::INNER_PRODUCT:
      j["num_output"] = l.num_output;
      j["bias_term"] = l.bias_term;
      break;
    case LayerKind::RELU:
      j["negative_slope"] = l.negative_slope;
      break;
    case LayerKind::LRN:
      j["lrn"] = {{"local_size", l.lrn.local_size},
                  {"alpha", l.lrn.alpha},
                  {"beta", l.lrn.beta},
                  {"k", l.lrn.k}};
      break;
    case LayerKind::MOE: {
      json mj;
      mj["n_experts"] = l.moe->n_experts;
      mj["top_k"] = l.moe->top_k;
      mj["batch_mode"] = l.moe->batch_mode == MoeBatchMode::PER_SAMPLE
                             ? "per_sample"
                             : "all_experts";
      mj["noise_enabled"] = l.moe->noise_enabled;
      mj["seed"] = l.moe->seed;
      mj["gating"] = dump_graph(*l.moe->gating_graph);
      mj["expert"] = dump_graph(*l.moe->expert_graph);
      j["moe"] = std::move(mj);
      break;
    }
    default:
      break;
  }
  return j;
}

json dump_graph(const GraphSpec& g) {
  json j;
  j["name"] = g.name;
  if (!g.inspect.empty()) j["inspect"] = g.inspect;
  if (!g.range_aliases.empty()) j["range_aliases"] = g.range_aliases;
  j["layers"] = json::array();
  for (const LayerSpec& l : g.layers) j["layers"].push_back(dump_layer(l));
  return j;
}

}  // namespace

GraphSpec graph_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    return parse_graph(j);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("invalid graph json: ") + e.what());
  }
}

std::string graph_to_json(const GraphSpec& g) { return dump_graph(g).dump(2); }

GraphSpec load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return graph_from_json(text);
}

void save_graph(const GraphSpec& g, const std::string& path) {
  const std::string text = graph_to_json(g) + "\n";
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace qnet
