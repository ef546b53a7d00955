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

#include "qnet/graph.hpp"

#include <set>
#include <stdexcept>

namespace qnet {

namespace {

bool fixed_type_kind(LayerKind k) {
  return k != LayerKind::QUANTIZER && k != LayerKind::MOE;
}

// Root of a range-alias chain.
std::string resolve_alias(const std::map<std::string, std::string>& aliases,
                          const std::string& blob) {
  std::string cur = blob;
  std::set<std::string> seen;
  auto it = aliases.find(cur);
  while (it != aliases.end() && seen.insert(cur).second) {
    cur = it->second;
    it = aliases.find(cur);
  }
  return cur;
}

}  // namespace

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::INPUT:
      return "input";
    case LayerKind::CONV:
      return "conv";
    case LayerKind::POOL:
      return "pool";
    case LayerKind::INNER_PRODUCT:
      return "inner_product";
    case LayerKind::RELU:
      return "relu";
    case LayerKind::LRN:
      return "lrn";
    case LayerKind::SOFTMAX:
      return "softmax";
    case LayerKind::QUANTIZER:
      return "quantizer";
    case LayerKind::DROPOUT:
      return "dropout";
    case LayerKind::MOE:
      return "moe";
  }
  return "?";
}

std::optional<LayerKind> layer_kind_from_name(std::string_view name) {
  static const std::pair<std::string_view, LayerKind> table[] = {
      {"input", LayerKind::INPUT},
      {"conv", LayerKind::CONV},
      {"pool", LayerKind::POOL},
      {"inner_product", LayerKind::INNER_PRODUCT},
      {"relu", LayerKind::RELU},
      {"lrn", LayerKind::LRN},
      {"softmax", LayerKind::SOFTMAX},
      {"quantizer", LayerKind::QUANTIZER},
      {"dropout", LayerKind::DROPOUT},
      {"moe", LayerKind::MOE},
  };
  for (const auto& [n, k] : table) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::vector<std::string> param_record_names(const LayerSpec& layer) {
  std::vector<std::string> names;
  switch (layer.kind) {
    case LayerKind::CONV:
    case LayerKind::INNER_PRODUCT:
      names.push_back(layer.name + ".weight");
      if (layer.bias_term) names.push_back(layer.name + ".bias");
      break;
    case LayerKind::MOE:
      names.push_back(layer.name + ".gate_a");
      names.push_back(layer.name + ".gate_b");
      names.push_back(layer.name + ".gate_c");
      break;
    default:
      break;
  }
  return names;
}

ValidationReport validate(const GraphSpec& g) {
  ValidationReport report;
  auto flag = [&report](const std::string& msg) {
    report.violations.push_back(msg);
  };

  std::set<std::string> layer_names;
  std::map<std::string, int> producer_of;  // across the whole graph
  for (size_t i = 0; i < g.layers.size(); ++i) {
    for (const std::string& t : g.layers[i].tops) {
      if (producer_of.count(t)) {
        flag("blob produced twice: " + t);
      } else {
        producer_of[t] = static_cast<int>(i);
      }
    }
  }

  std::set<std::string> produced;  // blobs available at the current layer
  std::map<std::string, DataType> blob_type;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    if (!layer_names.insert(l.name).second) {
      flag("duplicate layer name: " + l.name);
    }

    // Arity.
    if (l.kind == LayerKind::INPUT) {
      if (!l.bottoms.empty()) flag("input layer has bottoms: " + l.name);
    } else if (l.bottoms.size() != 1) {
      flag("layer must have exactly one bottom: " + l.name);
    }
    if (l.tops.size() != 1) {
      flag("layer must have exactly one top: " + l.name);
    }

    // Bottom availability: consuming a blob produced by this or a later
    // layer is a cycle under declaration-order topology.
    for (const std::string& b : l.bottoms) {
      if (produced.count(b)) continue;
      auto it = producer_of.find(b);
      if (it != producer_of.end() && it->second >= static_cast<int>(i)) {
        flag("not a DAG: " + l.name + " consumes " + b);
      } else if (it == producer_of.end()) {
        flag("undefined blob: " + b + " (layer " + l.name + ")");
      }
    }

    // Type coupling rules.
    if (fixed_type_kind(l.kind)) {
      if (l.mi_type != l.d_type || l.d_type != l.mo_type) {
        flag(std::string(layer_kind_name(l.kind)) + " type mismatch: " +
             l.name);
      }
    } else if (l.d_type != l.mi_type) {
      flag(std::string(layer_kind_name(l.kind)) + " type mismatch: " + l.name);
    }
    if (l.kind == LayerKind::SOFTMAX && l.d_type != DataType::FP32) {
      flag("softmax requires float: " + l.name);
    }
    if (l.kind == LayerKind::LRN && l.d_type != DataType::FP32) {
      flag("lrn requires float: " + l.name);
    }

    // Kind-specific parameter sanity.
    switch (l.kind) {
      case LayerKind::INPUT:
        if (l.input_shape.empty()) flag("input shape missing: " + l.name);
        for (int64_t d : l.input_shape) {
          if (d < 1) flag("input shape missing: " + l.name);
        }
        break;
      case LayerKind::CONV:
        if (l.conv.out_channels < 1 || l.conv.kernel_h < 1 ||
            l.conv.kernel_w < 1 || l.conv.stride_h < 1 ||
            l.conv.stride_w < 1 || l.conv.groups < 1 || l.conv.pad_h < 0 ||
            l.conv.pad_w < 0) {
          flag("bad conv params: " + l.name);
        }
        break;
      case LayerKind::POOL:
        if (l.pool.kernel < 1 || l.pool.stride < 1) {
          flag("bad pool params: " + l.name);
        }
        break;
      case LayerKind::INNER_PRODUCT:
        if (l.num_output < 1) flag("bad inner product params: " + l.name);
        break;
      case LayerKind::LRN:
        if (l.lrn.local_size < 1 || l.lrn.local_size % 2 == 0) {
          flag("bad lrn params: " + l.name);
        }
        break;
      case LayerKind::MOE: {
        if (!l.moe || l.moe->n_experts < 1 || l.moe->top_k < 1 ||
            l.moe->top_k > l.moe->n_experts || !l.moe->gating_graph ||
            !l.moe->expert_graph) {
          flag("bad moe params: " + l.name);
          break;
        }
        for (const std::string& v : validate(*l.moe->gating_graph).violations) {
          flag("moe " + l.name + " gating: " + v);
        }
        for (const std::string& v : validate(*l.moe->expert_graph).violations) {
          flag("moe " + l.name + " expert: " + v);
        }
        break;
      }
      default:
        break;
    }

    // Edge dtype consistency: every consumer reads at the blob's dtype.
    for (const std::string& b : l.bottoms) {
      auto it = blob_type.find(b);
      if (it != blob_type.end() && it->second != l.mi_type) {
        flag("dtype mismatch at blob " + b + ": layer " + l.name);
      }
    }
    for (const std::string& t : l.tops) {
      produced.insert(t);
      blob_type[t] = l.mo_type;
    }
  }

  // Geometry feasibility, only meaningful once structure is sound.
  if (report.violations.empty()) {
    try {
      infer_blobs(g);
    } catch (const std::exception& e) {
      flag(std::string("bad geometry: ") + e.what());
    }
  }
  return report;
}

std::map<std::string, BlobInfo> infer_blobs(const GraphSpec& g) {
  std::map<std::string, BlobInfo> blobs;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const LayerSpec& l = g.layers[i];
    for (const std::string& b : l.bottoms) {
      auto it = blobs.find(b);
      if (it == blobs.end()) {
        throw std::invalid_argument("undefined blob: " + b);
      }
      it->second.consumers.push_back(static_cast<int>(i));
    }
    std::vector<int64_t> shape;
    switch (l.kind) {
      case LayerKind::INPUT:
        shape = l.input_shape;
        break;
      case LayerKind::CONV: {
        const std::vector<int64_t>& in = blobs.at(l.bottoms[0]).shape;
        if (in.size() != 4) throw std::invalid_argument("shape mismatch");
        if (in[1] % l.conv.groups != 0 ||
            l.conv.out_channels % l.conv.groups != 0) {
          throw std::invalid_argument("group divisibility violation");
        }
        const int64_t oh =
            (in[2] + 2 * l.conv.pad_h - l.conv.kernel_h) / l.conv.stride_h + 1;
        const int64_t ow =
            (in[3] + 2 * l.conv.pad_w - l.conv.kernel_w) / l.conv.stride_w + 1;
        if (oh < 1 || ow < 1) {
          throw std::invalid_argument("non-positive output extent");
        }
        shape = {in[0], l.conv.out_channels, oh, ow};
        break;
      }
      case LayerKind::POOL: {
        const std::vector<int64_t>& in = blobs.at(l.bottoms[0]).shape;
        if (in.size() != 4) throw std::invalid_argument("shape mismatch");
        const int64_t oh = (in[2] - l.pool.kernel) / l.pool.stride + 1;
        const int64_t ow = (in[3] - l.pool.kernel) / l.pool.stride + 1;
        if (oh < 1 || ow < 1) {
          throw std::invalid_argument("non-positive output extent");
        }
        shape = {in[0], in[1], oh, ow};
        break;
      }
      case LayerKind::INNER_PRODUCT: {
        const std::vector<int64_t>& in = blobs.at(l.bottoms[0]).shape;
        if (in.empty()) throw std::invalid_argument("shape mismatch");
        shape = {in[0], l.num_output};
        break;
      }
      case LayerKind::MOE: {
        const std::vector<int64_t>& in = blobs.at(l.bottoms[0]).shape;
        // Output shape comes from the expert template, rebatched.
        const auto sub = infer_blobs(*l.moe->expert_graph);
        const BlobInfo* sink = nullptr;
        for (const auto& [name, info] : sub) {
          if (info.consumers.empty()) sink = &info;
        }
        if (sink == nullptr) {
          throw std::invalid_argument("moe expert graph has no output");
        }
        shape = sink->shape;
        if (shape.empty()) throw std::invalid_argument("shape mismatch");
        shape[0] = in[0];
        break;
      }
      default:
        shape = blobs.at(l.bottoms[0]).shape;
        break;
    }
    for (const std::string& t : l.tops) {
      if (blobs.count(t)) {
        throw std::invalid_argument("blob produced twice: " + t);
      }
      BlobInfo info;
      info.name = t;
      info.dtype = l.mo_type;
      info.shape = shape;
      info.producer = static_cast<int>(i);
      blobs[t] = std::move(info);
    }
  }
  return blobs;
}

std::vector<LayerQuantizers> attach_quantizers(const GraphSpec& g) {
  std::vector<LayerQuantizers> out;
  out.reserve(g.layers.size());
  for (const LayerSpec& l : g.layers) {
    LayerQuantizers q;
    q.bottom_keys = l.bottoms;
    q.top_keys = l.tops;
    q.param_keys = param_record_names(l);
    out.push_back(std::move(q));
  }
  return out;
}

GraphSpec override_precision(const GraphSpec& g, DataType target) {
  GraphSpec out;
  out.name = g.name;
  out.inspect = g.inspect;
  out.range_aliases = g.range_aliases;

  // Pass 1: retype layers.  INPUT and the FP32-only kinds keep their
  // types; QUANTIZER output types are re-resolved in pass 2.
  std::vector<LayerSpec> staged = g.layers;
  for (LayerSpec& l : staged) {
    switch (l.kind) {
      case LayerKind::INPUT:
        break;
      case LayerKind::SOFTMAX:
      case LayerKind::LRN:
        l.mi_type = l.d_type = l.mo_type = DataType::FP32;
        break;
      case LayerKind::QUANTIZER:
        // Float boundaries stay float; quantized boundaries follow the
        // target.  mi/d are wired to the producer below.
        l.mo_type = is_float_type(l.mo_type) ? l.mo_type : target;
        break;
      default:
        l.mi_type = l.d_type = l.mo_type = target;
        break;
    }
  }

  // Pass 2: wire edges, inserting conversion layers where producer and
  // consumer types disagree.
  std::map<std::string, DataType> blob_type;
  std::map<std::string, std::map<DataType, std::string>> converted;
  for (LayerSpec& l : staged) {
    if (l.kind == LayerKind::INPUT) {
      blob_type[l.tops[0]] = l.mo_type;
      out.layers.push_back(l);
      continue;
    }
    const std::string& b = l.bottoms[0];
    const DataType have = blob_type.at(b);
    if (l.kind == LayerKind::QUANTIZER) {
      l.mi_type = l.d_type = have;
    } else if (l.mi_type != have) {
      std::string& alias = converted[b][l.mi_type];
      if (alias.empty()) {
        LayerSpec q;
        q.name = b + "_to_" + dtype_name(l.mi_type);
        q.kind = LayerKind::QUANTIZER;
        q.mi_type = q.d_type = have;
        q.mo_type = l.mi_type;
        q.bottoms = {b};
        q.tops = {b + "__" + dtype_name(l.mi_type)};
        blob_type[q.tops[0]] = q.mo_type;
        out.range_aliases[q.tops[0]] = resolve_alias(out.range_aliases, b);
        out.layers.push_back(q);
        alias = q.tops[0];
      }
      l.bottoms[0] = alias;
    }
    blob_type[l.tops[0]] = l.mo_type;
    out.layers.push_back(l);
  }
  return out;
}

}  // namespace qnet
