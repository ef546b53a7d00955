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

#ifndef QNET_GRAPH_HPP_
#define QNET_GRAPH_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qnet/datatypes.hpp"
#include "qnet/moe.hpp"
#include "qnet/ops.hpp"

namespace qnet {

enum class LayerKind : uint8_t {
  INPUT = 0,
  CONV = 1,
  POOL = 2,
  INNER_PRODUCT = 3,
  RELU = 4,
  LRN = 5,
  SOFTMAX = 6,
  QUANTIZER = 7,
  DROPOUT = 8,
  MOE = 9,
};

const char* layer_kind_name(LayerKind k);
std::optional<LayerKind> layer_kind_from_name(std::string_view name);

struct GraphSpec;

// Mixture-of-experts layer parameters: nested gating and expert subgraphs
// plus selection settings.  The expert subgraph is a template instantiated
// n_experts times with independent weights.
struct MoeLayerParams {
  int64_t n_experts = 0;
  int64_t top_k = 1;
  MoeBatchMode batch_mode = MoeBatchMode::PER_SAMPLE;
  bool noise_enabled = false;
  uint64_t seed = 0;
  std::shared_ptr<GraphSpec> gating_graph;
  std::shared_ptr<GraphSpec> expert_graph;
};

// One layer of a network: operator kind, the three data types (bottom
// input MItype, internal compute Dtype, top output MOtype), blob wiring,
// and kind-specific parameters.  For every kind except QUANTIZER and MOE
// the three types must be equal; QUANTIZER and MOE may change type between
// bottom and top but compute at the bottom type (d = mi).
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::INPUT;
  DataType mi_type = DataType::FP32;
  DataType d_type = DataType::FP32;
  DataType mo_type = DataType::FP32;
  std::vector<std::string> bottoms;
  std::vector<std::string> tops;

  // Kind-specific parameters (only the relevant ones are read).
  std::vector<int64_t> input_shape;  // INPUT
  ConvParams conv;                   // CONV
  PoolParams pool;                   // POOL
  LRNParams lrn;                     // LRN
  float negative_slope = 0.0f;       // RELU
  int64_t num_output = 0;            // INNER_PRODUCT
  bool bias_term = true;             // CONV, INNER_PRODUCT
  std::shared_ptr<MoeLayerParams> moe;  // MOE
};

// A network: ordered layers (declaration order is the topological order),
// plus blobs marked for inspection (excluded from memory reuse) and range
// aliases (blobs that share calibration statistics with another blob, used
// by automatically inserted quantizer layers).
struct GraphSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::vector<std::string> inspect;
  std::map<std::string, std::string> range_aliases;
};

// Blob metadata derived from a valid graph.
struct BlobInfo {
  std::string name;
  DataType dtype = DataType::FP32;
  std::vector<int64_t> shape;
  int producer = -1;
  std::vector<int> consumers;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Structural and type validation.  Collects every violation instead of
// stopping at the first.
ValidationReport validate(const GraphSpec& g);

// Blob table (dtype, shape, producer, consumers) for a valid graph.
// Throws on graphs validate would reject.
std::map<std::string, BlobInfo> infer_blobs(const GraphSpec& g);

// Quantizer placement: one quantizer per bottom blob, per top blob and per
// parameter set of each layer.  Keys name the observation statistics the
// runtime maintains (blob name, or "<layer>.<param>" for parameters).
struct LayerQuantizers {
  std::vector<std::string> bottom_keys;
  std::vector<std::string> top_keys;
  std::vector<std::string> param_keys;
};

std::vector<LayerQuantizers> attach_quantizers(const GraphSpec& g);

// Parameter record names owned by a layer ("<layer>.weight",
// "<layer>.bias", MOE gate matrices), in storage order.
std::vector<std::string> param_record_names(const LayerSpec& layer);

// Rewrite a graph for a target precision: compute layers switch to the
// target type, FP32-only layers (softmax, LRN) and INPUT keep FP32, and
// QUANTIZER layers are inserted wherever producer/consumer types disagree.
// Inserted blobs alias the calibration range of the blob they convert.
GraphSpec override_precision(const GraphSpec& g, DataType target);

}  // namespace qnet

#endif  // QNET_GRAPH_HPP_
