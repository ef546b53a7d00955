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

#ifndef QNET_NET_HPP_
#define QNET_NET_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qnet/graph.hpp"
#include "qnet/model_store.hpp"
#include "qnet/quantizer.hpp"
#include "qnet/tensor.hpp"

namespace qnet {

// Executable network: a validated graph plus parameters, range
// observations and quantizer state.
//
// Parameter and range names for nested MOE subnetworks are addressed
// through dotted prefixes: "<layer>.gating.<name>" for the gating network
// and "<layer>.expert<k>.<name>" for the k-th expert instance.  The MOE
// gate matrices live on the parent as "<layer>.gate_a", ".gate_b" and
// ".gate_c".
//
// Calibration ranges are keyed by blob name; blobs listed in the graph's
// range_aliases (and the tops of value-preserving layers: POOL, DROPOUT)
// share the statistics of the blob they alias.
class Net {
 public:
  // Validates the graph; throws std::invalid_argument carrying the first
  // violation if it does not pass.
  explicit Net(GraphSpec g);

  const GraphSpec& graph() const { return graph_; }
  QuantMode mode() const { return mode_; }

  std::vector<std::string> input_names() const;
  std::vector<std::string> output_names() const;

  // Parameters.  Tensors are stored as given; finalize_quantizers converts
  // FP32 weights of quantized layers to their storage type (biases always
  // stay FP32).
  void set_param(const std::string& name, Tensor t);
  const Tensor* param(const std::string& name) const;
  // FP32 view of a parameter (dequantized if stored quantized).
  Tensor param_float(const std::string& name) const;

  // Replaces the observation for a range key with the explicit interval.
  void set_range(const std::string& key, double f_min, double f_max);
  const ObservationState* range(const std::string& key) const;

  // Derives QuantizerValues for every quantized blob from the recorded
  // ranges and quantizes the parameters of quantized layers.  Keys without
  // data are left unfinalized; set_quant_mode reports them.
  void finalize_quantizers();

  // Switches the execution mode.  QUANTIZED and PSEUDO require every
  // quantized blob's quantizer to be finalized and throw
  // std::logic_error("quantizer not finalized: <key>") naming the first
  // missing one.
  void set_quant_mode(QuantMode m);

  // Quantizer values attached to a blob by finalize_quantizers, or nullptr.
  const QuantizerValues* blob_qvals(const std::string& blob) const;

  // Runs the network.  `inputs` maps INPUT layer top names to tensors; the
  // leading (batch) extent may differ from the declared shape.  Returns
  // the sink blobs (no consumers) by name.
  std::map<std::string, Tensor> forward(
      const std::map<std::string, Tensor>& inputs);

  // Serialization to the model store: parameter records in layer order
  // (nested records with dotted prefixes), then one "blob:<key>" range
  // record per observed range key.
  Model to_model() const;
  void load_weights(const Model& m);

 private:
  struct MoeRuntime {
    std::unique_ptr<Net> gating;
    std::vector<std::unique_ptr<Net>> experts;
  };

  std::string resolve_range_key(const std::string& blob) const;
  // Splits a dotted nested name; returns the owning net (possibly this)
  // and the local remainder.
  Net* route(const std::string& name, std::string* local);
  const Net* route(const std::string& name, std::string* local) const;

  void observe_blob(const std::string& blob, const Tensor& t);
  Tensor apply_pseudo(const std::string& blob, Tensor t) const;
  Tensor run_layer_float(const LayerSpec& l, const Tensor* in,
                         const std::map<std::string, Tensor>& inputs);
  Tensor run_layer_typed(const LayerSpec& l, const Tensor* in,
                         const std::map<std::string, Tensor>& inputs);
  Tensor run_moe(const LayerSpec& l, const Tensor& in_fp32);
  Tensor take_input(const LayerSpec& l,
                    const std::map<std::string, Tensor>& inputs) const;
  const Tensor& require_param(const std::string& name) const;
  QuantizerValues require_blob_qv(const std::string& blob) const;

  GraphSpec graph_;
  std::map<std::string, BlobInfo> blobs_;
  std::map<std::string, std::string> aliases_;
  std::map<std::string, Tensor> params_;
  std::map<std::string, ObservationState> ranges_;
  std::map<std::string, QuantizerValues> blob_qv_;
  std::map<std::string, MoeRuntime> moe_;
  QuantMode mode_ = QuantMode::PASSIVE;
};

}  // namespace qnet

#endif  // QNET_NET_HPP_
