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

#include "qnet/net.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <utility>

#include "qnet/ops.hpp"

namespace qnet {

namespace {

// Top blob of the (first) INPUT layer of a subgraph.
const std::string& input_top(const GraphSpec& g) {
  for (const LayerSpec& l : g.layers) {
    if (l.kind == LayerKind::INPUT) return l.tops[0];
  }
  throw std::invalid_argument("missing input: " + g.name);
}

// Output selection for nested subgraphs: the (alphabetically last) sink,
// matching the choice infer_blobs makes for shape inference.
Tensor single_output(std::map<std::string, Tensor> outputs) {
  if (outputs.empty()) {
    throw std::invalid_argument("moe subgraph has no output");
  }
  return std::move(outputs.rbegin()->second);
}

std::vector<float> to_float_vector(const Tensor& t) {
  std::vector<float> v(static_cast<size_t>(t.count()));
  for (int64_t i = 0; i < t.count(); ++i) v[static_cast<size_t>(i)] = t.fget(i);
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Net::Net(GraphSpec g) : graph_(std::move(g)) {
  const ValidationReport report = validate(graph_);
  if (!report.ok()) {
    throw std::invalid_argument(report.violations.front());
  }
  blobs_ = infer_blobs(graph_);
  aliases_ = graph_.range_aliases;
  for (const LayerSpec& l : graph_.layers) {
    // Value-preserving layers keep their input's calibration statistics so
    // that bottom and top land on the same integer grid.
    if (l.kind == LayerKind::POOL || l.kind == LayerKind::DROPOUT) {
      aliases_[l.tops[0]] = resolve_range_key(l.bottoms[0]);
    }
    if (l.kind == LayerKind::MOE) {
      MoeRuntime rt;
      rt.gating = std::make_unique<Net>(*l.moe->gating_graph);
      rt.experts.reserve(static_cast<size_t>(l.moe->n_experts));
      for (int64_t k = 0; k < l.moe->n_experts; ++k) {
        rt.experts.push_back(std::make_unique<Net>(*l.moe->expert_graph));
      }
      moe_.emplace(l.name, std::move(rt));
    }
  }
}

std::string Net::resolve_range_key(const std::string& blob) const {
  std::string cur = blob;
  auto it = aliases_.find(cur);
  int hops = 0;
  while (it != aliases_.end() && hops++ < 1024) {
    cur = it->second;
    it = aliases_.find(cur);
  }
  return cur;
}

Net* Net::route(const std::string& name, std::string* local) {
  for (auto& [layer, rt] : moe_) {
    const std::string gating_prefix = layer + ".gating.";
    if (name.rfind(gating_prefix, 0) == 0) {
      *local = name.substr(gating_prefix.size());
      return rt.gating.get();
    }
    const std::string expert_prefix = layer + ".expert";
    if (name.rfind(expert_prefix, 0) == 0) {
      const size_t dot = name.find('.', expert_prefix.size());
      if (dot != std::string::npos && dot > expert_prefix.size()) {
        const std::string digits =
            name.substr(expert_prefix.size(), dot - expert_prefix.size());
        if (!digits.empty() &&
            digits.find_first_not_of("0123456789") == std::string::npos) {
          const size_t k = std::stoul(digits);
          if (k >= rt.experts.size()) {
            throw std::out_of_range("unknown expert: " + name);
          }
          *local = name.substr(dot + 1);
          return rt.experts[k].get();
        }
      }
    }
  }
  *local = name;
  return this;
}

const Net* Net::route(const std::string& name, std::string* local) const {
  return const_cast<Net*>(this)->route(name, local);
}

std::vector<std::string> Net::input_names() const {
  std::vector<std::string> names;
  for (const LayerSpec& l : graph_.layers) {
    if (l.kind == LayerKind::INPUT) names.push_back(l.tops[0]);
  }
  return names;
}

std::vector<std::string> Net::output_names() const {
  std::vector<const BlobInfo*> sinks;
  for (const auto& [name, info] : blobs_) {
    if (info.consumers.empty()) sinks.push_back(&info);
  }
  std::sort(sinks.begin(), sinks.end(),
            [](const BlobInfo* a, const BlobInfo* b) {
              return a->producer < b->producer;
            });
  std::vector<std::string> names;
  for (const BlobInfo* s : sinks) names.push_back(s->name);
  return names;
}

void Net::set_param(const std::string& name, Tensor t) {
  std::string local;
  Net* owner = route(name, &local);
  if (owner != this) {
    owner->set_param(local, std::move(t));
    return;
  }
  params_[local] = std::move(t);
}

const Tensor* Net::param(const std::string& name) const {
  std::string local;
  const Net* owner = route(name, &local);
  if (owner != this) return owner->param(local);
  auto it = params_.find(local);
  return it == params_.end() ? nullptr : &it->second;
}

const Tensor& Net::require_param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::logic_error("missing parameter: " + name);
  }
  return it->second;
}

Tensor Net::param_float(const std::string& name) const {
  const Tensor* t = param(name);
  if (t == nullptr) throw std::logic_error("missing parameter: " + name);
  if (is_quantized(t->dtype())) return dequantize(*t);
  return cast_float(*t, DataType::FP32);
}

void Net::set_range(const std::string& key, double f_min, double f_max) {
  std::string local;
  Net* owner = route(key, &local);
  if (owner != this) {
    owner->set_range(local, f_min, f_max);
    return;
  }
  ObservationState st;
  st.seen_min = f_min;
  st.seen_max = f_max;
  st.count = 1;
  ranges_[resolve_range_key(local)] = st;
}

const ObservationState* Net::range(const std::string& key) const {
  std::string local;
  const Net* owner = route(key, &local);
  if (owner != this) return owner->range(local);
  auto it = ranges_.find(resolve_range_key(local));
  return it == ranges_.end() ? nullptr : &it->second;
}

void Net::observe_blob(const std::string& blob, const Tensor& t) {
  const std::string key = resolve_range_key(blob);
  ranges_[key] = observe(ranges_[key], t);
}

void Net::finalize_quantizers() {
  // Parameters of quantized layers move onto their integer grid.  The
  // range comes from an explicit set_range on the record name when given,
  // otherwise from the values themselves.  Biases stay FP32.
  for (const LayerSpec& l : graph_.layers) {
    if ((l.kind != LayerKind::CONV && l.kind != LayerKind::INNER_PRODUCT) ||
        !is_quantized(l.d_type)) {
      continue;
    }
    const std::string wkey = l.name + ".weight";
    auto it = params_.find(wkey);
    if (it == params_.end() || it->second.dtype() != DataType::FP32) {
      continue;  // not set yet, or already converted
    }
    QuantizerValues qv;
    auto rit = ranges_.find(wkey);
    if (rit != ranges_.end() && rit->second.has_data()) {
      qv = estimate_from_observation(rit->second, l.d_type);
    } else {
      qv = estimate_from_observation(observe(ObservationState{}, it->second),
                                     l.d_type);
    }
    it->second = quantize(it->second, qv, l.d_type);
  }

  for (const auto& [name, info] : blobs_) {
    if (!is_quantized(info.dtype)) continue;
    auto rit = ranges_.find(resolve_range_key(name));
    if (rit != ranges_.end() && rit->second.has_data()) {
      blob_qv_[name] = estimate_from_observation(rit->second, info.dtype);
    }
  }

  for (auto& [layer, rt] : moe_) {
    rt.gating->finalize_quantizers();
    for (auto& e : rt.experts) e->finalize_quantizers();
  }
}

void Net::set_quant_mode(QuantMode m) {
  if (m == QuantMode::QUANTIZED || m == QuantMode::PSEUDO) {
    for (const auto& [name, info] : blobs_) {
      if (is_quantized(info.dtype) && !blob_qv_.count(name)) {
        throw std::logic_error("quantizer not finalized: " +
                               resolve_range_key(name));
      }
    }
    for (const LayerSpec& l : graph_.layers) {
      if ((l.kind != LayerKind::CONV && l.kind != LayerKind::INNER_PRODUCT) ||
          !is_quantized(l.d_type)) {
        continue;
      }
      const std::string wkey = l.name + ".weight";
      auto it = params_.find(wkey);
      if (it != params_.end() && it->second.dtype() != l.d_type) {
        throw std::logic_error("quantizer not finalized: " + wkey);
      }
    }
  }
  mode_ = m;
  for (auto& [layer, rt] : moe_) {
    rt.gating->set_quant_mode(m);
    for (auto& e : rt.experts) e->set_quant_mode(m);
  }
}

const QuantizerValues* Net::blob_qvals(const std::string& blob) const {
  auto it = blob_qv_.find(blob);
  return it == blob_qv_.end() ? nullptr : &it->second;
}

QuantizerValues Net::require_blob_qv(const std::string& blob) const {
  auto it = blob_qv_.find(blob);
  if (it == blob_qv_.end()) {
    throw std::logic_error("quantizer not finalized: " +
                           resolve_range_key(blob));
  }
  return it->second;
}

Tensor Net::take_input(const LayerSpec& l,
                       const std::map<std::string, Tensor>& inputs) const {
  auto it = inputs.find(l.tops[0]);
  if (it == inputs.end()) {
    throw std::invalid_argument("missing input: " + l.tops[0]);
  }
  const std::vector<int64_t>& got = it->second.shape();
  const std::vector<int64_t>& want = l.input_shape;
  bool ok = got.size() == want.size() && !got.empty();
  for (size_t d = 1; ok && d < want.size(); ++d) ok = got[d] == want[d];
  if (!ok) throw std::invalid_argument("shape mismatch");
  return it->second;
}

std::map<std::string, Tensor> Net::forward(
    const std::map<std::string, Tensor>& inputs) {
  std::map<std::string, Tensor> vals;
  for (const LayerSpec& l : graph_.layers) {
    const Tensor* in = nullptr;
    if (!l.bottoms.empty()) {
      auto it = vals.find(l.bottoms[0]);
      if (it == vals.end()) {
        throw std::invalid_argument("undefined blob: " + l.bottoms[0]);
      }
      in = &it->second;
    }
    Tensor out = mode_ == QuantMode::QUANTIZED
                     ? run_layer_typed(l, in, inputs)
                     : run_layer_float(l, in, inputs);
    if (mode_ == QuantMode::OBSERVE) observe_blob(l.tops[0], out);
    if (mode_ == QuantMode::PSEUDO) out = apply_pseudo(l.tops[0], std::move(out));
    vals[l.tops[0]] = std::move(out);
  }

  std::map<std::string, Tensor> result;
  for (const auto& [name, info] : blobs_) {
    if (info.consumers.empty()) result[name] = std::move(vals.at(name));
  }
  return result;
}

Tensor Net::run_layer_float(const LayerSpec& l, const Tensor* in,
                            const std::map<std::string, Tensor>& inputs) {
  switch (l.kind) {
    case LayerKind::INPUT: {
      Tensor t = take_input(l, inputs);
      if (is_quantized(t.dtype())) return dequantize(t);
      return cast_float(t, DataType::FP32);
    }
    case LayerKind::CONV: {
      Tensor w = param_float(l.name + ".weight");
      Tensor b;
      const Tensor* bp = nullptr;
      if (l.bias_term) {
        b = param_float(l.name + ".bias");
        bp = &b;
      }
      ConvParams cp = l.conv;
      cp.bias_term = l.bias_term;
      return conv_forward(*in, w, bp, cp, nullptr);
    }
    case LayerKind::POOL:
      return pool_max(*in, l.pool);
    case LayerKind::INNER_PRODUCT: {
      Tensor w = param_float(l.name + ".weight");
      Tensor b;
      const Tensor* bp = nullptr;
      if (l.bias_term) {
        b = param_float(l.name + ".bias");
        bp = &b;
      }
      return inner_product(*in, w, bp, l.num_output, nullptr);
    }
    case LayerKind::RELU:
      return relu_float(*in, l.negative_slope);
    case LayerKind::LRN:
      return lrn(*in, l.lrn);
    case LayerKind::SOFTMAX:
      return softmax(*in);
    case LayerKind::QUANTIZER:
    case LayerKind::DROPOUT:
      return *in;  // numeric no-op in float execution
    case LayerKind::MOE:
      return run_moe(l, *in);
  }
  throw std::logic_error("unreachable layer kind");
}

Tensor Net::apply_pseudo(const std::string& blob, Tensor t) const {
  const DataType declared = blobs_.at(blob).dtype;
  switch (declared) {
    case DataType::FP32:
      return t;
    case DataType::FP16:
      return cast_float(cast_float(t, DataType::FP16), DataType::FP32);
    default:
      return pseudo_quantize(t, require_blob_qv(blob), declared);
  }
}

Tensor Net::run_layer_typed(const LayerSpec& l, const Tensor* in,
                            const std::map<std::string, Tensor>& inputs) {
  switch (l.kind) {
    case LayerKind::INPUT: {
      Tensor t = take_input(l, inputs);
      const DataType want = l.mo_type;
      if (t.dtype() == want) {
        if (is_quantized(want)) t.qvals() = require_blob_qv(l.tops[0]);
        return t;
      }
      if (is_float_type(t.dtype()) && is_float_type(want)) {
        return cast_float(t, want);
      }
      throw std::invalid_argument("dtype mismatch at blob " + l.tops[0]);
    }
    case LayerKind::CONV:
    case LayerKind::INNER_PRODUCT: {
      const std::string wkey = l.name + ".weight";
      Tensor b;
      const Tensor* bp = nullptr;
      if (is_quantized(l.d_type)) {
        const Tensor& w = require_param(wkey);
        if (w.dtype() != l.d_type) {
          throw std::logic_error("quantizer not finalized: " + wkey);
        }
        if (l.bias_term) {
          b = require_param(l.name + ".bias");
          bp = &b;
        }
        const QuantizerValues qv_out = require_blob_qv(l.tops[0]);
        Tensor out;
        if (l.kind == LayerKind::CONV) {
          ConvParams cp = l.conv;
          cp.bias_term = l.bias_term;
          out = conv_forward(*in, w, bp, cp, &qv_out);
        } else {
          out = inner_product(*in, w, bp, l.num_output, &qv_out);
        }
        out.qvals() = qv_out;
        return out;
      }
      // Float path; FP16 layers compute widened to FP32 and narrow once.
      Tensor w = param_float(wkey);
      if (l.bias_term) {
        b = param_float(l.name + ".bias");
        bp = &b;
      }
      const Tensor in32 = cast_float(*in, DataType::FP32);
      Tensor out;
      if (l.kind == LayerKind::CONV) {
        ConvParams cp = l.conv;
        cp.bias_term = l.bias_term;
        out = conv_forward(in32, w, bp, cp, nullptr);
      } else {
        out = inner_product(in32, w, bp, l.num_output, nullptr);
      }
      return cast_float(out, l.mo_type);
    }
    case LayerKind::POOL: {
      Tensor out = pool_max(*in, l.pool);
      if (is_quantized(l.mo_type)) out.qvals() = require_blob_qv(l.tops[0]);
      return out;
    }
    case LayerKind::RELU: {
      if (is_quantized(l.d_type)) {
        QuantizerValues qv_in = in->qvals() ? *in->qvals()
                                            : require_blob_qv(l.bottoms[0]);
        const QuantizerValues qv_out = require_blob_qv(l.tops[0]);
        const RequantParams rq =
            scale_quant_vals(qv_in, qv_out, default_shift_bits(l.d_type));
        Tensor out = relu_quant(*in, rq);
        out.qvals() = qv_out;
        return out;
      }
      return relu_float(*in, l.negative_slope);
    }
    case LayerKind::LRN:
      return lrn(*in, l.lrn);
    case LayerKind::SOFTMAX:
      return softmax(*in);
    case LayerKind::DROPOUT:
      return *in;
    case LayerKind::QUANTIZER: {
      const DataType to = l.mo_type;
      const bool in_q = is_quantized(l.mi_type);
      const bool out_q = is_quantized(to);
      if (!in_q && !out_q) return cast_float(*in, to);
      if (!in_q && out_q) {
        return quantize(cast_float(*in, DataType::FP32),
                        require_blob_qv(l.tops[0]), to);
      }
      if (in_q && !out_q) return cast_float(dequantize(*in), to);
      const QuantizerValues qv_in =
          in->qvals() ? *in->qvals() : require_blob_qv(l.bottoms[0]);
      const QuantizerValues qv_out = require_blob_qv(l.tops[0]);
      const RequantParams rq =
          scale_quant_vals(qv_in, qv_out, default_shift_bits(to));
      Tensor out(to, in->shape());
      for (int64_t i = 0; i < in->count(); ++i) {
        out.qset(i, requant_clamp(in->qget(i) - rq.in_zero, rq));
      }
      out.qvals() = qv_out;
      return out;
    }
    case LayerKind::MOE: {
      const Tensor f32 = is_quantized(in->dtype())
                             ? dequantize(*in)
                             : cast_float(*in, DataType::FP32);
      Tensor out32 = run_moe(l, f32);
      if (l.mo_type == DataType::FP32) return out32;
      if (l.mo_type == DataType::FP16) {
        return cast_float(out32, DataType::FP16);
      }
      return quantize(out32, require_blob_qv(l.tops[0]), l.mo_type);
    }
  }
  throw std::logic_error("unreachable layer kind");
}

Tensor Net::run_moe(const LayerSpec& l, const Tensor& in_fp32) {
  MoeRuntime& rt = moe_.at(l.name);
  GatingParams gp;
  gp.n_experts = l.moe->n_experts;
  gp.top_k = l.moe->top_k;
  gp.noise_enabled = l.moe->noise_enabled;
  gp.seed = l.moe->seed;

  const Tensor& ga = require_param(l.name + ".gate_a");
  const Tensor& gb = require_param(l.name + ".gate_b");
  const Tensor& gc = require_param(l.name + ".gate_c");
  if (ga.shape().size() != 2 || ga.shape()[0] != gp.n_experts) {
    throw std::invalid_argument("dimension mismatch");
  }
  gp.feature_dim = ga.shape()[1];
  gp.w_a = to_float_vector(ga);
  gp.w_b = to_float_vector(gb);
  gp.w_c = to_float_vector(gc);

  const std::string gate_in = input_top(rt.gating->graph());
  const std::string expert_in = input_top(*l.moe->expert_graph);

  BatchFn gating_fn = [&rt, &gate_in](const Tensor& x) {
    return single_output(rt.gating->forward({{gate_in, x}}));
  };
  std::vector<BatchFn> expert_fns;
  expert_fns.reserve(rt.experts.size());
  for (auto& e : rt.experts) {
    Net* net = e.get();
    expert_fns.push_back([net, &expert_in](const Tensor& x) {
      return single_output(net->forward({{expert_in, x}}));
    });
  }
  return moe_forward(in_fp32, l.moe->batch_mode, gp, gating_fn, expert_fns);
}

Model Net::to_model() const {
  Model m;
  auto append_nested = [&m](const std::string& prefix, Model sub) {
    for (ParamRecord& r : sub.records) {
      if (r.name.rfind("blob:", 0) == 0) {
        r.name = "blob:" + prefix + r.name.substr(5);
      } else {
        r.name = prefix + r.name;
      }
      m.records.push_back(std::move(r));
    }
  };

  for (const LayerSpec& l : graph_.layers) {
    for (const std::string& name : param_record_names(l)) {
      auto it = params_.find(name);
      if (it == params_.end()) continue;
      const Tensor* t = &it->second;
      Tensor narrowed;
      const bool is_weight = ends_with(name, ".weight");
      if (is_weight && is_quantized(l.d_type) && t->dtype() != l.d_type) {
        throw std::logic_error("quantizer not finalized: " + name);
      }
      if (is_weight && l.d_type == DataType::FP16 &&
          t->dtype() == DataType::FP32) {
        narrowed = cast_float(*t, DataType::FP16);
        t = &narrowed;
      }
      ParamRecord r;
      r.name = name;
      r.dtype = t->dtype();
      r.extents = t->shape();
      r.payload.assign(t->raw(), t->raw() + t->byte_size());
      if (t->qvals()) set_record_qvals(&r, *t->qvals());
      m.records.push_back(std::move(r));
    }
    if (l.kind == LayerKind::MOE) {
      const MoeRuntime& rt = moe_.at(l.name);
      append_nested(l.name + ".gating.", rt.gating->to_model());
      for (size_t k = 0; k < rt.experts.size(); ++k) {
        append_nested(l.name + ".expert" + std::to_string(k) + ".",
                      rt.experts[k]->to_model());
      }
    }
  }

  for (const auto& [key, st] : ranges_) {
    if (!st.has_data()) continue;
    ParamRecord r;
    r.name = "blob:" + key;
    r.dtype = DataType::FP32;
    r.extents = {0};
    r.f_min = static_cast<float>(st.seen_min);
    r.f_max = static_cast<float>(st.seen_max);
    m.records.push_back(std::move(r));
  }
  return m;
}

void Net::load_weights(const Model& m) {
  for (const ParamRecord& r : m.records) {
    if (r.name.rfind("blob:", 0) == 0) {
      set_range(r.name.substr(5), r.f_min, r.f_max);
      continue;
    }
    Tensor t(r.dtype, r.extents);
    if (t.byte_size() != r.payload.size()) {
      throw std::runtime_error("truncated model file");
    }
    std::memcpy(t.raw(), r.payload.data(), r.payload.size());
    if (r.scale > 0.0f) t.qvals() = record_qvals(r);
    set_param(r.name, std::move(t));
  }
}

}  // namespace qnet
