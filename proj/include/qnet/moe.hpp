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

#ifndef QNET_MOE_HPP_
#define QNET_MOE_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "qnet/tensor.hpp"

namespace qnet {

// Expert dispatch granularity.  PER_SAMPLE runs only the selected experts
// on individual samples; ALL_EXPERTS runs every expert on the whole batch
// and mixes afterwards.  The two produce bit-identical results.
enum class MoeBatchMode : uint8_t {
  PER_SAMPLE = 0,
  ALL_EXPERTS = 1,
};

// Noisy-gating parameters: N experts over D gating features.
//   q_i = exp(Wa_i.x + Wb_i.x * N(0,1) + Wc_i * N(0,10))
// Noise draws are keyed by (seed, sample, expert) so batch decomposition
// cannot change them.
struct GatingParams {
  int64_t n_experts = 0;
  int64_t top_k = 1;
  int64_t feature_dim = 0;
  std::vector<float> w_a;  // N x D, row-major
  std::vector<float> w_b;  // N x D, row-major
  std::vector<float> w_c;  // N
  bool noise_enabled = false;
  uint64_t seed = 0;
};

// Per-sample selection: K distinct expert indices with weights that are
// non-negative and sum to one.
struct ExpertSelection {
  std::vector<int64_t> indices;
  std::vector<float> weights;
};

// Deterministic standard-normal draw for the gating noise, keyed by
// (seed, sample, expert, stream).  stream 0 feeds the multiplicative
// N(0,1) term, stream 1 the additive N(0,10) term (before the x10).
float gating_noise(uint64_t seed, int64_t sample, int64_t expert, int stream);

// Unnormalized gating activations q for one sample.  FP32 arithmetic with
// max-subtraction before exp for overflow safety.
std::vector<float> gating_logits(const std::vector<float>& x,
                                 const GatingParams& gp, int64_t sample_index);

// p_i = q_i / sum(q).  Throws "degenerate gating" when all q are zero.
std::vector<float> gating_probs(const std::vector<float>& q);

// Indices of the K largest probabilities (ties to the lower index) with
// weights renormalized to sum to one.
ExpertSelection select_topk(const std::vector<float>& p, int64_t k);

// Load-balance regularization metric over expert usage counts:
//   l2 = (1/N) * sum_i (K/N - c_i/B)^2
// Throws "inconsistent usage counts" unless sum(c) = K*B.
double load_balance_loss(const std::vector<int64_t>& counts, int64_t n_experts,
                         int64_t top_k, int64_t batch);

// Subgraph executors: a batch tensor in, a batch tensor out.  The runtime
// binds these to nested network instances; tests may pass plain lambdas.
using BatchFn = std::function<Tensor(const Tensor&)>;

// Mixture-of-experts forward pass over an FP32 batch: gating subgraph →
// logits → probabilities → top-K selection → weighted expert mix.
Tensor moe_forward(const Tensor& input, MoeBatchMode mode,
                   const GatingParams& gp, const BatchFn& gating_fn,
                   const std::vector<BatchFn>& expert_fns);

}  // namespace qnet

#endif  // QNET_MOE_HPP_
