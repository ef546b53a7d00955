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

#include "qnet/moe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace qnet {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// SplitMix64 finalizer step.
uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Tensor sample_slice(const Tensor& batch, int64_t s) {
  const int64_t B = batch.shape()[0];
  const int64_t per = batch.count() / B;
  std::vector<int64_t> shape = batch.shape();
  shape[0] = 1;
  Tensor out(DataType::FP32, shape);
  std::memcpy(out.raw(), batch.raw() + static_cast<size_t>(s * per) * 4,
              static_cast<size_t>(per) * 4);
  return out;
}

}  // namespace

float gating_noise(uint64_t seed, int64_t sample, int64_t expert, int stream) {
  // Counter-based keying: mix each coordinate in turn, then run a
  // Box-Muller transform on two lanes of the final word stream.
  uint64_t state = seed;
  (void)splitmix64(state);
  state ^= 0x632BE59BD9B4E019ull * static_cast<uint64_t>(sample + 1);
  (void)splitmix64(state);
  state ^= 0x9E6C63D0876A9A35ull * static_cast<uint64_t>(expert + 1);
  (void)splitmix64(state);
  state ^= 0xC2B2AE3D27D4EB4Full * static_cast<uint64_t>(stream + 1);
  const uint64_t a = splitmix64(state);
  const uint64_t b = splitmix64(state);
  // u1 in (0, 1], u2 in [0, 1).
  const double u1 =
      (static_cast<double>(a >> 11) + 1.0) / 9007199254740993.0;
  const double u2 = static_cast<double>(b >> 11) / 9007199254740992.0;
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  return static_cast<float>(z);
}

std::vector<float> gating_logits(const std::vector<float>& x,
                                 const GatingParams& gp,
                                 int64_t sample_index) {
  const int64_t N = gp.n_experts;
  const int64_t D = gp.feature_dim;
  if (static_cast<int64_t>(x.size()) != D ||
      static_cast<int64_t>(gp.w_a.size()) != N * D ||
      static_cast<int64_t>(gp.w_b.size()) != N * D ||
      static_cast<int64_t>(gp.w_c.size()) != N) {
    throw std::invalid_argument("dimension mismatch");
  }
  std::vector<float> z(static_cast<size_t>(N));
  for (int64_t i = 0; i < N; ++i) {
    float dot_a = 0.0f, dot_b = 0.0f;
    for (int64_t d = 0; d < D; ++d) {
      dot_a += gp.w_a[static_cast<size_t>(i * D + d)] * x[static_cast<size_t>(d)];
      dot_b += gp.w_b[static_cast<size_t>(i * D + d)] * x[static_cast<size_t>(d)];
    }
    float e1 = 0.0f, e2 = 0.0f;
    if (gp.noise_enabled) {
      e1 = gating_noise(gp.seed, sample_index, i, 0);
      e2 = 10.0f * gating_noise(gp.seed, sample_index, i, 1);
    }
    z[static_cast<size_t>(i)] = dot_a + dot_b * e1 + gp.w_c[static_cast<size_t>(i)] * e2;
  }
  // Shift only when activations approach the exp overflow region, so small
  // hand-computable cases keep their exact values.
  float zmax = z[0];
  for (float v : z) zmax = std::max(zmax, v);
  const float shift = std::max(0.0f, zmax - 80.0f);
  std::vector<float> q(static_cast<size_t>(N));
  for (int64_t i = 0; i < N; ++i) {
    q[static_cast<size_t>(i)] = std::exp(z[static_cast<size_t>(i)] - shift);
  }
  return q;
}

std::vector<float> gating_probs(const std::vector<float>& q) {
  double sum = 0.0;
  for (float v : q) {
    if (!(v >= 0.0f) || !std::isfinite(v)) {
      throw std::invalid_argument("degenerate gating");
    }
    sum += v;
  }
  if (sum <= 0.0) throw std::invalid_argument("degenerate gating");
  std::vector<float> p(q.size());
  for (size_t i = 0; i < q.size(); ++i) {
    p[i] = static_cast<float>(q[i] / sum);
  }
  return p;
}

ExpertSelection select_topk(const std::vector<float>& p, int64_t k) {
  const int64_t N = static_cast<int64_t>(p.size());
  if (k < 1 || k > N) throw std::invalid_argument("top_k out of range");
  std::vector<int64_t> order(static_cast<size_t>(N));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return p[static_cast<size_t>(a)] > p[static_cast<size_t>(b)];
  });
  ExpertSelection sel;
  sel.indices.assign(order.begin(), order.begin() + k);
  double sum = 0.0;
  for (int64_t idx : sel.indices) sum += p[static_cast<size_t>(idx)];
  sel.weights.resize(static_cast<size_t>(k));
  for (int64_t i = 0; i < k; ++i) {
    sel.weights[static_cast<size_t>(i)] =
        static_cast<float>(p[static_cast<size_t>(sel.indices[static_cast<size_t>(i)])] / sum);
  }
  return sel;
}

double load_balance_loss(const std::vector<int64_t>& counts, int64_t n_experts,
                         int64_t top_k, int64_t batch) {
  if (static_cast<int64_t>(counts.size()) != n_experts) {
    throw std::invalid_argument("dimension mismatch");
  }
  int64_t total = 0;
  for (int64_t c : counts) total += c;
  if (total != top_k * batch) {
    throw std::invalid_argument("inconsistent usage counts");
  }
  const double target = static_cast<double>(top_k) / static_cast<double>(n_experts);
  double sum = 0.0;
  for (int64_t c : counts) {
    const double d = target - static_cast<double>(c) / static_cast<double>(batch);
    sum += d * d;
  }
  return sum / static_cast<double>(n_experts);
}

Tensor moe_forward(const Tensor& input, MoeBatchMode mode,
                   const GatingParams& gp, const BatchFn& gating_fn,
                   const std::vector<BatchFn>& expert_fns) {
  if (input.dtype() != DataType::FP32 || input.shape().empty()) {
    throw std::invalid_argument("moe_forward requires an FP32 batch");
  }
  if (static_cast<int64_t>(expert_fns.size()) != gp.n_experts) {
    throw std::invalid_argument("dimension mismatch");
  }
  const int64_t B = input.shape()[0];

  // Gating features for the whole batch, then a per-sample selection.
  const Tensor feats = gating_fn(input);
  if (feats.dtype() != DataType::FP32 || feats.shape().empty() ||
      feats.shape()[0] != B || feats.count() / B != gp.feature_dim) {
    throw std::invalid_argument("dimension mismatch");
  }
  std::vector<ExpertSelection> selection(static_cast<size_t>(B));
  for (int64_t s = 0; s < B; ++s) {
    std::vector<float> x(static_cast<size_t>(gp.feature_dim));
    for (int64_t d = 0; d < gp.feature_dim; ++d) {
      x[static_cast<size_t>(d)] = feats.fget(s * gp.feature_dim + d);
    }
    const std::vector<float> q = gating_logits(x, gp, s);
    const std::vector<float> p = gating_probs(q);
    selection[static_cast<size_t>(s)] = select_topk(p, gp.top_k);
  }

  Tensor out;
  int64_t per = 0;

  if (mode == MoeBatchMode::ALL_EXPERTS) {
    // Every expert over the whole batch, mixed per sample afterwards.
    std::vector<Tensor> expert_out(static_cast<size_t>(gp.n_experts));
    for (int64_t i = 0; i < gp.n_experts; ++i) {
      expert_out[static_cast<size_t>(i)] = expert_fns[static_cast<size_t>(i)](input);
      if (expert_out[static_cast<size_t>(i)].shape() !=
          expert_out[0].shape()) {
        throw std::invalid_argument("expert output shape mismatch");
      }
    }
    out = Tensor(DataType::FP32, expert_out[0].shape());
    per = out.count() / B;
    for (int64_t s = 0; s < B; ++s) {
      const ExpertSelection& sel = selection[static_cast<size_t>(s)];
      for (int64_t j = 0; j < per; ++j) {
        float acc = 0.0f;
        for (size_t k = 0; k < sel.indices.size(); ++k) {
          acc += sel.weights[k] *
                 expert_out[static_cast<size_t>(sel.indices[k])].fget(s * per + j);
        }
        out.fset(s * per + j, acc);
      }
    }
    return out;
  }

  // PER_SAMPLE: run only the selected experts, one sample at a time.  The
  // mixing loop accumulates in selection order, matching ALL_EXPERTS.
  for (int64_t s = 0; s < B; ++s) {
    const ExpertSelection& sel = selection[static_cast<size_t>(s)];
    const Tensor single = sample_slice(input, s);
    std::vector<Tensor> outs(sel.indices.size());
    for (size_t k = 0; k < sel.indices.size(); ++k) {
      outs[k] = expert_fns[static_cast<size_t>(sel.indices[k])](single);
      if (outs[k].shape() != outs[0].shape()) {
        throw std::invalid_argument("expert output shape mismatch");
      }
    }
    if (s == 0) {
      std::vector<int64_t> shape = outs[0].shape();
      shape[0] = B;
      out = Tensor(DataType::FP32, shape);
      per = out.count() / B;
    }
    if (outs[0].count() != per) {
      throw std::invalid_argument("expert output shape mismatch");
    }
    for (int64_t j = 0; j < per; ++j) {
      float acc = 0.0f;
      for (size_t k = 0; k < sel.indices.size(); ++k) {
        acc += sel.weights[k] * outs[k].fget(j);
      }
      out.fset(s * per + j, acc);
    }
  }
  return out;
}

}  // namespace qnet
