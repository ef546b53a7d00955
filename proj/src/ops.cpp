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

#include "qnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "qnet/quantizer.hpp"

namespace qnet {

namespace {

// Wrap a value to the Acctype width of a storage type: 32 bits for 8-bit
// elements, 64 bits for 16-bit elements.  C++20 guarantees modular
// narrowing for signed integers.
int64_t wrap_acc(int64_t v, bool acc32) {
  if (!acc32) return v;
  return static_cast<int32_t>(static_cast<uint32_t>(v));
}

// Extract channels [c0, c1) of sample n from an N x C x H x W tensor.
Tensor channel_slice(const Tensor& in, int64_t n, int64_t c0, int64_t c1) {
  const auto& s = in.shape();
  const int64_t C = s[1], H = s[2], W = s[3];
  Tensor out(in.dtype(), {c1 - c0, H, W});
  const size_t bw = byte_width(in.dtype());
  const size_t offset = static_cast<size_t>(((n * C + c0) * H * W)) * bw;
  std::memcpy(out.raw(), in.raw() + offset, out.byte_size());
  out.qvals() = in.qvals();
  return out;
}

// Quantized GEMM with four-term zero-point correction.  A is M x K, B is
// K x N, raw stored values.  Optional bias (already in the accumulator
// domain) indexes rows or columns.
Tensor quant_gemm_core(const Tensor& A, const Tensor& B, int64_t M, int64_t N,
                       int64_t K, int64_t zA, int64_t zB,
                       const RequantParams& rq, DataType out_dtype,
                       const std::vector<int64_t>* bias, bool bias_per_row) {
  std::vector<int64_t> rowsum(static_cast<size_t>(M), 0);
  std::vector<int64_t> colsum(static_cast<size_t>(N), 0);
  for (int64_t m = 0; m < M; ++m) {
    int64_t s = 0;
    for (int64_t k = 0; k < K; ++k) s += A.qget(m * K + k);
    rowsum[static_cast<size_t>(m)] = s;
  }
  for (int64_t n = 0; n < N; ++n) {
    int64_t s = 0;
    for (int64_t k = 0; k < K; ++k) s += B.qget(k * N + n);
    colsum[static_cast<size_t>(n)] = s;
  }
  const int64_t kzz = K * zA * zB;
  Tensor C(out_dtype, {M, N});
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t n = 0; n < N; ++n) {
      int64_t acc = 0;
      for (int64_t k = 0; k < K; ++k) {
        acc += A.qget(m * K + k) * B.qget(k * N + n);
      }
      acc += kzz - zA * colsum[static_cast<size_t>(n)] -
             zB * rowsum[static_cast<size_t>(m)];
      if (bias != nullptr) {
        acc += bias_per_row ? (*bias)[static_cast<size_t>(m)]
                            : (*bias)[static_cast<size_t>(n)];
      }
      C.qset(m * N + n, requant_clamp(acc, rq));
    }
  }
  return C;
}

// Bias vector converted once into the accumulator domain.
std::vector<int64_t> bias_to_acc(const Tensor& bias, double scale_a,
                                 double scale_b) {
  std::vector<int64_t> out(static_cast<size_t>(bias.count()));
  for (int64_t i = 0; i < bias.count(); ++i) {
    out[static_cast<size_t>(i)] = static_cast<int64_t>(
        round_half_even(bias.fget(i) / (scale_a * scale_b)));
  }
  return out;
}

struct ConvGeometry {
  int64_t batch, in_c, in_h, in_w;
  int64_t out_c, out_h, out_w;
  int64_t group_in, group_out, patch;
};

ConvGeometry conv_geometry(const Tensor& in, const Tensor& weight,
                           const ConvParams& cp) {
  if (in.shape().size() != 4 || weight.shape().size() != 4) {
    throw std::invalid_argument("shape mismatch");
  }
  ConvGeometry g;
  g.batch = in.shape()[0];
  g.in_c = in.shape()[1];
  g.in_h = in.shape()[2];
  g.in_w = in.shape()[3];
  g.out_c = cp.out_channels;
  if (cp.groups < 1 || g.in_c % cp.groups != 0 || g.out_c % cp.groups != 0) {
    throw std::invalid_argument("group divisibility violation");
  }
  g.group_in = g.in_c / cp.groups;
  g.group_out = g.out_c / cp.groups;
  if (weight.shape()[0] != g.out_c || weight.shape()[1] != g.group_in ||
      weight.shape()[2] != cp.kernel_h || weight.shape()[3] != cp.kernel_w) {
    throw std::invalid_argument("shape mismatch");
  }
  g.out_h = (g.in_h + 2 * cp.pad_h - cp.kernel_h) / cp.stride_h + 1;
  g.out_w = (g.in_w + 2 * cp.pad_w - cp.kernel_w) / cp.stride_w + 1;
  if (g.out_h < 1 || g.out_w < 1) {
    throw std::invalid_argument("non-positive output extent");
  }
  g.patch = g.group_in * cp.kernel_h * cp.kernel_w;
  return g;
}

}  // namespace

Tensor cast_float(const Tensor& t, DataType target) {
  if (!is_float_type(t.dtype()) || !is_float_type(target)) {
    throw std::invalid_argument("cast_float requires float types");
  }
  if (t.dtype() == target) return t;
  Tensor out(target, t.shape());
  for (int64_t i = 0; i < t.count(); ++i) out.fset(i, t.fget(i));
  return out;
}

Tensor relu_float(const Tensor& in, float negative_slope) {
  Tensor out(in.dtype(), in.shape());
  for (int64_t i = 0; i < in.count(); ++i) {
    const float x = in.fget(i);
    out.fset(i, x > 0.0f ? x : x * negative_slope);
  }
  return out;
}

Tensor relu_quant(const Tensor& in, const RequantParams& rq) {
  if (!is_quantized(in.dtype())) {
    throw std::invalid_argument("relu_quant requires a quantized tensor");
  }
  const bool acc32 = in.dtype() == DataType::INT8Q;
  Tensor out(in.dtype(), in.shape());
  for (int64_t i = 0; i < in.count(); ++i) {
    // Difftype: zero-point-corrected element, clipped at zero.
    const int64_t relu = std::max<int64_t>(in.qget(i) - rq.in_zero, 0);
    // Multtype product, truncating division by 2^shift_bits, narrowed to
    // the Acctype width exactly as the integer kernels do.
    int64_t reg =
        wrap_acc((relu * rq.mult) >> rq.shift_bits, acc32);
    if (rq.shift >= 0) {
      reg = wrap_acc(reg >> rq.shift, acc32);
    } else {
      reg = wrap_acc(static_cast<int64_t>(static_cast<uint64_t>(reg)
                                          << -rq.shift),
                     acc32);
    }
    const int64_t v = wrap_acc(reg + rq.out_zero, acc32);
    out.qset(i, std::clamp(v, rq.out_min, rq.out_max));
  }
  out.qvals() = in.qvals();
  return out;
}

Tensor dropout_inference(const Tensor& in) { return in; }

Tensor gemm_float(const Tensor& A, const Tensor& B, float alpha, float beta,
                  const Tensor* C) {
  if (A.shape().size() != 2 || B.shape().size() != 2 ||
      A.shape()[1] != B.shape()[0]) {
    throw std::invalid_argument("shape mismatch");
  }
  const int64_t M = A.shape()[0], K = A.shape()[1], N = B.shape()[1];
  if (C != nullptr && (C->shape().size() != 2 || C->shape()[0] != M ||
                       C->shape()[1] != N)) {
    throw std::invalid_argument("shape mismatch");
  }
  Tensor out(DataType::FP32, {M, N});
  for (int64_t m = 0; m < M; ++m) {
    for (int64_t n = 0; n < N; ++n) {
      float acc = 0.0f;
      for (int64_t k = 0; k < K; ++k) {
        acc += A.fget(m * K + k) * B.fget(k * N + n);
      }
      float v = alpha * acc;
      if (C != nullptr) v += beta * C->fget(m * N + n);
      out.fset(m * N + n, v);
    }
  }
  return out;
}

Tensor gemm_quant(const Tensor& Aq, const Tensor& Bq,
                  const QuantizerValues& qvA, const QuantizerValues& qvB,
                  const QuantizerValues& qvC, const RequantParams& rq) {
  if (Aq.shape().size() != 2 || Bq.shape().size() != 2 ||
      Aq.shape()[1] != Bq.shape()[0]) {
    throw std::invalid_argument("shape mismatch");
  }
  const int64_t M = Aq.shape()[0], K = Aq.shape()[1], N = Bq.shape()[1];
  const DataType out_dtype =
      qvC.i_max > 255 ? DataType::INT16Q : DataType::INT8Q;
  Tensor C = quant_gemm_core(Aq, Bq, M, N, K, qvA.zero, qvB.zero, rq,
                             out_dtype, nullptr, false);
  C.qvals() = qvC;
  return C;
}

Tensor im2col(const Tensor& in, const ConvParams& cp) {
  if (in.shape().size() != 3) throw std::invalid_argument("shape mismatch");
  const int64_t C = in.shape()[0], H = in.shape()[1], W = in.shape()[2];
  const int64_t oh = (H + 2 * cp.pad_h - cp.kernel_h) / cp.stride_h + 1;
  const int64_t ow = (W + 2 * cp.pad_w - cp.kernel_w) / cp.stride_w + 1;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("non-positive output extent");
  }
  const bool quant = is_quantized(in.dtype());
  const int64_t pad_q = (quant && in.qvals().has_value()) ? in.qvals()->zero : 0;
  Tensor out(in.dtype(), {C * cp.kernel_h * cp.kernel_w, oh * ow});
  out.qvals() = in.qvals();
  int64_t row = 0;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < cp.kernel_h; ++ki) {
      for (int64_t kj = 0; kj < cp.kernel_w; ++kj, ++row) {
        int64_t col = 0;
        for (int64_t oy = 0; oy < oh; ++oy) {
          for (int64_t ox = 0; ox < ow; ++ox, ++col) {
            const int64_t iy = oy * cp.stride_h - cp.pad_h + ki;
            const int64_t ix = ox * cp.stride_w - cp.pad_w + kj;
            const bool inside = iy >= 0 && iy < H && ix >= 0 && ix < W;
            const int64_t dst = row * (oh * ow) + col;
            const int64_t src = (c * H + iy) * W + ix;
            if (quant) {
              out.qset(dst, inside ? in.qget(src) : pad_q);
            } else {
              out.fset(dst, inside ? in.fget(src) : 0.0f);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor conv_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvParams& cp, const QuantizerValues* qv_out,
                    int shift_bits) {
  const ConvGeometry g = conv_geometry(in, weight, cp);
  if (bias != nullptr && bias->count() != g.out_c) {
    throw std::invalid_argument("shape mismatch");
  }
  const int64_t P = g.out_h * g.out_w;

  if (is_float_type(in.dtype())) {
    const Tensor inf = cast_float(in, DataType::FP32);
    const Tensor wf = cast_float(weight, DataType::FP32);
    Tensor out(DataType::FP32, {g.batch, g.out_c, g.out_h, g.out_w});
    for (int64_t n = 0; n < g.batch; ++n) {
      for (int64_t grp = 0; grp < cp.groups; ++grp) {
        const Tensor slice =
            channel_slice(inf, n, grp * g.group_in, (grp + 1) * g.group_in);
        const Tensor cols = im2col(slice, cp);
        for (int64_t m = 0; m < g.group_out; ++m) {
          const int64_t oc = grp * g.group_out + m;
          const float b = bias != nullptr ? bias->fget(oc) : 0.0f;
          for (int64_t p = 0; p < P; ++p) {
            float acc = 0.0f;
            for (int64_t k = 0; k < g.patch; ++k) {
              acc += wf.fget(oc * g.patch + k) * cols.fget(k * P + p);
            }
            out.fset((n * g.out_c + oc) * P + p, acc + b);
          }
        }
      }
    }
    return in.dtype() == DataType::FP16 ? cast_float(out, DataType::FP16)
                                        : out;
  }

  if (!in.qvals().has_value() || !weight.qvals().has_value() ||
      qv_out == nullptr) {
    throw std::invalid_argument("quantized conv requires quantizer values");
  }
  const QuantizerValues& qvA = *weight.qvals();
  const QuantizerValues& qvB = *in.qvals();
  const int sb = shift_bits > 0 ? shift_bits : default_shift_bits(in.dtype());
  const RequantParams rq = scale_quant_vals(qvA, qvB, *qv_out, sb);
  std::vector<int64_t> bias_acc;
  if (bias != nullptr) bias_acc = bias_to_acc(*bias, qvA.scale, qvB.scale);

  Tensor out(in.dtype(), {g.batch, g.out_c, g.out_h, g.out_w});
  out.qvals() = *qv_out;
  const size_t bw = byte_width(in.dtype());
  for (int64_t n = 0; n < g.batch; ++n) {
    for (int64_t grp = 0; grp < cp.groups; ++grp) {
      const Tensor slice =
          channel_slice(in, n, grp * g.group_in, (grp + 1) * g.group_in);
      const Tensor cols = im2col(slice, cp);
      // Weight rows for this group are contiguous: (group_out x patch).
      Tensor wslice(weight.dtype(), {g.group_out, g.patch});
      std::memcpy(wslice.raw(),
                  weight.raw() +
                      static_cast<size_t>(grp * g.group_out * g.patch) * bw,
                  wslice.byte_size());
      std::vector<int64_t> gbias;
      const std::vector<int64_t>* bias_ptr = nullptr;
      if (bias != nullptr) {
        gbias.assign(bias_acc.begin() + grp * g.group_out,
                     bias_acc.begin() + (grp + 1) * g.group_out);
        bias_ptr = &gbias;
      }
      const Tensor block =
          quant_gemm_core(wslice, cols, g.group_out, P, g.patch, qvA.zero,
                          qvB.zero, rq, in.dtype(), bias_ptr, true);
      std::memcpy(out.raw() +
                      static_cast<size_t>((n * g.out_c + grp * g.group_out) *
                                          P) *
                          bw,
                  block.raw(), block.byte_size());
    }
  }
  return out;
}

Tensor pool_max(const Tensor& in, const PoolParams& pp) {
  if (in.shape().size() != 4) throw std::invalid_argument("shape mismatch");
  const int64_t N = in.shape()[0], C = in.shape()[1], H = in.shape()[2],
                W = in.shape()[3];
  const int64_t oh = (H - pp.kernel) / pp.stride + 1;
  const int64_t ow = (W - pp.kernel) / pp.stride + 1;
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("non-positive output extent");
  }
  const bool quant = is_quantized(in.dtype());
  Tensor out(in.dtype(), {N, C, oh, ow});
  out.qvals() = in.qvals();
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      for (int64_t oy = 0; oy < oh; ++oy) {
        for (int64_t ox = 0; ox < ow; ++ox) {
          int64_t best_q = 0;
          float best_f = 0.0f;
          bool first = true;
          for (int64_t ky = 0; ky < pp.kernel; ++ky) {
            for (int64_t kx = 0; kx < pp.kernel; ++kx) {
              const int64_t iy = oy * pp.stride + ky;
              const int64_t ix = ox * pp.stride + kx;
              if (iy >= H || ix >= W) continue;
              const int64_t src = ((n * C + c) * H + iy) * W + ix;
              if (quant) {
                const int64_t v = in.qget(src);
                if (first || v > best_q) best_q = v;
              } else {
                const float v = in.fget(src);
                if (first || v > best_f) best_f = v;
              }
              first = false;
            }
          }
          const int64_t dst = ((n * C + c) * oh + oy) * ow + ox;
          if (quant) {
            out.qset(dst, best_q);
          } else {
            out.fset(dst, best_f);
          }
        }
      }
    }
  }
  return out;
}

Tensor inner_product(const Tensor& in, const Tensor& weight,
                     const Tensor* bias, int64_t out_features,
                     const QuantizerValues* qv_out, int shift_bits) {
  if (in.shape().empty()) throw std::invalid_argument("shape mismatch");
  const int64_t N = in.shape()[0];
  const int64_t K = N > 0 ? in.count() / N : 0;
  if (weight.shape().size() != 2 || weight.shape()[0] != K ||
      weight.shape()[1] != out_features) {
    throw std::invalid_argument("shape mismatch");
  }
  if (bias != nullptr && bias->count() != out_features) {
    throw std::invalid_argument("shape mismatch");
  }

  if (is_float_type(in.dtype())) {
    const Tensor inf = cast_float(in, DataType::FP32);
    const Tensor wf = cast_float(weight, DataType::FP32);
    Tensor out(DataType::FP32, {N, out_features});
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < out_features; ++o) {
        float acc = 0.0f;
        for (int64_t k = 0; k < K; ++k) {
          acc += inf.fget(n * K + k) * wf.fget(k * out_features + o);
        }
        if (bias != nullptr) acc += bias->fget(o);
        out.fset(n * out_features + o, acc);
      }
    }
    return in.dtype() == DataType::FP16 ? cast_float(out, DataType::FP16)
                                        : out;
  }

  if (!in.qvals().has_value() || !weight.qvals().has_value() ||
      qv_out == nullptr) {
    throw std::invalid_argument(
        "quantized inner product requires quantizer values");
  }
  const QuantizerValues& qvA = *in.qvals();
  const QuantizerValues& qvB = *weight.qvals();
  const int sb = shift_bits > 0 ? shift_bits : default_shift_bits(in.dtype());
  const RequantParams rq = scale_quant_vals(qvA, qvB, *qv_out, sb);
  std::vector<int64_t> bias_acc;
  const std::vector<int64_t>* bias_ptr = nullptr;
  if (bias != nullptr) {
    bias_acc = bias_to_acc(*bias, qvA.scale, qvB.scale);
    bias_ptr = &bias_acc;
  }
  Tensor out = quant_gemm_core(in, weight, N, out_features, K, qvA.zero,
                               qvB.zero, rq, in.dtype(), bias_ptr, false);
  out.qvals() = *qv_out;
  return out;
}

Tensor softmax(const Tensor& in) {
  if (in.dtype() != DataType::FP32) {
    throw std::invalid_argument("softmax requires float");
  }
  if (in.shape().empty()) throw std::invalid_argument("shape mismatch");
  const int64_t N = in.shape()[0];
  const int64_t F = N > 0 ? in.count() / N : 0;
  Tensor out(DataType::FP32, in.shape());
  for (int64_t n = 0; n < N; ++n) {
    float maxv = in.fget(n * F);
    for (int64_t f = 1; f < F; ++f) maxv = std::max(maxv, in.fget(n * F + f));
    double sum = 0.0;
    for (int64_t f = 0; f < F; ++f) {
      sum += std::exp(static_cast<double>(in.fget(n * F + f)) - maxv);
    }
    for (int64_t f = 0; f < F; ++f) {
      const double e =
          std::exp(static_cast<double>(in.fget(n * F + f)) - maxv);
      out.fset(n * F + f, static_cast<float>(e / sum));
    }
  }
  return out;
}

Tensor lrn(const Tensor& in, const LRNParams& lp) {
  if (in.dtype() != DataType::FP32) {
    throw std::invalid_argument("lrn requires float");
  }
  if (in.shape().size() < 2) throw std::invalid_argument("shape mismatch");
  const int64_t N = in.shape()[0], C = in.shape()[1];
  const int64_t S = (N > 0 && C > 0) ? in.count() / (N * C) : 0;
  const int64_t half = (lp.local_size - 1) / 2;
  Tensor out(DataType::FP32, in.shape());
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const int64_t c0 = std::max<int64_t>(0, c - half);
      const int64_t c1 = std::min<int64_t>(C - 1, c + half);
      for (int64_t s = 0; s < S; ++s) {
        double sum = 0.0;
        for (int64_t cc = c0; cc <= c1; ++cc) {
          const double v = in.fget((n * C + cc) * S + s);
          sum += v * v;
        }
        const double x = in.fget((n * C + c) * S + s);
        const double denom = std::pow(
            lp.k + (lp.alpha / static_cast<double>(lp.local_size)) * sum,
            lp.beta);
        out.fset((n * C + c) * S + s, static_cast<float>(x / denom));
      }
    }
  }
  return out;
}

}  // namespace qnet
