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

#ifndef QNET_OPS_HPP_
#define QNET_OPS_HPP_

#include <cstdint>
#include <vector>

#include "qnet/quantizer_values.hpp"
#include "qnet/tensor.hpp"

namespace qnet {

// Layer hyper-parameters.  These mirror the graph schema and are shared by
// the reference operators and the runtime.

struct ConvParams {
  int64_t out_channels = 0;
  int64_t kernel_h = 1;
  int64_t kernel_w = 1;
  int64_t stride_h = 1;
  int64_t stride_w = 1;
  int64_t pad_h = 0;
  int64_t pad_w = 0;
  int64_t groups = 1;
  bool bias_term = true;
};

struct PoolParams {
  int64_t kernel = 2;
  int64_t stride = 2;
};

struct LRNParams {
  int64_t local_size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double k = 1.0;
};

// Convert between the float storage types (FP32 <-> FP16).  Identity when
// the tensor already has the target type.
Tensor cast_float(const Tensor& t, DataType target);

// --- Elementwise -----------------------------------------------------------

// Leaky rectifier on float tensors (FP32 or FP16).
Tensor relu_float(const Tensor& in, float negative_slope);

// Rectifier on quantized tensors.  Follows the integer kernel semantics
// exactly: d = max(in - in_zero, 0); acc = (d * mult) / 2^shift_bits with
// truncating division in the wide Multtype; acc shifted by `shift` in the
// Acctype width; out = clamp(acc + out_zero, out_min, out_max).
Tensor relu_quant(const Tensor& in, const RequantParams& rq);

// Inference-time dropout: identity.
Tensor dropout_inference(const Tensor& in);

// --- GEMM ------------------------------------------------------------------

// C <- alpha * A * B + beta * C on FP32 tensors.  A is M x K, B is K x N.
// Pass C = nullptr for beta = 0.
Tensor gemm_float(const Tensor& A, const Tensor& B, float alpha, float beta,
                  const Tensor* C);

// Quantized GEMM using the rearranged four-term accumulation
//   acc = sum(aq*bq) - zA*sum(bq) - zB*sum(aq) + K*zA*zB
// so that the inner multiplications run on raw stored values.  The
// accumulator is then rescaled with rq, shifted by the output zero point
// and clamped.  The output type is qvC's integer grid.
Tensor gemm_quant(const Tensor& Aq, const Tensor& Bq,
                  const QuantizerValues& qvA, const QuantizerValues& qvB,
                  const QuantizerValues& qvC, const RequantParams& rq);

// --- Convolution -----------------------------------------------------------

// Lower one sample (C x H x W) to a (C*kh*kw) x (out_h*out_w) column
// matrix.  Padding positions take the value that represents real zero:
// the zero point for quantized tensors, 0.0 for float tensors.
Tensor im2col(const Tensor& in, const ConvParams& cp);

// Forward convolution on an N x C x H x W tensor via im2col + GEMM, per
// group and per sample.  Float paths take bias in natural units; quantized
// paths convert the FP32 bias once to the accumulator domain
// (round(b / (s_in * s_w))) and add it before requantization.  qv_out names
// the output grid for quantized execution (ignored for float).
// shift_bits = 0 selects the default for the storage type.
Tensor conv_forward(const Tensor& in, const Tensor& weight, const Tensor* bias,
                    const ConvParams& cp, const QuantizerValues* qv_out,
                    int shift_bits = 0);

// --- Pooling ---------------------------------------------------------------

// Max pooling over square windows, per channel.  Works on every element
// type; max is monotone under the affine quantization map.
Tensor pool_max(const Tensor& in, const PoolParams& pp);

// --- Fully connected -------------------------------------------------------

// Inner product: input flattened to N x K, weight K x out_features, plus
// optional bias.  Float and quantized paths as in conv_forward.
Tensor inner_product(const Tensor& in, const Tensor& weight,
                     const Tensor* bias, int64_t out_features,
                     const QuantizerValues* qv_out, int shift_bits = 0);

// --- Normalization ---------------------------------------------------------

// Per-sample softmax over the trailing dimension, FP32 only.
Tensor softmax(const Tensor& in);

// Across-channel local response normalization on N x C x H x W input:
// x / (k + (alpha/n) * sum(x^2))^beta over the local_size channel window.
Tensor lrn(const Tensor& in, const LRNParams& lp);

}  // namespace qnet

#endif  // QNET_OPS_HPP_
