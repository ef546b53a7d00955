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

#ifndef QNET_QUANTIZER_HPP_
#define QNET_QUANTIZER_HPP_

#include "qnet/quantizer_values.hpp"
#include "qnet/tensor.hpp"

namespace qnet {

// Round to the nearest integer, ties to even.  Used everywhere a float
// value lands on the integer grid so that host and device agree bit for
// bit.
double round_half_even(double x);

// Default number of fractional bits for fixed-point rescale multipliers:
// 31 for 8-bit storage (32-bit accumulators), 15 for 16-bit storage
// (64-bit accumulators, but multipliers sized for vectorized code).
int default_shift_bits(DataType t);

// Fold a tensor's values into a running range observation.
// Throws "empty observation" for tensors without elements.
ObservationState observe(ObservationState state, const Tensor& t);

// Affine parameter estimation for the interval [f_min, f_max], which must
// be non-degenerate (f_max > f_min).  The interval is used exactly as
// given; callers decide whether zero must be included.
QuantizerValues estimate_params(double f_min, double f_max, DataType dtype);

// Estimation from an observed range.  A degenerate observation (all values
// equal) is widened symmetrically by max(|f|, 1) * 2^-8 before estimation.
// Throws "no calibration data" if nothing was observed.
QuantizerValues estimate_from_observation(const ObservationState& state,
                                          DataType dtype);

// Scalar quantization helpers.
int64_t quantize_value(double x, const QuantizerValues& qv);
double dequantize_value(int64_t q, const QuantizerValues& qv);

// Tensor quantization: float tensor -> quantized tensor (with qvals
// attached) and back.
Tensor quantize(const Tensor& t, const QuantizerValues& qv, DataType dtype);
Tensor dequantize(const Tensor& t);

// Simulated quantization: quantize then dequantize, staying in float
// storage.  Used by pseudo-quantized execution.
Tensor pseudo_quantize(const Tensor& t, const QuantizerValues& qv,
                       DataType dtype);

// Fixed-point program for rescaling by r = scale_in / scale_out (unary
// operators) or r = scale_a * scale_b / scale_c (products).  shift_bits
// must lie in [1, 31]; the ratio must be positive and finite, otherwise
// "invalid rescale ratio" is thrown.
RequantParams scale_quant_vals(const QuantizerValues& qv_in,
                               const QuantizerValues& qv_out, int shift_bits);
RequantParams scale_quant_vals(const QuantizerValues& qv_a,
                               const QuantizerValues& qv_b,
                               const QuantizerValues& qv_c, int shift_bits);

// Apply a rescale program to an accumulator value with round-to-nearest-
// even at the combined shift (shift_bits + shift).  This is the rounding
// requantizer used by dot-product operators.
int64_t requant_round(int64_t acc, const RequantParams& rq);

// Requantize-and-clamp: requant_round plus zero-point add and output
// clamping.
int64_t requant_clamp(int64_t acc, const RequantParams& rq);

}  // namespace qnet

#endif  // QNET_QUANTIZER_HPP_
