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

#include "qnet/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qnet {

const char* quant_mode_name(QuantMode m) {
  switch (m) {
    case QuantMode::PASSIVE:
      return "passive";
    case QuantMode::OBSERVE:
      return "observe";
    case QuantMode::PSEUDO:
      return "pseudo";
    case QuantMode::QUANTIZED:
      return "quantized";
  }
  return "?";
}

double round_half_even(double x) {
  const double f = std::floor(x);
  const double d = x - f;
  if (d > 0.5) return f + 1.0;
  if (d < 0.5) return f;
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

int default_shift_bits(DataType t) {
  switch (t) {
    case DataType::INT8Q:
      return 31;
    case DataType::INT16Q:
      return 15;
    default:
      throw std::invalid_argument("shift bits are defined for quantized types only");
  }
}

ObservationState observe(ObservationState state, const Tensor& t) {
  const int64_t n = t.count();
  if (n == 0) throw std::invalid_argument("empty observation");
  for (int64_t i = 0; i < n; ++i) {
    const double v = t.fget(i);
    state.seen_min = std::min(state.seen_min, v);
    state.seen_max = std::max(state.seen_max, v);
  }
  state.count += static_cast<uint64_t>(n);
  return state;
}

QuantizerValues estimate_params(double f_min, double f_max, DataType dtype) {
  if (!is_quantized(dtype)) {
    throw std::invalid_argument("estimation requires a quantized target type");
  }
  if (!(f_max > f_min)) throw std::invalid_argument("degenerate range");
  QuantizerValues qv;
  qv.i_min = integer_min(dtype);
  qv.i_max = integer_max(dtype);
  qv.f_min = f_min;
  qv.f_max = f_max;
  qv.scale = (f_max - f_min) / static_cast<double>(qv.i_max - qv.i_min);
  const double z = round_half_even(static_cast<double>(qv.i_min) - f_min / qv.scale);
  qv.zero = static_cast<int32_t>(
      std::clamp(z, static_cast<double>(qv.i_min), static_cast<double>(qv.i_max)));
  qv.one = 1.0 / qv.scale + qv.zero;
  return qv;
}

QuantizerValues estimate_from_observation(const ObservationState& state,
                                          DataType dtype) {
  if (!state.has_data()) throw std::invalid_argument("no calibration data");
  double lo = state.seen_min;
  double hi = state.seen_max;
  if (!(hi > lo)) {
    // All observed values equal: widen symmetrically so the estimate stays
    // well conditioned.
    const double pad = std::max(std::abs(lo), 1.0) * 0x1p-8;
    lo -= pad;
    hi += pad;
  }
  return estimate_params(lo, hi, dtype);
}

int64_t quantize_value(double x, const QuantizerValues& qv) {
  const double q = round_half_even(x / qv.scale) + qv.zero;
  if (std::isnan(q)) return qv.zero;
  if (q <= static_cast<double>(qv.i_min)) return qv.i_min;
  if (q >= static_cast<double>(qv.i_max)) return qv.i_max;
  return static_cast<int64_t>(q);
}

double dequantize_value(int64_t q, const QuantizerValues& qv) {
  return static_cast<double>(q - qv.zero) * qv.scale;
}

Tensor quantize(const Tensor& t, const QuantizerValues& qv, DataType dtype) {
  if (!is_quantized(dtype)) {
    throw std::invalid_argument("quantize requires a quantized target type");
  }
  Tensor out(dtype, t.shape());
  const int64_t n = t.count();
  for (int64_t i = 0; i < n; ++i) {
    out.qset(i, quantize_value(t.fget(i), qv));
  }
  out.qvals() = qv;
  return out;
}

Tensor dequantize(const Tensor& t) {
  if (!t.qvals().has_value()) {
    throw std::invalid_argument("dequantize requires quantizer values");
  }
  const QuantizerValues& qv = *t.qvals();
  Tensor out(DataType::FP32, t.shape());
  const int64_t n = t.count();
  for (int64_t i = 0; i < n; ++i) {
    out.fset(i, static_cast<float>(dequantize_value(t.qget(i), qv)));
  }
  return out;
}

Tensor pseudo_quantize(const Tensor& t, const QuantizerValues& qv,
                       DataType dtype) {
  if (!is_quantized(dtype)) {
    throw std::invalid_argument("pseudo_quantize requires a quantized target type");
  }
  Tensor out(DataType::FP32, t.shape());
  const int64_t n = t.count();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t q = quantize_value(t.fget(i), qv);
    out.fset(i, static_cast<float>(dequantize_value(q, qv)));
  }
  return out;
}

namespace {

RequantParams requant_from_ratio(double r, int64_t in_zero,
                                 const QuantizerValues& qv_out,
                                 int shift_bits) {
  if (shift_bits < 1 || shift_bits > 31) {
    throw std::invalid_argument("shift_bits out of range");
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument("invalid rescale ratio");
  }
  int e = 0;
  const double frac = std::frexp(r, &e);  // r = frac * 2^e, frac in [0.5, 1)
  int64_t mult = static_cast<int64_t>(round_half_even(std::ldexp(frac, shift_bits)));
  int shift = -e;
  if (mult == (int64_t{1} << shift_bits)) {
    // Rounding carried into the next power of two; fold it into the shift.
    mult >>= 1;
    --shift;
  }
  RequantParams rq;
  rq.shift_bits = shift_bits;
  rq.mult = mult;
  rq.shift = shift;
  rq.in_zero = in_zero;
  rq.out_zero = qv_out.zero;
  rq.out_min = qv_out.i_min;
  rq.out_max = qv_out.i_max;
  return rq;
}

}  // namespace

RequantParams scale_quant_vals(const QuantizerValues& qv_in,
                               const QuantizerValues& qv_out, int shift_bits) {
  return requant_from_ratio(qv_in.scale / qv_out.scale, qv_in.zero, qv_out,
                            shift_bits);
}

RequantParams scale_quant_vals(const QuantizerValues& qv_a,
                               const QuantizerValues& qv_b,
                               const QuantizerValues& qv_c, int shift_bits) {
  return requant_from_ratio(qv_a.scale * qv_b.scale / qv_c.scale, qv_a.zero,
                            qv_c, shift_bits);
}

int64_t requant_round(int64_t acc, const RequantParams& rq) {
  const int s = rq.shift_bits + rq.shift;
  const __int128 prod = static_cast<__int128>(acc) * rq.mult;
  if (s <= 0) {
    return static_cast<int64_t>(prod << (-s));
  }
  const __int128 half = static_cast<__int128>(1) << (s - 1);
  __int128 q = (prod + half) >> s;
  const __int128 rem = prod & ((static_cast<__int128>(1) << s) - 1);
  if (rem == half && (q & 1)) --q;  // ties to even
  return static_cast<int64_t>(q);
}

int64_t requant_clamp(int64_t acc, const RequantParams& rq) {
  const int64_t v = requant_round(acc, rq) + rq.out_zero;
  return std::clamp(v, rq.out_min, rq.out_max);
}

}  // namespace qnet
