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

#ifndef QNET_QUANTIZER_VALUES_HPP_
#define QNET_QUANTIZER_VALUES_HPP_

#include <cstdint>
#include <limits>

namespace qnet {

// Affine quantization parameters mapping a float interval [f_min, f_max]
// onto the unsigned integer grid [i_min, i_max]:
//
//   float = (q - zero) * scale
//
// `one` caches the integer image of 1.0f (not rounded), which quantized
// kernels use to build multiplicative identities.
struct QuantizerValues {
  double f_min = 0.0;
  double f_max = 0.0;
  double scale = 1.0;
  int32_t zero = 0;
  double one = 0.0;
  int64_t i_min = 0;
  int64_t i_max = 0;

  bool finalized() const { return scale > 0.0 && i_max > i_min; }
};

// Running min/max statistics gathered while a network executes in float
// mode.  Observation never resets: ranges only widen.
struct ObservationState {
  double seen_min = std::numeric_limits<double>::infinity();
  double seen_max = -std::numeric_limits<double>::infinity();
  uint64_t count = 0;

  bool has_data() const { return count > 0; }
};

// Fixed-point rescale program: multiply by `mult` and divide by
// 2^(shift_bits + shift), approximating a real ratio r with
// mult in [2^(shift_bits-1), 2^shift_bits).  `shift` may be negative,
// in which case the final stage is a left shift.
struct RequantParams {
  int32_t shift_bits = 31;
  int64_t mult = 0;
  int32_t shift = 0;
  int64_t in_zero = 0;
  int64_t out_zero = 0;
  int64_t out_min = 0;
  int64_t out_max = 0;
};

// Execution mode of a network with respect to quantization.
enum class QuantMode : uint8_t {
  PASSIVE = 0,    // plain float execution
  OBSERVE = 1,    // float execution plus range recording
  PSEUDO = 2,     // float execution with simulated quantization noise
  QUANTIZED = 3,  // integer execution
};

const char* quant_mode_name(QuantMode m);

}  // namespace qnet

#endif  // QNET_QUANTIZER_VALUES_HPP_
