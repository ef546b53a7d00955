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

#ifndef QNET_DATATYPES_HPP_
#define QNET_DATATYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace qnet {

// Storage/compute element types supported by the engine.  Quantized types
// are stored as unsigned integers; the quantization parameters attached to a
// tensor give them meaning.
enum class DataType : uint8_t {
  FP32 = 0,
  FP16 = 1,
  INT8Q = 2,
  INT16Q = 3,
};

// Wide helper types used by quantized arithmetic.  Difftype holds a
// zero-point-corrected element, Acctype holds dot-product accumulators, and
// Multtype holds the product of an accumulator with a fixed-point
// multiplier.
enum class WideType : uint8_t {
  F16 = 0,
  F32 = 1,
  S16 = 2,
  S32 = 3,
  S64 = 4,
};

struct WideTypeMap {
  WideType diff_type;
  WideType acc_type;
  WideType mult_type;
};

// Bytes per stored element.
size_t byte_width(DataType t);

bool is_quantized(DataType t);
bool is_float_type(DataType t);

// Integer grid bounds for quantized types.  Zero for float types.
int64_t integer_min(DataType t);
int64_t integer_max(DataType t);

// Distinct representable levels of a quantized grid (i_max - i_min).
int64_t level_count(DataType t);

// Difftype/Acctype/Multtype selection for a storage type.
WideTypeMap derive_wide_types(DataType t);

// Concrete C names, used by the kernel generator and for diagnostics.
const char* dtype_name(DataType t);       // "fp32", "fp16", "int8", "int16"
const char* dtype_ctype(DataType t);      // "float", "half", "uint8_t", ...
const char* wide_ctype(WideType t);       // "int32_t", "int64_t", ...

std::optional<DataType> dtype_from_name(std::string_view name);

}  // namespace qnet

#endif  // QNET_DATATYPES_HPP_
