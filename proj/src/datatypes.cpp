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

#include "qnet/datatypes.hpp"

#include <stdexcept>

namespace qnet {

size_t byte_width(DataType t) {
  switch (t) {
    case DataType::FP32:
      return 4;
    case DataType::FP16:
      return 2;
    case DataType::INT8Q:
      return 1;
    case DataType::INT16Q:
      return 2;
  }
  throw std::invalid_argument("unknown data type");
}

bool is_quantized(DataType t) {
  return t == DataType::INT8Q || t == DataType::INT16Q;
}

bool is_float_type(DataType t) {
  return t == DataType::FP32 || t == DataType::FP16;
}

int64_t integer_min(DataType t) {
  (void)t;
  return 0;
}

int64_t integer_max(DataType t) {
  switch (t) {
    case DataType::INT8Q:
      return 255;
    case DataType::INT16Q:
      return 65535;
    default:
      return 0;
  }
}

int64_t level_count(DataType t) { return integer_max(t) - integer_min(t); }

WideTypeMap derive_wide_types(DataType t) {
  switch (t) {
    case DataType::FP32:
      return {WideType::F32, WideType::F32, WideType::F32};
    case DataType::FP16:
      return {WideType::F16, WideType::F32, WideType::F32};
    case DataType::INT8Q:
      // Unsigned 8-bit elements: differences need 9 signed bits, dot
      // products accumulate safely in 32 bits at supported sizes, and the
      // requantization product needs 64.
      return {WideType::S16, WideType::S32, WideType::S64};
    case DataType::INT16Q:
      return {WideType::S32, WideType::S64, WideType::S64};
  }
  throw std::invalid_argument("unknown data type");
}

const char* dtype_name(DataType t) {
  switch (t) {
    case DataType::FP32:
      return "fp32";
    case DataType::FP16:
      return "fp16";
    case DataType::INT8Q:
      return "int8";
    case DataType::INT16Q:
      return "int16";
  }
  return "?";
}

const char* dtype_ctype(DataType t) {
  switch (t) {
    case DataType::FP32:
      return "float";
    case DataType::FP16:
      return "half";
    case DataType::INT8Q:
      return "uint8_t";
    case DataType::INT16Q:
      return "uint16_t";
  }
  return "?";
}

const char* wide_ctype(WideType t) {
  switch (t) {
    case WideType::F16:
      return "half";
    case WideType::F32:
      return "float";
    case WideType::S16:
      return "int16_t";
    case WideType::S32:
      return "int32_t";
    case WideType::S64:
      return "int64_t";
  }
  return "?";
}

std::optional<DataType> dtype_from_name(std::string_view name) {
  if (name == "fp32" || name == "float") return DataType::FP32;
  if (name == "fp16" || name == "half") return DataType::FP16;
  if (name == "int8") return DataType::INT8Q;
  if (name == "int16") return DataType::INT16Q;
  return std::nullopt;
}

}  // namespace qnet
