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

#include "qnet/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace qnet {

int64_t shape_count(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("negative tensor extent");
    n *= d;
  }
  return n;
}

Tensor::Tensor(DataType dtype, std::vector<int64_t> shape)
    : dtype_(dtype), shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(shape_count(shape_)) * byte_width(dtype_),
               0);
}

Tensor Tensor::fp32(std::vector<int64_t> shape, std::vector<float> values) {
  Tensor t(DataType::FP32, std::move(shape));
  if (static_cast<int64_t>(values.size()) != t.count()) {
    throw std::invalid_argument("value count does not match tensor shape");
  }
  std::memcpy(t.data_.data(), values.data(), values.size() * sizeof(float));
  return t;
}

int64_t Tensor::count() const { return shape_count(shape_); }

float Tensor::fget(int64_t i) const {
  if (dtype_ == DataType::FP32) {
    float v;
    std::memcpy(&v, data_.data() + i * 4, 4);
    return v;
  }
  if (dtype_ == DataType::FP16) {
    uint16_t bits;
    std::memcpy(&bits, data_.data() + i * 2, 2);
    return fp16_decode(bits);
  }
  throw std::logic_error("fget on quantized tensor");
}

void Tensor::fset(int64_t i, float v) {
  if (dtype_ == DataType::FP32) {
    std::memcpy(data_.data() + i * 4, &v, 4);
    return;
  }
  if (dtype_ == DataType::FP16) {
    const uint16_t bits = fp16_encode(v);
    std::memcpy(data_.data() + i * 2, &bits, 2);
    return;
  }
  throw std::logic_error("fset on quantized tensor");
}

int64_t Tensor::qget(int64_t i) const {
  if (dtype_ == DataType::INT8Q) return data_[static_cast<size_t>(i)];
  if (dtype_ == DataType::INT16Q) {
    uint16_t v;
    std::memcpy(&v, data_.data() + i * 2, 2);
    return v;
  }
  throw std::logic_error("qget on float tensor");
}

void Tensor::qset(int64_t i, int64_t v) {
  if (dtype_ == DataType::INT8Q) {
    data_[static_cast<size_t>(i)] = static_cast<uint8_t>(v);
    return;
  }
  if (dtype_ == DataType::INT16Q) {
    const uint16_t bits = static_cast<uint16_t>(v);
    std::memcpy(data_.data() + i * 2, &bits, 2);
    return;
  }
  throw std::logic_error("qset on float tensor");
}

}  // namespace qnet
