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

#ifndef QNET_TENSOR_HPP_
#define QNET_TENSOR_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "qnet/datatypes.hpp"
#include "qnet/half.hpp"
#include "qnet/quantizer_values.hpp"

namespace qnet {

// Element count of a shape.  Throws on negative extents; zero extents give
// an empty (but valid) tensor.
int64_t shape_count(const std::vector<int64_t>& shape);

// A dense n-dimensional array with row-major layout and an element type.
// Quantized tensors optionally carry the QuantizerValues that give their
// integers meaning.  Storage is a plain byte buffer; element access goes
// through the typed get/set helpers below.
class Tensor {
 public:
  Tensor() = default;
  Tensor(DataType dtype, std::vector<int64_t> shape);

  // Convenience constructor for FP32 tensors with initial values.
  static Tensor fp32(std::vector<int64_t> shape, std::vector<float> values);

  DataType dtype() const { return dtype_; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t count() const;
  size_t byte_size() const { return data_.size(); }

  const uint8_t* raw() const { return data_.data(); }
  uint8_t* raw() { return data_.data(); }

  // Float element access: valid for FP32 and FP16 (decoded/encoded).
  float fget(int64_t i) const;
  void fset(int64_t i, float v);

  // Raw integer element access: valid for quantized types.
  int64_t qget(int64_t i) const;
  void qset(int64_t i, int64_t v);

  std::optional<QuantizerValues>& qvals() { return qvals_; }
  const std::optional<QuantizerValues>& qvals() const { return qvals_; }

 private:
  DataType dtype_ = DataType::FP32;
  std::vector<int64_t> shape_;
  std::vector<uint8_t> data_;
  std::optional<QuantizerValues> qvals_;
};

}  // namespace qnet

#endif  // QNET_TENSOR_HPP_
