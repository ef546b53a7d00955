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

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "doctest.h"
#include "qnet/datatypes.hpp"
#include "qnet/half.hpp"
#include "qnet/tensor.hpp"

using namespace qnet;

TEST_CASE("byte widths have the 4:2:2:1 ratio") {
  CHECK(byte_width(DataType::FP32) == 4);
  CHECK(byte_width(DataType::FP16) == 2);
  CHECK(byte_width(DataType::INT16Q) == 2);
  CHECK(byte_width(DataType::INT8Q) == 1);
}

TEST_CASE("quantized type predicates and bounds") {
  CHECK(is_quantized(DataType::INT8Q));
  CHECK(is_quantized(DataType::INT16Q));
  CHECK_FALSE(is_quantized(DataType::FP32));
  CHECK_FALSE(is_quantized(DataType::FP16));
  CHECK(is_float_type(DataType::FP32));
  CHECK(is_float_type(DataType::FP16));

  CHECK(integer_min(DataType::INT8Q) == 0);
  CHECK(integer_max(DataType::INT8Q) == 255);
  CHECK(integer_min(DataType::INT16Q) == 0);
  CHECK(integer_max(DataType::INT16Q) == 65535);
  CHECK(level_count(DataType::INT8Q) == 255);
  CHECK(level_count(DataType::INT16Q) == 65535);
}

TEST_CASE("wide type derivation") {
  const WideTypeMap i8 = derive_wide_types(DataType::INT8Q);
  CHECK(i8.diff_type == WideType::S16);
  CHECK(i8.acc_type == WideType::S32);

  const WideTypeMap i16 = derive_wide_types(DataType::INT16Q);
  CHECK(i16.diff_type == WideType::S32);
  CHECK(i16.acc_type == WideType::S64);

  const WideTypeMap f32 = derive_wide_types(DataType::FP32);
  CHECK(f32.diff_type == WideType::F32);
  CHECK(f32.acc_type == WideType::F32);

  const WideTypeMap f16 = derive_wide_types(DataType::FP16);
  CHECK(f16.diff_type == WideType::F16);
}

TEST_CASE("fp16 encode examples") {
  CHECK(fp16_encode(1.0f) == 0x3C00);
  CHECK(fp16_encode(0.0f) == 0x0000);
  // 65520 is exactly halfway between the max finite (65504) and the first
  // value that would round to infinity; round-to-nearest-even overflows.
  CHECK(fp16_encode(65520.0f) == 0x7C00);
  CHECK(fp16_encode(65504.0f) == 0x7BFF);
  CHECK(fp16_encode(-2.0f) == 0xC000);
}

TEST_CASE("fp16 decode examples") {
  CHECK(fp16_decode(0x3C00) == 1.0f);
  CHECK(fp16_decode(0x0001) == doctest::Approx(5.9604645e-8f).epsilon(1e-12));
  CHECK(fp16_decode(0x0001) == std::ldexp(1.0f, -24));
  CHECK(fp16_decode(0x7C00) == std::numeric_limits<float>::infinity());
  CHECK(fp16_decode(0xFC00) == -std::numeric_limits<float>::infinity());
}

TEST_CASE("fp16 round trip over all non-NaN patterns") {
  int checked = 0;
  for (uint32_t p = 0; p <= 0xFFFF; ++p) {
    const uint16_t pattern = static_cast<uint16_t>(p);
    const float decoded = fp16_decode(pattern);
    if (std::isnan(decoded)) continue;
    CHECK(fp16_encode(decoded) == pattern);
    ++checked;
  }
  // 2 * 1023 NaN payload patterns are excluded from the bijection.
  CHECK(checked == 65536 - 2046);
}

TEST_CASE("fp16 encode is monotone on finite values") {
  // Sweep pairs across magnitudes, including subnormals and the overflow
  // boundary.
  float prev = -70000.0f;
  for (float x = -70000.0f; x <= 70000.0f; x += 13.7f) {
    const float a = fp16_decode(fp16_encode(prev));
    const float b = fp16_decode(fp16_encode(x));
    CHECK(a <= b);
    prev = x;
  }
}

TEST_CASE("fp16 subnormal rounding near the smallest normal") {
  // The largest subnormal and the smallest normal differ by one ulp.
  CHECK(fp16_decode(0x03FF) == doctest::Approx(6.097555e-5f).epsilon(1e-9));
  CHECK(fp16_decode(0x0400) == doctest::Approx(6.1035156e-5f).epsilon(1e-9));
  CHECK(fp16_encode(6.1035156e-5f) == 0x0400);
  CHECK(fp16_encode(6.0975552e-5f) == 0x03FF);
}

TEST_CASE("tensor storage and element access") {
  Tensor t = Tensor::fp32({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.count() == 6);
  CHECK(t.byte_size() == 24);
  CHECK(t.fget(4) == 5.0f);
  t.fset(4, -5.0f);
  CHECK(t.fget(4) == -5.0f);

  Tensor q(DataType::INT8Q, {4});
  q.qset(0, 255);
  q.qset(1, 0);
  CHECK(q.qget(0) == 255);
  CHECK(q.qget(1) == 0);
  CHECK(q.byte_size() == 4);

  Tensor h(DataType::FP16, {2});
  h.fset(0, 1.5f);
  CHECK(h.fget(0) == 1.5f);
  CHECK(h.byte_size() == 4);
}

TEST_CASE("tensor element count equals extent product") {
  CHECK(Tensor(DataType::FP32, {2, 3, 4}).count() == 24);
  CHECK(Tensor(DataType::INT16Q, {5}).count() == 5);
  CHECK(Tensor(DataType::FP32, {}).count() == 1);  // rank-0 scalar
  CHECK(shape_count({7, 11}) == 77);
}

TEST_CASE("typed access on the wrong element type throws") {
  Tensor q(DataType::INT8Q, {1});
  CHECK_THROWS_AS(q.fget(0), std::logic_error);
  Tensor f(DataType::FP32, {1});
  CHECK_THROWS_AS(f.qget(0), std::logic_error);
}
