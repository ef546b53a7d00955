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
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "qnet/quantizer.hpp"

using namespace qnet;

namespace {

bool throws_with(const std::function<void()>& fn, const std::string& needle) {
  try {
    fn();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

}  // namespace

TEST_CASE("round_half_even resolves ties to the even neighbor") {
  CHECK(round_half_even(0.5) == 0.0);
  CHECK(round_half_even(1.5) == 2.0);
  CHECK(round_half_even(2.5) == 2.0);
  CHECK(round_half_even(-0.5) == 0.0);
  CHECK(round_half_even(-1.5) == -2.0);
  CHECK(round_half_even(3.2) == 3.0);
  CHECK(round_half_even(3.7) == 4.0);
}

TEST_CASE("default shift bits per storage type") {
  CHECK(default_shift_bits(DataType::INT8Q) == 31);
  CHECK(default_shift_bits(DataType::INT16Q) == 15);
}

TEST_CASE("observe widens the running range") {
  ObservationState s;
  CHECK_FALSE(s.has_data());

  s = observe(s, Tensor::fp32({1}, {0.0f}));
  CHECK(s.seen_min == 0.0);
  CHECK(s.seen_max == 0.0);
  CHECK(s.count == 1);

  ObservationState t;
  t.seen_min = -1.0;
  t.seen_max = 2.0;
  t.count = 2;
  t = observe(t, Tensor::fp32({2}, {3.5f, -0.5f}));
  CHECK(t.seen_min == -1.0);
  CHECK(t.seen_max == 3.5);
  CHECK(t.count == 4);
}

TEST_CASE("repeat observation does not change the range") {
  Tensor v = Tensor::fp32({3}, {-2.0f, 0.5f, 7.0f});
  ObservationState once = observe(ObservationState{}, v);
  ObservationState twice = observe(once, v);
  CHECK(twice.seen_min == once.seen_min);
  CHECK(twice.seen_max == once.seen_max);
}

TEST_CASE("observe rejects empty tensors") {
  Tensor empty(DataType::FP32, {0});
  CHECK(throws_with([&] { observe(ObservationState{}, empty); },
                    "empty observation"));
}

TEST_CASE("estimate_params identity scale") {
  QuantizerValues qv = estimate_params(0.0, 255.0, DataType::INT8Q);
  CHECK(qv.scale == 1.0);
  CHECK(qv.zero == 0);
  CHECK(qv.one == 1.0);
  CHECK(qv.i_min == 0);
  CHECK(qv.i_max == 255);
}

TEST_CASE("estimate_params celsius input range") {
  QuantizerValues qv = estimate_params(-273.0, 1000.0, DataType::INT8Q);
  CHECK(qv.scale == doctest::Approx(4.992156862745098).epsilon(1e-15));
  CHECK(qv.zero == 55);
  CHECK(qv.one == doctest::Approx(1.0 / qv.scale + 55).epsilon(1e-15));
}

TEST_CASE("estimate_params fahrenheit output range") {
  QuantizerValues qv = estimate_params(-394.6, 1832.0, DataType::INT8Q);
  CHECK(qv.scale == doctest::Approx(8.731764705882354).epsilon(1e-15));
  CHECK(qv.zero == 45);
}

TEST_CASE("estimate_params rejects degenerate ranges") {
  CHECK(throws_with([] { estimate_params(1.0, 1.0, DataType::INT8Q); },
                    "degenerate range"));
  CHECK(throws_with([] { estimate_params(2.0, -2.0, DataType::INT16Q); },
                    "degenerate range"));
}

TEST_CASE("estimate_params invariants over random ranges") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lo(-1e4, 1e4);
  std::uniform_real_distribution<double> width(1e-3, 1e4);
  for (int i = 0; i < 500; ++i) {
    const double f_min = lo(rng);
    const double f_max = f_min + width(rng);
    const DataType dt = (i % 2 == 0) ? DataType::INT8Q : DataType::INT16Q;
    const QuantizerValues qv = estimate_params(f_min, f_max, dt);
    CHECK(qv.scale > 0.0);
    CHECK(qv.scale ==
          doctest::Approx((f_max - f_min) / double(qv.i_max - qv.i_min))
              .epsilon(1e-12));
    CHECK(qv.i_min <= qv.zero);
    CHECK(qv.zero <= qv.i_max);
    CHECK(qv.one == doctest::Approx(1.0 / qv.scale + qv.zero).epsilon(1e-12));
  }
}

TEST_CASE("estimate_from_observation widens a constant observation") {
  ObservationState s = observe(ObservationState{}, Tensor::fp32({1}, {5.0f}));
  QuantizerValues qv = estimate_from_observation(s, DataType::INT8Q);
  // Widened symmetrically by max(|5|, 1) * 2^-8.
  CHECK(qv.f_min == doctest::Approx(5.0 - 5.0 / 256.0).epsilon(1e-12));
  CHECK(qv.f_max == doctest::Approx(5.0 + 5.0 / 256.0).epsilon(1e-12));
  CHECK(qv.scale > 0.0);

  ObservationState z = observe(ObservationState{}, Tensor::fp32({1}, {0.0f}));
  QuantizerValues qz = estimate_from_observation(z, DataType::INT8Q);
  CHECK(qz.f_min == doctest::Approx(-1.0 / 256.0).epsilon(1e-12));
  CHECK(qz.f_max == doctest::Approx(1.0 / 256.0).epsilon(1e-12));
}

TEST_CASE("estimate_from_observation requires data") {
  CHECK(throws_with(
      [] { estimate_from_observation(ObservationState{}, DataType::INT8Q); },
      "no calibration data"));
}

TEST_CASE("quantize examples") {
  QuantizerValues qv = estimate_params(-273.0, 1000.0, DataType::INT8Q);
  CHECK(quantize_value(0.0, qv) == qv.zero);

  QuantizerValues unit = estimate_params(0.0, 255.0, DataType::INT8Q);
  CHECK(quantize_value(3.2, unit) == 3);
  CHECK(quantize_value(1e6, unit) == 255);
  CHECK(quantize_value(-1e6, unit) == 0);
  CHECK(quantize_value(std::numeric_limits<double>::infinity(), unit) == 255);
}

TEST_CASE("quantize saturates to the integer interval") {
  QuantizerValues qv = estimate_params(-1.0, 1.0, DataType::INT16Q);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    const int64_t q = quantize_value(dist(rng), qv);
    CHECK(q >= qv.i_min);
    CHECK(q <= qv.i_max);
  }
}

TEST_CASE("dequantize examples") {
  QuantizerValues qv = estimate_params(-273.0, 1000.0, DataType::INT8Q);
  CHECK(dequantize_value(qv.zero, qv) == 0.0);
  CHECK(dequantize_value(qv.zero + 1, qv) ==
        doctest::Approx(4.992156862745098).epsilon(1e-12));
}

TEST_CASE("round trip error stays within half a step") {
  for (DataType dt : {DataType::INT8Q, DataType::INT16Q}) {
    QuantizerValues qv = estimate_params(-273.0, 1000.0, dt);
    for (int i = 0; i <= 4096; ++i) {
      const double x = -273.0 + (1000.0 - -273.0) * i / 4096.0;
      const double back = dequantize_value(quantize_value(x, qv), qv);
      CHECK(std::abs(back - x) <= qv.scale / 2.0 + 1e-9);
    }
  }
}

TEST_CASE("tensor quantize and dequantize round trip") {
  QuantizerValues qv = estimate_params(0.0, 2.55, DataType::INT8Q);
  Tensor t = Tensor::fp32({4}, {0.0f, 0.3f, 1.0f, 2.55f});
  Tensor q = quantize(t, qv, DataType::INT8Q);
  CHECK(q.dtype() == DataType::INT8Q);
  REQUIRE(q.qvals().has_value());
  Tensor back = dequantize(q);
  CHECK(back.dtype() == DataType::FP32);
  CHECK(back.fget(0) == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(back.fget(1) == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(back.fget(3) == doctest::Approx(2.55).epsilon(1e-6));
}

TEST_CASE("pseudo_quantize reproduces grid-aligned values exactly") {
  // s = 2.55/255 = 0.01, zero = 0; 0.3 sits exactly on the grid.
  QuantizerValues qv = estimate_params(0.0, 2.55, DataType::INT8Q);
  CHECK(qv.scale == doctest::Approx(0.01).epsilon(1e-15));
  Tensor t = Tensor::fp32({1}, {0.3f});
  Tensor p = pseudo_quantize(t, qv, DataType::INT8Q);
  CHECK(p.dtype() == DataType::FP32);
  CHECK(p.fget(0) == doctest::Approx(0.3).epsilon(1e-7));
}

TEST_CASE("pseudo_quantize bins to at most level_count distinct values") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> dist(-8.0f, 8.0f);
  std::vector<float> vals(1000);
  for (float& v : vals) v = dist(rng);
  Tensor t = Tensor::fp32({1000}, vals);
  QuantizerValues qv = estimate_params(-8.0, 8.0, DataType::INT8Q);
  Tensor p = pseudo_quantize(t, qv, DataType::INT8Q);
  std::set<float> distinct;
  for (int64_t i = 0; i < p.count(); ++i) distinct.insert(p.fget(i));
  CHECK(distinct.size() <= 255);
}

TEST_CASE("pseudo_quantize is idempotent") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> dist(-273.0f, 1000.0f);
  std::vector<float> vals(257);
  for (float& v : vals) v = dist(rng);
  Tensor t = Tensor::fp32({257}, vals);
  QuantizerValues qv = estimate_params(-273.0, 1000.0, DataType::INT8Q);
  Tensor once = pseudo_quantize(t, qv, DataType::INT8Q);
  Tensor twice = pseudo_quantize(once, qv, DataType::INT8Q);
  for (int64_t i = 0; i < once.count(); ++i) {
    CHECK(once.fget(i) == twice.fget(i));
  }
}

namespace {

QuantizerValues qv_with_scale(double s) {
  QuantizerValues qv;
  qv.scale = s;
  qv.zero = 0;
  qv.i_min = 0;
  qv.i_max = 255;
  qv.f_min = 0.0;
  qv.f_max = s * 255.0;
  qv.one = 1.0 / s;
  return qv;
}

}  // namespace

TEST_CASE("scale_quant_vals with unit ratio") {
  RequantParams rq =
      scale_quant_vals(qv_with_scale(1.0), qv_with_scale(1.0), 31);
  CHECK(rq.mult == (int64_t(1) << 30));
  CHECK(rq.shift == -1);
  CHECK(rq.shift_bits == 31);
  // ((x * 2^30) >> 31) << 1 must reproduce x exactly.
  for (int64_t x = 0; x < (int64_t(1) << 16); ++x) {
    CHECK(requant_round(x, rq) == x);
  }
}

TEST_CASE("scale_quant_vals with ratio three halves") {
  RequantParams rq =
      scale_quant_vals(qv_with_scale(1.5), qv_with_scale(1.0), 15);
  CHECK(rq.mult == 24576);  // 0.75 * 2^15
  CHECK(rq.shift == -1);
}

TEST_CASE("scale_quant_vals validates shift_bits") {
  CHECK(throws_with(
      [] { scale_quant_vals(qv_with_scale(1.0), qv_with_scale(1.0), 0); },
      "shift_bits out of range"));
  CHECK(throws_with(
      [] { scale_quant_vals(qv_with_scale(1.0), qv_with_scale(1.0), 32); },
      "shift_bits out of range"));
}

TEST_CASE("scale_quant_vals rejects non-positive ratios") {
  QuantizerValues bad = qv_with_scale(1.0);
  bad.scale = 0.0;
  CHECK(throws_with([&] { scale_quant_vals(bad, qv_with_scale(1.0), 31); },
                    "invalid rescale ratio"));
  bad.scale = std::numeric_limits<double>::infinity();
  CHECK(throws_with([&] { scale_quant_vals(bad, qv_with_scale(1.0), 31); },
                    "invalid rescale ratio"));
}

TEST_CASE("product form combines two input scales") {
  // r = s_a * s_b / s_c = 2 * 3 / 4 = 1.5.
  RequantParams rq = scale_quant_vals(qv_with_scale(2.0), qv_with_scale(3.0),
                                      qv_with_scale(4.0), 15);
  CHECK(rq.mult == 24576);
  CHECK(rq.shift == -1);
}

TEST_CASE("requant approximation error bound") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> log_r(-10.0, 10.0);
  std::uniform_int_distribution<int64_t> xs(-32768, 32767);  // Difftype of
                                                             // INT8Q sources
  const int shift_bits = 31;
  for (int trial = 0; trial < 1000; ++trial) {
    const double r = std::exp2(log_r(rng));
    RequantParams rq =
        scale_quant_vals(qv_with_scale(r), qv_with_scale(1.0), shift_bits);
    const int64_t x = xs(rng);
    const double exact = double(x) * r;
    const int64_t approx = requant_round(x, rq);
    const double bound =
        std::max(1.0, std::abs(exact) * std::exp2(1 - shift_bits));
    CHECK(std::abs(double(approx) - exact) <= bound + 0.5);
  }
}

TEST_CASE("requant_clamp adds the zero point and clamps") {
  RequantParams rq =
      scale_quant_vals(qv_with_scale(1.0), qv_with_scale(1.0), 31);
  rq.out_zero = 10;
  rq.out_min = 0;
  rq.out_max = 255;
  CHECK(requant_clamp(5, rq) == 15);
  CHECK(requant_clamp(300, rq) == 255);
  CHECK(requant_clamp(-50, rq) == 0);
}

TEST_CASE("requant params satisfy the mantissa normalization") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> log_r(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = std::exp2(log_r(rng)) * 1.37;
    for (int sb : {15, 31}) {
      RequantParams rq =
          scale_quant_vals(qv_with_scale(r), qv_with_scale(1.0), sb);
      CHECK(rq.mult >= (int64_t(1) << (sb - 1)));
      CHECK(rq.mult < (int64_t(1) << sb));
    }
  }
}
