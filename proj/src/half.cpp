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

#include "qnet/half.hpp"

#include <bit>
#include <cstring>

namespace qnet {

namespace {

// Right shift with round-to-nearest-even on the dropped bits.
uint32_t rne_shift(uint32_t v, int s) {
  uint32_t q = v >> s;
  uint32_t rem = v & ((1u << s) - 1u);
  uint32_t half = 1u << (s - 1);
  if (rem > half || (rem == half && (q & 1u))) ++q;
  return q;
}

}  // namespace

uint16_t fp16_encode(float x) {
  uint32_t bits;
  std::memcpy(&bits, &x, sizeof(bits));
  const uint16_t sign = static_cast<uint16_t>((bits >> 16) & 0x8000u);
  const uint32_t exp = (bits >> 23) & 0xFFu;
  const uint32_t mant = bits & 0x7FFFFFu;

  if (exp == 0xFFu) {  // infinity or NaN
    if (mant == 0) return sign | 0x7C00u;
    uint16_t payload = static_cast<uint16_t>(mant >> 13);
    if (payload == 0) payload = 1;  // keep NaNs NaN
    return sign | 0x7C00u | payload;
  }

  const int newexp = static_cast<int>(exp) - 127 + 15;
  if (newexp >= 31) return sign | 0x7C00u;  // far above the FP16 range
  if (newexp < -10) return sign;            // rounds to signed zero

  if (newexp <= 0) {
    // Subnormal target: shift the 24-bit significand into the denormal grid.
    // A carry out of the rounding lands exactly on the smallest normal.
    const uint32_t sig = mant | 0x800000u;
    return sign | static_cast<uint16_t>(rne_shift(sig, 14 - newexp));
  }

  // Normal target: drop 13 mantissa bits with round-to-nearest-even.  The
  // increment may carry into the exponent field, which is exactly the
  // desired behavior, including overflow to infinity.
  uint32_t sig = (static_cast<uint32_t>(newexp) << 10) | (mant >> 13);
  const uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (sig & 1u))) ++sig;
  if (sig >= 0x7C00u) return sign | 0x7C00u;
  return sign | static_cast<uint16_t>(sig);
}

float fp16_decode(uint16_t h) {
  const uint32_t sign = (static_cast<uint32_t>(h) & 0x8000u) << 16;
  const uint32_t exp = (h >> 10) & 0x1Fu;
  const uint32_t mant = h & 0x3FFu;
  uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      // Subnormal: renormalize.  The highest set bit of the mantissa
      // becomes the implicit leading one.
      const int p = 31 - std::countl_zero(mant);
      bits = sign | (static_cast<uint32_t>(p + 103) << 23) |
             ((mant << (23 - p)) & 0x7FFFFFu);
    }
  } else if (exp == 31) {
    bits = sign | 0x7F800000u | (mant << 13);
  } else {
    bits = sign | ((exp + 112u) << 23) | (mant << 13);
  }
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

}  // namespace qnet
