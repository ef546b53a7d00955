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

#ifndef QNET_HALF_HPP_
#define QNET_HALF_HPP_

#include <cstdint>

namespace qnet {

// IEEE 754 binary16 conversions.  FP16 is a storage format only: arithmetic
// is carried out in FP32 and results are narrowed once on store.

// Round-to-nearest-even conversion.  Values beyond the FP16 range become
// signed infinities; NaN payloads are preserved in the high mantissa bits.
uint16_t fp16_encode(float x);

// Exact widening of a binary16 bit pattern, including subnormals, infinities
// and NaNs.
float fp16_decode(uint16_t bits);

}  // namespace qnet

#endif  // QNET_HALF_HPP_
