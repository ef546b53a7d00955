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

#ifndef QNET_SHA256_HPP_
#define QNET_SHA256_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace qnet {

// FIPS 180-4 SHA-256 of a byte buffer.
std::array<uint8_t, 32> sha256(const void* data, size_t len);

// Lowercase hex rendering of a digest.
std::string digest_hex(const std::array<uint8_t, 32>& digest);

}  // namespace qnet

#endif  // QNET_SHA256_HPP_
