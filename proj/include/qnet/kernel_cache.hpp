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

#ifndef QNET_KERNEL_CACHE_HPP_
#define QNET_KERNEL_CACHE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "qnet/codegen.hpp"

namespace qnet {

// Persistent content-addressed store for compiled kernel blobs.
//
// File layout: magic "QKCH", one version byte (1), then appended records of
// [32-byte hash][8-byte little-endian blob length][blob bytes].  The index
// is rebuilt by a linear scan on open; a truncated trailing record (torn
// write) is ignored.  Writes append a whole record at a time, so the store
// supports concurrent readers with a single writer.
class KernelCache {
 public:
  explicit KernelCache(std::filesystem::path path);

  // Store a blob under a hash.  Returns true if the record was written,
  // false if an identical record is already present (idempotence).  A
  // different blob under an existing hash is appended; the last record
  // wins on reload.
  bool put(const std::array<uint8_t, 32>& hash,
           const std::vector<uint8_t>& blob);

  // Store a program's canonicalized source as the stand-in compiled blob.
  bool put(const KernelProgram& program);

  // Last blob stored under the hash, if any.
  std::optional<std::vector<uint8_t>> get(
      const std::array<uint8_t, 32>& hash) const;

  size_t size() const { return index_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::map<std::array<uint8_t, 32>, std::vector<uint8_t>> index_;
};

}  // namespace qnet

#endif  // QNET_KERNEL_CACHE_HPP_
