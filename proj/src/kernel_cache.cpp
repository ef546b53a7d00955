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

#include "qnet/kernel_cache.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qnet {

namespace {

constexpr char kMagic[4] = {'Q', 'K', 'C', 'H'};
constexpr uint8_t kVersion = 1;

}  // namespace

KernelCache::KernelCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in.is_open()) {
    // Fresh cache: create the file with its header.
    std::ofstream out(path_, std::ios::binary);
    if (!out.is_open()) {
      throw std::runtime_error("cache open failed: " + path_.string());
    }
    out.write(kMagic, sizeof(kMagic));
    out.put(static_cast<char>(kVersion));
    if (!out.good()) {
      throw std::runtime_error("cache write failed: " + path_.string());
    }
    return;
  }
  char magic[4] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kMagic, 4) != 0 || in.get() != kVersion) {
    throw std::runtime_error("not a kernel cache file: " + path_.string());
  }
  // Linear scan; stop quietly at a truncated trailing record.
  while (true) {
    std::array<uint8_t, 32> hash;
    in.read(reinterpret_cast<char*>(hash.data()), hash.size());
    if (in.gcount() != static_cast<std::streamsize>(hash.size())) break;
    uint8_t lenbytes[8];
    in.read(reinterpret_cast<char*>(lenbytes), sizeof(lenbytes));
    if (in.gcount() != sizeof(lenbytes)) break;
    uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | lenbytes[i];
    std::vector<uint8_t> blob(len);
    in.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len)) break;
    index_[hash] = std::move(blob);  // later records win
  }
}

bool KernelCache::put(const std::array<uint8_t, 32>& hash,
                      const std::vector<uint8_t>& blob) {
  auto it = index_.find(hash);
  if (it != index_.end() && it->second == blob) return false;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out.is_open()) {
    throw std::runtime_error("cache open failed: " + path_.string());
  }
  out.write(reinterpret_cast<const char*>(hash.data()), hash.size());
  uint8_t lenbytes[8];
  const uint64_t len = blob.size();
  for (int i = 0; i < 8; ++i) lenbytes[i] = static_cast<uint8_t>(len >> (8 * i));
  out.write(reinterpret_cast<const char*>(lenbytes), sizeof(lenbytes));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  out.flush();
  if (!out.good()) {
    throw std::runtime_error("cache write failed: " + path_.string());
  }
  index_[hash] = blob;
  return true;
}

bool KernelCache::put(const KernelProgram& program) {
  const std::string canon = canonicalize_source(program.source);
  return put(program.content_hash,
             std::vector<uint8_t>(canon.begin(), canon.end()));
}

std::optional<std::vector<uint8_t>> KernelCache::get(
    const std::array<uint8_t, 32>& hash) const {
  auto it = index_.find(hash);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace qnet
