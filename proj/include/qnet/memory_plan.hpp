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

#ifndef QNET_MEMORY_PLAN_HPP_
#define QNET_MEMORY_PLAN_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qnet/graph.hpp"

namespace qnet {

// Lifetime of one blob, measured in layer indices: the blob is written at
// `start` and last read at `end` (inclusive).  Graph outputs stay live
// through the final layer.  Blobs marked for inspection are excluded from
// slot sharing so their contents survive the whole run.
struct BlobInterval {
  std::string name;
  int start = 0;
  int end = 0;
  size_t bytes = 0;
  bool inspect = false;
};

struct MemoryPlan {
  bool reuse_enabled = false;
  // blob name -> slot index
  std::map<std::string, int> assignment;
  // bytes reserved per slot (max over the blobs mapped to it)
  std::vector<size_t> slot_sizes;
  size_t peak_bytes = 0;
};

// Greedy first-fit slot assignment over intervals listed in production
// order.  With reuse disabled every blob gets its own slot.
MemoryPlan plan_intervals(const std::vector<BlobInterval>& intervals,
                          bool reuse);

// Derives intervals from the graph (shapes via infer_blobs) and plans them.
MemoryPlan plan_memory(const GraphSpec& g, bool reuse);

}  // namespace qnet

#endif  // QNET_MEMORY_PLAN_HPP_
