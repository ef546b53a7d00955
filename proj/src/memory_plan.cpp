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

#include "qnet/memory_plan.hpp"

#include <algorithm>
#include <set>

#include "qnet/tensor.hpp"

namespace qnet {

MemoryPlan plan_intervals(const std::vector<BlobInterval>& intervals,
                          bool reuse) {
  struct Slot {
    int end = 0;
    size_t bytes = 0;
    bool sharable = true;
  };
  MemoryPlan plan;
  plan.reuse_enabled = reuse;
  std::vector<Slot> slots;
  for (const BlobInterval& iv : intervals) {
    int chosen = -1;
    if (reuse && !iv.inspect) {
      for (size_t j = 0; j < slots.size(); ++j) {
        if (slots[j].sharable && slots[j].end < iv.start) {
          chosen = static_cast<int>(j);
          break;
        }
      }
    }
    if (chosen < 0) {
      slots.push_back({iv.end, iv.bytes, !iv.inspect});
      chosen = static_cast<int>(slots.size()) - 1;
    } else {
      slots[chosen].end = iv.end;
      slots[chosen].bytes = std::max(slots[chosen].bytes, iv.bytes);
    }
    plan.assignment[iv.name] = chosen;
  }
  for (const Slot& s : slots) {
    plan.slot_sizes.push_back(s.bytes);
    plan.peak_bytes += s.bytes;
  }
  return plan;
}

MemoryPlan plan_memory(const GraphSpec& g, bool reuse) {
  const auto blobs = infer_blobs(g);
  const int last = static_cast<int>(g.layers.size()) - 1;
  const std::set<std::string> inspect(g.inspect.begin(), g.inspect.end());

  // Production order: one top per layer, so sorting by producer index
  // reproduces the declaration order.
  std::vector<const BlobInfo*> ordered;
  ordered.reserve(blobs.size());
  for (const auto& [name, info] : blobs) ordered.push_back(&info);
  std::sort(ordered.begin(), ordered.end(),
            [](const BlobInfo* a, const BlobInfo* b) {
              return a->producer < b->producer;
            });

  std::vector<BlobInterval> intervals;
  intervals.reserve(ordered.size());
  for (const BlobInfo* info : ordered) {
    BlobInterval iv;
    iv.name = info->name;
    iv.start = info->producer;
    iv.end = info->consumers.empty()
                 ? last
                 : *std::max_element(info->consumers.begin(),
                                     info->consumers.end());
    iv.bytes = static_cast<size_t>(shape_count(info->shape)) *
               byte_width(info->dtype);
    iv.inspect = inspect.count(info->name) > 0;
    intervals.push_back(std::move(iv));
  }
  return plan_intervals(intervals, reuse);
}

}  // namespace qnet
