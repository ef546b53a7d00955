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

#ifndef QNET_MODEL_STORE_HPP_
#define QNET_MODEL_STORE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "qnet/datatypes.hpp"
#include "qnet/quantizer_values.hpp"

namespace qnet {

// One named tensor in a model file.  Parameters are stored under
// "<layer>.<slot>" names (for example "fc.weight"); calibration entries for
// activation blobs use "blob:<range key>" with a rank-1 {0} shape and no
// payload.  A record is considered calibrated when its scale is positive.
struct ParamRecord {
  std::string name;
  DataType dtype = DataType::FP32;
  std::vector<int64_t> extents;
  float f_min = 0.0f;
  float f_max = 0.0f;
  float scale = 0.0f;
  float zero = 0.0f;
  float one = 0.0f;
  std::vector<uint8_t> payload;
};

struct Model {
  std::vector<ParamRecord> records;

  const ParamRecord* find(const std::string& name) const;
};

// Copies quantizer values into / out of a record's calibration fields.
void set_record_qvals(ParamRecord* rec, const QuantizerValues& qv);
QuantizerValues record_qvals(const ParamRecord& rec);

// Binary serialization (QCNM format, version 1).  save_model writes to a
// temporary file in the destination directory and renames it into place.
// load_model throws std::runtime_error with "not a model file" on a bad
// magic/version and "truncated model file" when the payload runs short.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

}  // namespace qnet

#endif  // QNET_MODEL_STORE_HPP_
