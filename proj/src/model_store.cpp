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

#include "qnet/model_store.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "qnet/tensor.hpp"

namespace qnet {

namespace {

constexpr char kMagic[4] = {'Q', 'C', 'N', 'M'};
constexpr uint8_t kVersion = 1;

void put_u16(std::string* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

void put_f32(std::string* out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] | (data_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  void bytes(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
  }

 private:
  void need(size_t n) const {
    if (pos_ + n > size_) throw std::runtime_error("truncated model file");
  }
  const uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

}  // namespace

const ParamRecord* Model::find(const std::string& name) const {
  for (const ParamRecord& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

void set_record_qvals(ParamRecord* rec, const QuantizerValues& qv) {
  rec->f_min = static_cast<float>(qv.f_min);
  rec->f_max = static_cast<float>(qv.f_max);
  rec->scale = static_cast<float>(qv.scale);
  rec->zero = static_cast<float>(qv.zero);
  rec->one = static_cast<float>(qv.one);
}

QuantizerValues record_qvals(const ParamRecord& rec) {
  QuantizerValues qv;
  qv.f_min = rec.f_min;
  qv.f_max = rec.f_max;
  qv.scale = rec.scale;
  qv.zero = static_cast<int32_t>(std::lround(rec.zero));
  qv.one = rec.one;
  qv.i_min = integer_min(rec.dtype);
  qv.i_max = integer_max(rec.dtype);
  return qv;
}

void save_model(const Model& m, const std::string& path) {
  std::string buf;
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  put_u32(&buf, static_cast<uint32_t>(m.records.size()));
  for (const ParamRecord& r : m.records) {
    if (r.name.size() > 0xffff) {
      throw std::invalid_argument("record name too long: " + r.name);
    }
    const size_t expect =
        static_cast<size_t>(shape_count(r.extents)) * byte_width(r.dtype);
    if (r.payload.size() != expect) {
      throw std::invalid_argument("payload size mismatch: " + r.name);
    }
    put_u16(&buf, static_cast<uint16_t>(r.name.size()));
    buf.append(r.name);
    buf.push_back(static_cast<char>(static_cast<uint8_t>(r.dtype)));
    buf.push_back(static_cast<char>(static_cast<uint8_t>(r.extents.size())));
    for (int64_t e : r.extents) put_u32(&buf, static_cast<uint32_t>(e));
    put_f32(&buf, r.f_min);
    put_f32(&buf, r.f_max);
    put_f32(&buf, r.scale);
    put_f32(&buf, r.zero);
    put_f32(&buf, r.one);
    put_f32(&buf, 0.0f);  // reserved
    buf.append(reinterpret_cast<const char*>(r.payload.data()),
               r.payload.size());
  }

  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("cannot write: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read: " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());

  if (raw.size() < 9 || std::memcmp(raw.data(), kMagic, 4) != 0 ||
      raw[4] != kVersion) {
    throw std::runtime_error("not a model file");
  }
  Reader rd(raw.data() + 5, raw.size() - 5);
  const uint32_t count = rd.u32();
  Model m;
  m.records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    ParamRecord r;
    const uint16_t name_len = rd.u16();
    r.name.resize(name_len);
    rd.bytes(r.name.data(), name_len);
    const uint8_t tag = rd.u8();
    if (tag > static_cast<uint8_t>(DataType::INT16Q)) {
      throw std::runtime_error("not a model file");
    }
    r.dtype = static_cast<DataType>(tag);
    const uint8_t rank = rd.u8();
    r.extents.resize(rank);
    for (uint8_t d = 0; d < rank; ++d) r.extents[d] = rd.u32();
    r.f_min = rd.f32();
    r.f_max = rd.f32();
    r.scale = rd.f32();
    r.zero = rd.f32();
    r.one = rd.f32();
    rd.f32();  // reserved
    const size_t payload =
        static_cast<size_t>(shape_count(r.extents)) * byte_width(r.dtype);
    r.payload.resize(payload);
    rd.bytes(r.payload.data(), payload);
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace qnet
