// Copyright (c) 2026 The gpanet Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gpanet/descriptor_io.hpp"

#include <cstring>

#include "gpanet/fsio.hpp"

namespace gpanet {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'A', 'E'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (pos + n > bytes.size()) {
      throw DataError(std::string("descriptors: truncated reading ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) {
      v |= static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[pos++])) << (8 * i);
    }
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos++])) << (8 * i);
    }
    return v;
  }
  float f32(const char* what) {
    const std::uint32_t v = u32(what);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
  bool at_end() const { return pos == bytes.size(); }
};

}  // namespace

std::string serialize_descriptors(const DescriptorMatrix& m) {
  if (m.identities.size() != m.distractor.size() ||
      m.rows.size() != m.identities.size() * static_cast<std::size_t>(m.dim)) {
    throw DataError("descriptors: row/label bookkeeping out of sync");
  }
  if (m.dim < 1) throw DataError("descriptors: dimension must be positive");
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(m.count()));
  put_u32(out, static_cast<std::uint32_t>(m.dim));
  for (std::int64_t i = 0; i < m.count(); ++i) {
    const std::string& id = m.identities[static_cast<std::size_t>(i)];
    if (id.size() > 0xffff) throw DataError("descriptors: identity label too long");
    put_u16(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
    out.push_back(static_cast<char>(m.distractor[static_cast<std::size_t>(i)] ? 1 : 0));
    const float* row = m.row(i);
    for (std::int64_t j = 0; j < m.dim; ++j) put_f32(out, row[j]);
  }
  return out;
}

DescriptorMatrix parse_descriptors(const std::string& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("descriptors: bad magic, expected GPAE");
  }
  r.pos = 4;
  const std::uint32_t count = r.u32("row count");
  const std::uint32_t dim = r.u32("dimension");
  if (dim == 0) throw DataError("descriptors: dimension must be positive");
  DescriptorMatrix m;
  m.dim = dim;
  m.identities.reserve(count);
  m.distractor.reserve(count);
  m.rows.reserve(static_cast<std::size_t>(count) * dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t len = r.u16("identity length");
    r.need(len, "identity");
    m.identities.emplace_back(bytes, r.pos, len);
    r.pos += len;
    const std::uint8_t flag = r.u8("distractor flag");
    if (flag > 1) throw DataError("descriptors: distractor flag must be 0 or 1");
    m.distractor.push_back(flag);
    for (std::uint32_t j = 0; j < dim; ++j) m.rows.push_back(r.f32("descriptor values"));
  }
  if (!r.at_end()) throw DataError("descriptors: trailing bytes after the last row");
  return m;
}

void write_descriptors(const std::string& path, const DescriptorMatrix& m) {
  atomic_write_file(path, serialize_descriptors(m));
}

DescriptorMatrix read_descriptors(const std::string& path) {
  return parse_descriptors(read_file_bytes(path));
}

}  // namespace gpanet
