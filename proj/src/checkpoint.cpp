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

#include "gpanet/checkpoint.hpp"

#include <cmath>
#include <cstring>

#include "gpanet/fsio.hpp"

namespace gpanet {

namespace {

constexpr char kMagic[4] = {'G', 'P', 'A', 'C'};
constexpr std::uint32_t kVersion = 1;

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
      throw DataError(std::string("checkpoint: truncated reading ") + what);
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

std::size_t block_numel(const CheckpointBlock& b) {
  std::size_t n = 1;
  for (const std::uint32_t e : b.extents) n *= e;
  return n;
}

std::vector<std::uint32_t> extents_of(const Shape& shape) {
  std::vector<std::uint32_t> out;
  out.reserve(shape.size());
  for (const std::int64_t e : shape) out.push_back(static_cast<std::uint32_t>(e));
  return out;
}

bool extents_match(const std::vector<std::uint32_t>& extents, const Shape& shape) {
  if (extents.size() != shape.size()) return false;
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (static_cast<std::int64_t>(extents[i]) != shape[i]) return false;
  }
  return true;
}

std::string extents_str(const std::vector<std::uint32_t>& extents) {
  std::string s = "[";
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(extents[i]);
  }
  return s + "]";
}

std::int64_t scalar_int(const Checkpoint& ckpt, const std::string& name) {
  const float v = ckpt.scalar(name);
  const auto i = static_cast<std::int64_t>(std::llround(v));
  if (static_cast<float>(i) != v) {
    throw DataError("checkpoint: block '" + name + "' holds " + std::to_string(v) +
                    ", expected an integer");
  }
  return i;
}

}  // namespace

const CheckpointBlock* Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const CheckpointBlock& Checkpoint::at(const std::string& name) const {
  const CheckpointBlock* b = find(name);
  if (!b) throw DataError("checkpoint: missing block '" + name + "'");
  return *b;
}

float Checkpoint::scalar(const std::string& name) const {
  const CheckpointBlock& b = at(name);
  if (b.values.size() != 1) {
    throw DataError("checkpoint: block '" + name + "' is not a scalar");
  }
  return b.values[0];
}

void Checkpoint::add(const std::string& name, const std::vector<std::uint32_t>& extents,
                     const std::vector<float>& values) {
  if (find(name)) throw DataError("checkpoint: duplicate block '" + name + "'");
  if (block_numel(CheckpointBlock{name, extents, {}}) != values.size()) {
    throw ShapeError("checkpoint: block '" + name + "' extents " + extents_str(extents) +
                     " disagree with " + std::to_string(values.size()) + " values");
  }
  blocks.push_back(CheckpointBlock{name, extents, values});
}

void Checkpoint::add_scalar(const std::string& name, float value) {
  add(name, {1}, {value});
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  for (const auto& b : ckpt.blocks) {
    if (b.name.size() > 0xffff) throw DataError("checkpoint: block name too long");
    if (b.extents.size() > 0xff) throw DataError("checkpoint: block rank too large");
    if (block_numel(b) != b.values.size()) {
      throw ShapeError("checkpoint: block '" + b.name + "' extents disagree with its values");
    }
    put_u16(out, static_cast<std::uint16_t>(b.name.size()));
    out.append(b.name);
    out.push_back(static_cast<char>(b.extents.size()));
    for (const std::uint32_t e : b.extents) put_u32(out, e);
    for (const float v : b.values) put_f32(out, v);
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  r.need(4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic, expected GPAC");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  while (!r.at_end()) {
    CheckpointBlock b;
    const std::uint16_t name_len = r.u16("block name length");
    r.need(name_len, "block name");
    b.name.assign(bytes, r.pos, name_len);
    r.pos += name_len;
    const std::uint8_t rank = r.u8("block rank");
    b.extents.reserve(rank);
    for (int i = 0; i < rank; ++i) b.extents.push_back(r.u32("block extent"));
    const std::size_t numel = block_numel(b);
    b.values.reserve(numel);
    for (std::size_t i = 0; i < numel; ++i) b.values.push_back(r.f32("block values"));
    if (ckpt.find(b.name)) throw DataError("checkpoint: duplicate block '" + b.name + "'");
    ckpt.blocks.push_back(std::move(b));
  }
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  atomic_write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::string& path) {
  return parse_checkpoint(read_file_bytes(path));
}

Checkpoint checkpoint_from_model(Model<float>& model, const NormStats& norm) {
  const ModelConfig& cfg = model.config;
  Checkpoint ckpt;
  ckpt.add_scalar("config.version", 1.0f);
  ckpt.add_scalar("config.input_size", static_cast<float>(cfg.backbone.input_size));
  ckpt.add_scalar("config.in_channels", static_cast<float>(cfg.backbone.in_channels));
  ckpt.add_scalar("config.num_stages", static_cast<float>(cfg.backbone.stages.size()));
  for (std::size_t i = 0; i < cfg.backbone.stages.size(); ++i) {
    const auto& st = cfg.backbone.stages[i];
    const std::string base = "config.stage" + std::to_string(i) + ".";
    ckpt.add_scalar(base + "channels", static_cast<float>(st.out_channels));
    ckpt.add_scalar(base + "kernel", static_cast<float>(st.kernel));
    ckpt.add_scalar(base + "stride", static_cast<float>(st.stride));
    ckpt.add_scalar(base + "padding", static_cast<float>(st.padding));
  }
  ckpt.add_scalar("config.last_stage_stride", static_cast<float>(cfg.backbone.last_stage_stride));
  ckpt.add_scalar("config.h_parts", static_cast<float>(cfg.scheme.h_parts));
  ckpt.add_scalar("config.v_parts", static_cast<float>(cfg.scheme.v_parts));
  ckpt.add_scalar("config.branch_mode", static_cast<float>(static_cast<int>(cfg.branch_mode)));
  ckpt.add_scalar("config.num_classes", static_cast<float>(cfg.num_classes));
  ckpt.add_scalar("config.reduce_dim", static_cast<float>(cfg.reduce_dim));
  ckpt.add_scalar("config.dropout_rate", static_cast<float>(cfg.dropout_rate));
  ckpt.add_scalar("config.bn_momentum", static_cast<float>(cfg.bn_momentum));
  ckpt.add_scalar("config.bn_eps", static_cast<float>(cfg.bn_eps));
  ckpt.add("norm.mean", {3},
           {static_cast<float>(norm.mean[0]), static_cast<float>(norm.mean[1]),
            static_cast<float>(norm.mean[2])});
  ckpt.add("norm.std", {3},
           {static_cast<float>(norm.std[0]), static_cast<float>(norm.std[1]),
            static_cast<float>(norm.std[2])});
  for_each_param(model, [&ckpt](const std::string& name, TensorF& p, ParamGroup) {
    ckpt.add(name, extents_of(p.shape()), p.data());
  });
  for_each_bn_state(model, [&ckpt](const std::string& name, std::vector<float>& stats) {
    ckpt.add(name, {static_cast<std::uint32_t>(stats.size())}, stats);
  });
  return ckpt;
}

LoadedModel model_from_checkpoint(const Checkpoint& ckpt) {
  if (scalar_int(ckpt, "config.version") != 1) {
    throw DataError("checkpoint: unsupported config.version");
  }
  ModelConfig cfg;
  cfg.backbone.stages.clear();
  cfg.backbone.input_size = scalar_int(ckpt, "config.input_size");
  cfg.backbone.in_channels = scalar_int(ckpt, "config.in_channels");
  const std::int64_t num_stages = scalar_int(ckpt, "config.num_stages");
  if (num_stages < 1) throw DataError("checkpoint: num_stages must be positive");
  for (std::int64_t i = 0; i < num_stages; ++i) {
    const std::string base = "config.stage" + std::to_string(i) + ".";
    ConvStage st;
    st.out_channels = scalar_int(ckpt, base + "channels");
    st.kernel = scalar_int(ckpt, base + "kernel");
    st.stride = scalar_int(ckpt, base + "stride");
    st.padding = scalar_int(ckpt, base + "padding");
    cfg.backbone.stages.push_back(st);
  }
  cfg.backbone.last_stage_stride = scalar_int(ckpt, "config.last_stage_stride");
  cfg.scheme.h_parts = scalar_int(ckpt, "config.h_parts");
  cfg.scheme.v_parts = scalar_int(ckpt, "config.v_parts");
  const std::int64_t mode = scalar_int(ckpt, "config.branch_mode");
  if (mode < 0 || mode > 2) {
    throw DataError("checkpoint: branch_mode must be 0, 1, or 2, got " + std::to_string(mode));
  }
  cfg.branch_mode = static_cast<BranchMode>(mode);
  cfg.num_classes = scalar_int(ckpt, "config.num_classes");
  cfg.reduce_dim = scalar_int(ckpt, "config.reduce_dim");
  cfg.dropout_rate = ckpt.scalar("config.dropout_rate");
  cfg.bn_momentum = ckpt.scalar("config.bn_momentum");
  cfg.bn_eps = ckpt.scalar("config.bn_eps");

  LoadedModel loaded{init_model<float>(cfg, 0), NormStats{}};
  const CheckpointBlock& mean = ckpt.at("norm.mean");
  const CheckpointBlock& stdv = ckpt.at("norm.std");
  if (mean.values.size() != 3 || stdv.values.size() != 3) {
    throw DataError("checkpoint: norm.mean and norm.std must hold 3 values");
  }
  for (int c = 0; c < 3; ++c) {
    loaded.norm.mean[static_cast<std::size_t>(c)] = mean.values[static_cast<std::size_t>(c)];
    loaded.norm.std[static_cast<std::size_t>(c)] = stdv.values[static_cast<std::size_t>(c)];
  }
  for_each_param(loaded.model, [&ckpt](const std::string& name, TensorF& p, ParamGroup) {
    const CheckpointBlock& b = ckpt.at(name);
    if (!extents_match(b.extents, p.shape())) {
      throw ShapeError("checkpoint: block '" + name + "' is " + extents_str(b.extents) +
                       ", model expects " + shape_str(p.shape()));
    }
    p.leaf_data() = b.values;
  });
  for_each_bn_state(loaded.model, [&ckpt](const std::string& name, std::vector<float>& stats) {
    const CheckpointBlock& b = ckpt.at(name);
    if (b.values.size() != stats.size()) {
      throw ShapeError("checkpoint: block '" + name + "' holds " +
                       std::to_string(b.values.size()) + " values, model expects " +
                       std::to_string(stats.size()));
    }
    stats = b.values;
  });
  return loaded;
}

}  // namespace gpanet
