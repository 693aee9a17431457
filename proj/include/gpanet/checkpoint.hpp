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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpanet/datasets.hpp"
#include "gpanet/errors.hpp"
#include "gpanet/model.hpp"

namespace gpanet {

/// One named float array inside a checkpoint.
struct CheckpointBlock {
  std::string name;
  std::vector<std::uint32_t> extents;
  std::vector<float> values;
};

/// Ordered block list. Format on disk: magic "GPAC", version u32, then per
/// block a u16-length name, u8 rank, u32 extents, and f32 values, all
/// little-endian.
struct Checkpoint {
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock* find(const std::string& name) const;
  const CheckpointBlock& at(const std::string& name) const;
  float scalar(const std::string& name) const;
  void add(const std::string& name, const std::vector<std::uint32_t>& extents,
           const std::vector<float>& values);
  void add_scalar(const std::string& name, float value);
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Model architecture, weights, batch-norm running stats, and the training
/// normalization constants, as one checkpoint.
Checkpoint checkpoint_from_model(Model<float>& model, const NormStats& norm);

struct LoadedModel {
  Model<float> model;
  NormStats norm;
};

/// Rebuilds the model a checkpoint describes; every stored block must match
/// the reconstructed shapes exactly.
LoadedModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace gpanet
