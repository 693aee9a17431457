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
#include "gpanet/model.hpp"
#include "gpanet/training.hpp"

namespace gpanet {

/// Everything a run needs besides the data itself. num_classes stays 0 here;
/// training derives it from the train split.
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  std::uint64_t seed = 7;
  int repetitions = 10;
  double jitter = 0.2;
  double flip_prob = 0.5;
  Aspect aspect = Aspect::none;
  int threads = 1;
};

/// INI sections and keys:
///   [backbone] channels, strides, last_stride, input_size
///   [head]     h_parts, v_parts, reduce_dim, dropout, branch
///   [bn]       momentum, eps
///   [loss]     lambda, epsilon
///   [optim]    lr, backbone_lr_divisor, momentum, nesterov, weight_decay,
///              decay_bn, batch, epochs, lr_step, lr_gamma
///   [data]     jitter, flip_prob, aspect
///   [eval]     repetitions
///   [run]      seed, threads
/// channels and strides are comma lists; set channels before strides when
/// changing the stage count. Unknown sections or keys fail, naming the line.
void apply_config_file(RunConfig& cfg, const std::string& path);

/// One "section.key=value" assignment, same keys as the file.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// The full effective configuration as "section.key = value" lines in a
/// fixed order, for logs and reports.
std::vector<std::string> echo_lines(const RunConfig& cfg);

}  // namespace gpanet
