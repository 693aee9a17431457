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
#include <functional>
#include <string>
#include <vector>

#include "gpanet/backbone.hpp"
#include "gpanet/gpa_head.hpp"

namespace gpanet {

/// Which branches exist, train, and contribute descriptor blocks.
enum class BranchMode { combined, global_only, local_only };

inline const char* branch_mode_name(BranchMode m) {
  switch (m) {
    case BranchMode::combined: return "combined";
    case BranchMode::global_only: return "global_only";
    case BranchMode::local_only: return "local_only";
  }
  throw DataError("branch mode: unknown value");
}

inline BranchMode branch_mode_from(const std::string& name) {
  if (name == "combined") return BranchMode::combined;
  if (name == "global_only") return BranchMode::global_only;
  if (name == "local_only") return BranchMode::local_only;
  throw DataError("branch mode: expected combined|global_only|local_only, got '" + name + "'");
}

struct ModelConfig {
  BackboneConfig backbone = BackboneConfig::desk_default();
  PartitionScheme scheme;
  BranchMode branch_mode = BranchMode::combined;
  std::int64_t num_classes = 0;
  std::int64_t reduce_dim = 512;
  double dropout_rate = 0.5;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  bool with_global() const { return branch_mode != BranchMode::local_only; }
  bool with_parts() const { return branch_mode != BranchMode::global_only; }

  void validate() const {
    backbone.validate();
    const std::int64_t extent = backbone.output_extent();
    if (with_parts() && (scheme.h_parts > extent || scheme.v_parts > extent)) {
      throw ShapeError("model: partition " + std::to_string(scheme.h_parts) + "x" +
                       std::to_string(scheme.v_parts) + " does not fit the " +
                       std::to_string(extent) + "x" + std::to_string(extent) +
                       " activation tensor");
    }
    if (reduce_dim < 1) throw DataError("model: reduce_dim must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
      throw DataError("model: dropout_rate must be in [0,1)");
    }
  }
};

/// Descriptor width produced by extract_descriptor under this config.
inline std::int64_t descriptor_dim(const ModelConfig& cfg) {
  const std::int64_t c = cfg.backbone.channels_out();
  std::int64_t blocks = 0;
  if (cfg.with_global()) blocks += 1;
  if (cfg.with_parts()) blocks += cfg.scheme.parts();
  return blocks * c;
}

template <typename Real>
struct Model {
  ModelConfig config;
  BackboneParams<Real> backbone;
  HeadParams<Real> head;
};

template <typename Real>
Model<Real> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.num_classes < 2) {
    throw DataError("model: need at least two classes, got " + std::to_string(cfg.num_classes));
  }
  Model<Real> model;
  model.config = cfg;
  model.backbone = init_backbone<Real>(cfg.backbone, derive_seed(seed, 1));
  model.head = init_head<Real>(cfg.backbone.channels_out(), cfg.num_classes, cfg.scheme,
                               cfg.reduce_dim, derive_seed(seed, 2), cfg.with_global(),
                               cfg.with_parts());
  return model;
}

/// Logits for the configured branches. In combined mode the first matrix is
/// the global head, followed by parts 1..p; disabled sides are absent.
template <typename Real>
std::vector<Tensor<Real>> model_forward(Model<Real>& model, const Tensor<Real>& images,
                                        Mode mode, std::uint64_t step_seed) {
  Tensor<Real> t = backbone_forward(images, model.config.backbone, model.backbone, mode,
                                    static_cast<Real>(model.config.bn_momentum),
                                    static_cast<Real>(model.config.bn_eps));
  return train_forward(t, model.config.scheme, model.head, mode, step_seed,
                       model.config.dropout_rate, static_cast<Real>(model.config.bn_momentum),
                       static_cast<Real>(model.config.bn_eps));
}

/// Eval-mode retrieval descriptors, N x descriptor_dim(config).
template <typename Real>
Tensor<Real> model_descriptor(Model<Real>& model, const Tensor<Real>& images) {
  NoGradGuard guard;
  Tensor<Real> t = backbone_forward(images, model.config.backbone, model.backbone, Mode::eval,
                                    static_cast<Real>(model.config.bn_momentum),
                                    static_cast<Real>(model.config.bn_eps));
  return extract_descriptor(t, model.config.scheme, model.config.with_global(),
                            model.config.with_parts());
}

enum class ParamGroup { backbone, head };

/// Visits every trainable parameter with its checkpoint block name. Part
/// branches are 1-based, matching the stored names.
template <typename Real, typename Fn>
void for_each_param(Model<Real>& model, Fn&& fn) {
  for (std::size_t i = 0; i < model.backbone.stages.size(); ++i) {
    const std::string base = "backbone.stage" + std::to_string(i) + ".";
    auto& st = model.backbone.stages[i];
    fn(base + "conv.weight", st.weight, ParamGroup::backbone);
    fn(base + "conv.bias", st.bias, ParamGroup::backbone);
    fn(base + "bn.gamma", st.gamma, ParamGroup::backbone);
    fn(base + "bn.beta", st.beta, ParamGroup::backbone);
  }
  auto visit_branch = [&fn](const std::string& base, BranchParams<Real>& b) {
    fn(base + "reduce.weight", b.reduce_weight, ParamGroup::head);
    fn(base + "reduce.bias", b.reduce_bias, ParamGroup::head);
    fn(base + "bn.gamma", b.gamma, ParamGroup::head);
    fn(base + "bn.beta", b.beta, ParamGroup::head);
    fn(base + "cls.weight", b.cls_weight, ParamGroup::head);
    fn(base + "cls.bias", b.cls_bias, ParamGroup::head);
  };
  if (model.head.has_global) visit_branch("head.global.", model.head.global);
  for (std::size_t l = 0; l < model.head.parts.size(); ++l) {
    visit_branch("head.part" + std::to_string(l + 1) + ".", model.head.parts[l]);
  }
}

/// Visits every batch-norm running-statistics buffer (not trainable, but
/// persisted and restored with the checkpoint).
template <typename Real, typename Fn>
void for_each_bn_state(Model<Real>& model, Fn&& fn) {
  for (std::size_t i = 0; i < model.backbone.stages.size(); ++i) {
    const std::string base = "backbone.stage" + std::to_string(i) + ".bn.";
    fn(base + "running_mean", model.backbone.stages[i].bn_state.running_mean);
    fn(base + "running_var", model.backbone.stages[i].bn_state.running_var);
  }
  auto visit = [&fn](const std::string& base, BranchParams<Real>& b) {
    fn(base + "bn.running_mean", b.bn_state.running_mean);
    fn(base + "bn.running_var", b.bn_state.running_var);
  };
  if (model.head.has_global) visit("head.global.", model.head.global);
  for (std::size_t l = 0; l < model.head.parts.size(); ++l) {
    visit("head.part" + std::to_string(l + 1) + ".", model.head.parts[l]);
  }
}

}  // namespace gpanet
