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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gpanet/errors.hpp"
#include "gpanet/ops.hpp"
#include "gpanet/rng.hpp"
#include "gpanet/tensor.hpp"

namespace gpanet {

struct ConvStage {
  std::int64_t out_channels = 0;
  int kernel = 3;
  int stride = 2;
  int padding = 1;
};

/// Stack of conv + batch-norm + relu stages turning an N x 3 x S x S image
/// batch into the activation tensor N x C x H x W. The stride of the final
/// stage is taken from last_stage_stride, which is the knob that doubles the
/// output resolution when set to 1.
struct BackboneConfig {
  std::vector<ConvStage> stages;
  int last_stage_stride = 1;
  std::int64_t input_size = 64;
  std::int64_t in_channels = 3;

  static BackboneConfig desk_default() {
    BackboneConfig cfg;
    cfg.stages = {
        {16, 3, 2, 1},
        {32, 3, 2, 1},
        {64, 3, 2, 1},
        {64, 3, 2, 1},
    };
    cfg.last_stage_stride = 1;
    cfg.input_size = 64;
    return cfg;
  }

  std::int64_t channels_out() const {
    return stages.empty() ? 0 : stages.back().out_channels;
  }

  int stride_of(std::size_t stage) const {
    return stage + 1 == stages.size() ? last_stage_stride : stages[stage].stride;
  }

  /// Spatial extent of the activation tensor for a square input.
  std::int64_t output_extent() const {
    std::int64_t e = input_size;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& st = stages[i];
      e = (e + 2 * st.padding - st.kernel) / stride_of(i) + 1;
    }
    return e;
  }

  void validate() const {
    if (stages.empty()) throw DataError("backbone: needs at least one stage");
    if (input_size < 1) {
      throw DataError("backbone: input_size must be positive, got " + std::to_string(input_size));
    }
    if (last_stage_stride != 1 && last_stage_stride != 2) {
      throw DataError("backbone: last_stage_stride must be 1 or 2, got " +
                      std::to_string(last_stage_stride));
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& st = stages[i];
      if (st.out_channels < 1) {
        throw DataError("backbone: stage " + std::to_string(i) + " has no output channels");
      }
      const int stride = stride_of(i);
      if (stride != 1 && stride != 2) {
        throw DataError("backbone: stage " + std::to_string(i) + " stride must be 1 or 2, got " +
                        std::to_string(stride));
      }
    }
    if (output_extent() < 1) {
      throw DataError("backbone: input_size " + std::to_string(input_size) +
                      " collapses to an empty activation tensor");
    }
  }
};

template <typename Real>
struct ConvBnParams {
  Tensor<Real> weight;
  Tensor<Real> bias;
  Tensor<Real> gamma;
  Tensor<Real> beta;
  BatchNormState<Real> bn_state;
};

template <typename Real>
struct BackboneParams {
  std::vector<ConvBnParams<Real>> stages;
};

/// Zero-mean normal weights scaled by 1/sqrt(fan_in), zero biases, identity
/// batch norm. Every stage draws from its own derived seed stream.
template <typename Real>
BackboneParams<Real> init_backbone(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BackboneParams<Real> params;
  std::int64_t in_ch = cfg.in_channels;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    const auto& st = cfg.stages[i];
    const std::int64_t fan_in = in_ch * st.kernel * st.kernel;
    const Real sigma = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    Rng rng(derive_seed(seed, 0x6261636bull, i));
    const Shape wshape{st.out_channels, in_ch, st.kernel, st.kernel};
    std::vector<Real> w(static_cast<std::size_t>(shape_numel(wshape)));
    for (auto& v : w) v = static_cast<Real>(rng.normal()) * sigma;
    ConvBnParams<Real> stage;
    stage.weight = Tensor<Real>(wshape, std::move(w), true);
    stage.bias = Tensor<Real>::zeros({st.out_channels}, true);
    stage.gamma = Tensor<Real>::full({st.out_channels}, Real(1), true);
    stage.beta = Tensor<Real>::zeros({st.out_channels}, true);
    stage.bn_state = BatchNormState<Real>::init(st.out_channels);
    params.stages.push_back(std::move(stage));
    in_ch = st.out_channels;
  }
  return params;
}

template <typename Real>
Tensor<Real> backbone_forward(const Tensor<Real>& images, const BackboneConfig& cfg,
                              BackboneParams<Real>& params, Mode mode,
                              Real bn_momentum = Real(0.1), Real bn_eps = Real(1e-5)) {
  if (images.rank() != 4 || images.extent(1) != cfg.in_channels ||
      images.extent(2) != cfg.input_size || images.extent(3) != cfg.input_size) {
    throw ShapeError("backbone: expected input [Nx" + std::to_string(cfg.in_channels) + "x" +
                     std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size) +
                     "], got " + shape_str(images.shape()));
  }
  if (params.stages.size() != cfg.stages.size()) {
    throw ShapeError("backbone: parameter set has " + std::to_string(params.stages.size()) +
                     " stages, config " + std::to_string(cfg.stages.size()));
  }
  Tensor<Real> t = images;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    auto& stage = params.stages[i];
    t = conv2d(t, stage.weight, stage.bias, cfg.stride_of(i), cfg.stages[i].padding);
    t = batch_norm(t, stage.gamma, stage.beta, stage.bn_state, mode, bn_momentum, bn_eps);
    t = relu(t);
  }
  return t;
}

}  // namespace gpanet
