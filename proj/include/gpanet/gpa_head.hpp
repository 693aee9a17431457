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

// Global + partitioned pooling head. Pooled C-dimensional features feed two
// distinct consumers: the training classifiers (through a 512-d reduction)
// and the retrieval descriptor (used raw, concatenated).

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

struct PartitionScheme {
  int h_parts = 3;
  int v_parts = 1;

  int parts() const { return h_parts * v_parts; }
};

struct Rect {
  std::int64_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;

  std::int64_t area() const { return (r1 - r0) * (c1 - c0); }
};

/// Splits a height x width grid into h_parts x v_parts rectangles, row-major
/// over (h_index, v_index). When an extent is not divisible, the first
/// (extent mod parts) stripes take one extra row or column.
inline std::vector<Rect> partition_regions(std::int64_t height, std::int64_t width,
                                           const PartitionScheme& scheme) {
  if (scheme.h_parts < 1 || scheme.v_parts < 1) {
    throw ShapeError("partition: part counts must be positive, got " +
                     std::to_string(scheme.h_parts) + "x" + std::to_string(scheme.v_parts));
  }
  if (scheme.h_parts > height || scheme.v_parts > width) {
    throw ShapeError("partition: " + std::to_string(scheme.h_parts) + "x" +
                     std::to_string(scheme.v_parts) + " parts do not fit a " +
                     std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  auto stripes = [](std::int64_t extent, int parts) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    const std::int64_t base = extent / parts;
    const std::int64_t extra = extent % parts;
    std::int64_t at = 0;
    for (int i = 0; i < parts; ++i) {
      const std::int64_t len = base + (i < extra ? 1 : 0);
      out.emplace_back(at, at + len);
      at += len;
    }
    return out;
  };
  const auto rows = stripes(height, scheme.h_parts);
  const auto cols = stripes(width, scheme.v_parts);
  std::vector<Rect> rects;
  rects.reserve(static_cast<std::size_t>(scheme.parts()));
  for (const auto& [r0, r1] : rows)
    for (const auto& [c0, c1] : cols) rects.push_back(Rect{r0, r1, c0, c1});
  return rects;
}

template <typename Real>
struct PooledFeatures {
  Tensor<Real> global;                // N x C, full-spatial mean
  std::vector<Tensor<Real>> locals;   // p tensors, N x C each
};

template <typename Real>
PooledFeatures<Real> pool_features(const Tensor<Real>& t, const PartitionScheme& scheme) {
  if (t.rank() != 4) {
    throw ShapeError("pool_features: expected NCHW activations, got " + shape_str(t.shape()));
  }
  const std::int64_t h = t.extent(2), w = t.extent(3);
  PooledFeatures<Real> out;
  out.global = region_avg_pool(t, 0, h, 0, w);
  for (const Rect& r : partition_regions(h, w, scheme)) {
    out.locals.push_back(region_avg_pool(t, r.r0, r.r1, r.c0, r.c1));
  }
  return out;
}

/// One classification branch: C -> reduce_dim linear, batch norm, dropout,
/// reduce_dim -> K classifier.
template <typename Real>
struct BranchParams {
  Tensor<Real> reduce_weight;
  Tensor<Real> reduce_bias;
  Tensor<Real> gamma;
  Tensor<Real> beta;
  BatchNormState<Real> bn_state;
  Tensor<Real> cls_weight;
  Tensor<Real> cls_bias;
};

template <typename Real>
struct HeadParams {
  BranchParams<Real> global;
  std::vector<BranchParams<Real>> parts;
  bool has_global = true;
  std::int64_t reduce_dim = 512;
  std::int64_t num_classes = 0;
};

template <typename Real>
BranchParams<Real> init_branch(std::int64_t channels, std::int64_t reduce_dim,
                               std::int64_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  BranchParams<Real> b;
  auto draw = [&rng](Shape shape, std::int64_t fan_in) {
    const Real sigma = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    std::vector<Real> v(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& x : v) x = static_cast<Real>(rng.normal()) * sigma;
    return Tensor<Real>(std::move(shape), std::move(v), true);
  };
  b.reduce_weight = draw({channels, reduce_dim}, channels);
  b.reduce_bias = Tensor<Real>::zeros({reduce_dim}, true);
  b.gamma = Tensor<Real>::full({reduce_dim}, Real(1), true);
  b.beta = Tensor<Real>::zeros({reduce_dim}, true);
  b.bn_state = BatchNormState<Real>::init(reduce_dim);
  b.cls_weight = draw({reduce_dim, num_classes}, reduce_dim);
  b.cls_bias = Tensor<Real>::zeros({num_classes}, true);
  return b;
}

/// Builds p+1 independent branches (or fewer when a side is disabled; the
/// caller strips what it does not train).
template <typename Real>
HeadParams<Real> init_head(std::int64_t channels, std::int64_t num_classes,
                           const PartitionScheme& scheme, std::int64_t reduce_dim,
                           std::uint64_t seed, bool with_global = true, bool with_parts = true) {
  if (num_classes < 2) {
    throw DataError("head: need at least two classes, got " + std::to_string(num_classes));
  }
  HeadParams<Real> head;
  head.reduce_dim = reduce_dim;
  head.num_classes = num_classes;
  head.has_global = with_global;
  if (with_global) {
    head.global = init_branch<Real>(channels, reduce_dim, num_classes,
                                    derive_seed(seed, 0x68656164ull, 0));
  }
  if (with_parts) {
    for (int l = 1; l <= scheme.parts(); ++l) {
      head.parts.push_back(init_branch<Real>(channels, reduce_dim, num_classes,
                                             derive_seed(seed, 0x68656164ull,
                                                         static_cast<std::uint64_t>(l))));
    }
  }
  return head;
}

template <typename Real>
Tensor<Real> branch_logits(const Tensor<Real>& pooled, BranchParams<Real>& branch, Mode mode,
                           double dropout_rate, std::uint64_t dropout_seed,
                           Real bn_momentum = Real(0.1), Real bn_eps = Real(1e-5)) {
  Tensor<Real> x = linear(pooled, branch.reduce_weight, branch.reduce_bias);
  x = batch_norm(x, branch.gamma, branch.beta, branch.bn_state, mode, bn_momentum, bn_eps);
  x = dropout(x, dropout_rate, mode, dropout_seed);
  return linear(x, branch.cls_weight, branch.cls_bias);
}

/// Logits for every configured branch, global first then parts 1..p. The
/// dropout mask of each branch draws from its own derived seed stream.
template <typename Real>
std::vector<Tensor<Real>> train_forward(const Tensor<Real>& t, const PartitionScheme& scheme,
                                        HeadParams<Real>& head, Mode mode, std::uint64_t seed,
                                        double dropout_rate = 0.5,
                                        Real bn_momentum = Real(0.1), Real bn_eps = Real(1e-5)) {
  PooledFeatures<Real> pooled = pool_features(t, scheme);
  if (!head.parts.empty() &&
      head.parts.size() != static_cast<std::size_t>(scheme.parts())) {
    throw ShapeError("head: " + std::to_string(head.parts.size()) + " part branches for a " +
                     std::to_string(scheme.parts()) + "-part scheme");
  }
  std::vector<Tensor<Real>> logits;
  if (head.has_global) {
    logits.push_back(branch_logits(pooled.global, head.global, mode, dropout_rate,
                                   derive_seed(seed, 0x64726f70ull, 0), bn_momentum, bn_eps));
  }
  for (std::size_t l = 0; l < head.parts.size(); ++l) {
    logits.push_back(branch_logits(pooled.locals[l], head.parts[l], mode, dropout_rate,
                                   derive_seed(seed, 0x64726f70ull, l + 1), bn_momentum, bn_eps));
  }
  return logits;
}

/// Retrieval descriptor: the raw pooled C-dimensional features concatenated
/// as (global, part 1, ..., part p), one row per sample. The 512-d reduction
/// never enters here. `with_global` / `with_parts` select which blocks the
/// descriptor carries so branch-disabled models stay comparable.
template <typename Real>
Tensor<Real> extract_descriptor(const Tensor<Real>& t, const PartitionScheme& scheme,
                                bool with_global = true, bool with_parts = true) {
  NoGradGuard guard;
  PooledFeatures<Real> pooled = pool_features(t, scheme);
  const std::int64_t n = t.extent(0), c = t.extent(1);
  std::vector<const Tensor<Real>*> blocks;
  if (with_global) blocks.push_back(&pooled.global);
  if (with_parts) {
    for (const auto& f : pooled.locals) blocks.push_back(&f);
  }
  if (blocks.empty()) throw ShapeError("descriptor: no branch enabled");
  const std::int64_t dim = static_cast<std::int64_t>(blocks.size()) * c;
  std::vector<Real> rows(static_cast<std::size_t>(n * dim));
  for (std::int64_t i = 0; i < n; ++i) {
    Real* dst = rows.data() + i * dim;
    for (const Tensor<Real>* block : blocks) {
      const Real* src = block->data().data() + i * c;
      std::copy(src, src + c, dst);
      dst += c;
    }
  }
  return Tensor<Real>({n, dim}, std::move(rows));
}

}  // namespace gpanet
