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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gpanet/datasets.hpp"
#include "gpanet/errors.hpp"
#include "gpanet/model.hpp"
#include "gpanet/tensor.hpp"

namespace gpanet {

struct LossConfig {
  double lambda = 1.0;
  double epsilon = 0.1;
  std::int64_t num_classes = 0;
};

struct OptimConfig {
  double base_lr = 0.02;
  double backbone_lr_divisor = 10.0;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 5e-4;
  bool decay_bn = true;
  std::int64_t batch_size = 20;
  std::int64_t epochs = 60;
  std::int64_t lr_step = 30;
  double lr_gamma = 0.1;

  void validate() const {
    if (base_lr <= 0 || backbone_lr_divisor <= 0 || lr_step < 1 || batch_size < 2 ||
        epochs < 1 || lr_gamma <= 0 || lr_gamma >= 1 || momentum < 0 || weight_decay < 0) {
      throw DataError("optim: rates must be positive, lr_gamma in (0,1), batch size >= 2");
    }
  }
};

/// Smoothed target distribution: q_y = 1 - eps*(K-1)/K, q_i = eps/K
/// elsewhere. Built so that the naive left-to-right sum is exactly 1: the
/// true-class entry absorbs the rounding residue, and if it sits on a
/// rounding plateau the final entry takes the remainder instead (exact by
/// Sterbenz, since the partial sum is near 1).
template <typename Real>
std::vector<Real> smoothed_targets(std::int64_t y, std::int64_t k, Real eps) {
  if (k < 2) throw DataError("smoothed_targets: need K >= 2, got " + std::to_string(k));
  if (y < 0 || y >= k) {
    throw DataError("smoothed_targets: label " + std::to_string(y) + " out of range for K=" +
                    std::to_string(k));
  }
  if (eps < Real(0) || eps >= Real(1)) {
    throw NumericError("smoothed_targets: epsilon must be in [0,1), got " + std::to_string(eps));
  }
  const Real u = eps / static_cast<Real>(k);
  std::vector<Real> q(static_cast<std::size_t>(k), u);
  q[static_cast<std::size_t>(y)] = (Real(1) - eps) + u;
  auto naive_sum = [&q]() {
    Real s = 0;
    for (const Real v : q) s += v;
    return s;
  };
  for (int iter = 0; iter < 8; ++iter) {
    const Real d = Real(1) - naive_sum();
    if (d == Real(0)) return q;
    q[static_cast<std::size_t>(y)] += d;
  }
  Real partial = 0;
  for (std::int64_t i = 0; i + 1 < k; ++i) partial += q[static_cast<std::size_t>(i)];
  q[static_cast<std::size_t>(k - 1)] = Real(1) - partial;
  return q;
}

/// Mean over the batch of -sum_i q_i log softmax(x)_i with smoothed targets,
/// as one fused op. Backward is (softmax - q) * upstream / N per row.
template <typename Real>
Tensor<Real> smoothed_cross_entropy(const Tensor<Real>& logits,
                                    const std::vector<std::int64_t>& labels, Real eps) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: expected NxK logits, got " + shape_str(logits.shape()));
  }
  const std::int64_t n = logits.extent(0), k = logits.extent(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  const Real* x = logits.data().data();
  std::vector<Real> probs(static_cast<std::size_t>(n * k));
  std::vector<Real> targets(static_cast<std::size_t>(n * k));
  Real loss = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const Real* row = x + i * k;
    Real mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    Real denom = 0;
    for (std::int64_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    const Real lse = mx + std::log(denom);
    const std::vector<Real> q = smoothed_targets<Real>(labels[static_cast<std::size_t>(i)], k, eps);
    Real row_loss = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      probs[static_cast<std::size_t>(i * k + j)] = std::exp(row[j] - lse);
      targets[static_cast<std::size_t>(i * k + j)] = q[static_cast<std::size_t>(j)];
      row_loss -= q[static_cast<std::size_t>(j)] * (row[j] - lse);
    }
    loss += row_loss;
  }
  loss /= static_cast<Real>(n);

  auto backward = [n, k, probs = std::move(probs),
                   targets = std::move(targets)](detail::Node<Real>& self) {
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    if (!gx) return;
    const Real g = self.grad[0] / static_cast<Real>(n);
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += (probs[i] - targets[i]) * g;
  };
  return detail::make_op<Real>("smoothed_cross_entropy", {1}, std::vector<Real>{loss},
                               {logits.node_ptr()}, std::move(backward));
}

/// Combined objective: global cross-entropy plus lambda times the sum of the
/// local-branch cross-entropies, each meaned over the batch.
template <typename Real>
Tensor<Real> total_loss(const Tensor<Real>& global_logits,
                        const std::vector<Tensor<Real>>& local_logits,
                        const std::vector<std::int64_t>& labels, const LossConfig& cfg) {
  if (cfg.lambda < 0) throw NumericError("total_loss: lambda must be nonnegative");
  const std::int64_t n = global_logits.extent(0), k = global_logits.extent(1);
  if (cfg.num_classes > 0 && cfg.num_classes != k) {
    throw ShapeError("total_loss: logits have " + std::to_string(k) + " classes, config says " +
                     std::to_string(cfg.num_classes));
  }
  for (const auto& l : local_logits) {
    if (l.extent(0) != n || l.extent(1) != k) {
      throw ShapeError("total_loss: local logits " + shape_str(l.shape()) +
                       " disagree with global " + shape_str(global_logits.shape()));
    }
  }
  Tensor<Real> loss = smoothed_cross_entropy(global_logits, labels, static_cast<Real>(cfg.epsilon));
  if (!local_logits.empty() && cfg.lambda != 0.0) {
    Tensor<Real> local = smoothed_cross_entropy(local_logits[0], labels,
                                                static_cast<Real>(cfg.epsilon));
    for (std::size_t l = 1; l < local_logits.size(); ++l) {
      local = add(local, smoothed_cross_entropy(local_logits[l], labels,
                                                static_cast<Real>(cfg.epsilon)));
    }
    loss = add(loss, scale(local, static_cast<Real>(cfg.lambda)));
  }
  return loss;
}

/// Lambda-weighted sum of local cross-entropies alone (the training
/// objective when the global branch is disabled).
template <typename Real>
Tensor<Real> local_only_loss(const std::vector<Tensor<Real>>& local_logits,
                             const std::vector<std::int64_t>& labels, const LossConfig& cfg) {
  if (local_logits.empty()) throw ShapeError("local loss: no local logits given");
  Tensor<Real> local = smoothed_cross_entropy(local_logits[0], labels,
                                              static_cast<Real>(cfg.epsilon));
  for (std::size_t l = 1; l < local_logits.size(); ++l) {
    local = add(local, smoothed_cross_entropy(local_logits[l], labels,
                                              static_cast<Real>(cfg.epsilon)));
  }
  return scale(local, static_cast<Real>(cfg.lambda));
}

/// Step-decayed learning rate; the backbone group runs at a fixed divisor of
/// the new-layer rate.
inline double lr_at(std::int64_t epoch, ParamGroup group, const OptimConfig& cfg) {
  const double decayed =
      cfg.base_lr * std::pow(cfg.lr_gamma, static_cast<double>(epoch / cfg.lr_step));
  return group == ParamGroup::backbone ? decayed / cfg.backbone_lr_divisor : decayed;
}

/// One parameter's SGD update. With nesterov: g <- grad + wd*p,
/// v <- mu*v + g, p <- p - lr*(g + mu*v); without, p <- p - lr*v.
template <typename Real>
void sgd_update(std::vector<Real>& param, const std::vector<Real>& grad,
                std::vector<Real>& velocity, Real lr, Real momentum, bool nesterov,
                Real weight_decay) {
  if (param.size() != grad.size() || param.size() != velocity.size()) {
    throw ShapeError("sgd: param/grad/velocity sizes disagree");
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Real g = grad[i] + weight_decay * param[i];
    const Real v = momentum * velocity[i] + g;
    velocity[i] = v;
    param[i] -= lr * (nesterov ? g + momentum * v : v);
  }
}

template <typename Real>
struct SgdState {
  std::map<std::string, std::vector<Real>> velocity;
};

/// Applies one optimizer step over every model parameter and clears the
/// gradients. Parameters untouched by backward are treated as zero-gradient
/// (they still decay).
template <typename Real>
void sgd_step(Model<Real>& model, SgdState<Real>& state, const OptimConfig& cfg,
              std::int64_t epoch) {
  cfg.validate();
  const auto lr_head = static_cast<Real>(lr_at(epoch, ParamGroup::head, cfg));
  const auto lr_backbone = static_cast<Real>(lr_at(epoch, ParamGroup::backbone, cfg));
  for_each_param(model, [&](const std::string& name, Tensor<Real>& p, ParamGroup group) {
    auto& v = state.velocity[name];
    if (v.empty()) v.assign(static_cast<std::size_t>(p.numel()), Real(0));
    const bool bn_param = name.ends_with("bn.gamma") || name.ends_with("bn.beta");
    const Real wd = static_cast<Real>(bn_param && !cfg.decay_bn ? 0.0 : cfg.weight_decay);
    const Real lr = group == ParamGroup::backbone ? lr_backbone : lr_head;
    if (p.has_grad()) {
      sgd_update(p.leaf_data(), p.grad(), v, lr, static_cast<Real>(cfg.momentum), cfg.nesterov,
                 wd);
    } else {
      const std::vector<Real> zeros(static_cast<std::size_t>(p.numel()), Real(0));
      sgd_update(p.leaf_data(), zeros, v, lr, static_cast<Real>(cfg.momentum), cfg.nesterov, wd);
    }
    p.zero_grad();
  });
}

struct EpochStats {
  std::int64_t epoch = 0;
  double mean_total_loss = 0;
  double mean_global_loss = 0;
  double mean_local_loss = 0;
  double val_rank1 = 0;
  double lr_new = 0;
  double lr_backbone = 0;
};

struct TrainOptions {
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  std::uint64_t seed = 7;
  double jitter = 0.2;
  double flip_prob = 0.5;
};

struct TrainResult {
  Model<float> model;
  NormStats norm;
  std::vector<EpochStats> log;
};

/// Full training run over a protocol's train split: per-epoch reshuffle,
/// augmented batches, the combined objective, SGD steps, and a per-epoch
/// validation rank-1 probe (validation images queried against the train
/// images).
TrainResult train_model(const EvalProtocol& protocol, const std::string& image_root,
                        const TrainOptions& opts);

/// Writes the per-epoch table as delimited text. `header_lines` go first,
/// each prefixed with '#'.
void write_training_log(const std::string& path, const std::vector<EpochStats>& log,
                        const std::vector<std::string>& header_lines);

}  // namespace gpanet
