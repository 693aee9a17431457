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

#include <string>
#include <vector>

#include "gpanet/grad_check.hpp"
#include "gpanet/ops.hpp"
#include "gpanet/rng.hpp"
#include "gpanet/training.hpp"

namespace gpanet {

struct GradSuiteEntry {
  std::string op;
  double max_rel_err = 0;
};

namespace detail {

inline TensorD rand_leaf(Rng& rng, const Shape& shape, bool requires_grad,
                         double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TensorD(shape, std::move(v), requires_grad);
}

/// Random fixed weights pull every output element into the scalar with a
/// distinct coefficient, so index mix-ups cannot cancel.
inline TensorD weighted_sum(const TensorD& out, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(shape_numel(out.shape())));
  for (auto& x : w) x = rng.uniform(0.25, 1.75);
  TensorD mask(out.shape(), std::move(w));
  return sum_all(mul(out, mask));
}

}  // namespace detail

/// Finite-difference checks for every differentiable building block, in
/// double precision. Each entry reports the worst relative error across the
/// op's inputs.
inline std::vector<GradSuiteEntry> grad_check_suite(std::uint64_t seed = 42) {
  using detail::rand_leaf;
  using detail::weighted_sum;
  std::vector<GradSuiteEntry> results;

  auto run = [&results](const std::string& op, std::vector<TensorD*> params,
                        const std::function<TensorD()>& build) {
    GradSuiteEntry entry{op, 0};
    for (TensorD* p : params) {
      entry.max_rel_err = std::max(entry.max_rel_err, grad_check<double>(build, *p));
    }
    results.push_back(entry);
  };

  {
    Rng rng(derive_seed(seed, 1));
    TensorD x = rand_leaf(rng, {2, 3, 5, 5}, true);
    TensorD w = rand_leaf(rng, {4, 3, 3, 3}, true);
    TensorD b = rand_leaf(rng, {4}, true);
    Rng mask_rng(derive_seed(seed, 2));
    TensorD mask = detail::rand_leaf(mask_rng, {2, 4, 3, 3}, false, 0.25, 1.75);
    run("conv2d", {&x, &w, &b},
        [&] { return sum_all(mul(conv2d(x, w, b, 2, 1), mask)); });
  }
  {
    Rng rng(derive_seed(seed, 3));
    TensorD x = rand_leaf(rng, {4, 6}, true);
    TensorD w = rand_leaf(rng, {6, 3}, true);
    TensorD b = rand_leaf(rng, {3}, true);
    Rng mask_rng(derive_seed(seed, 4));
    TensorD mask = detail::rand_leaf(mask_rng, {4, 3}, false, 0.25, 1.75);
    run("linear", {&x, &w, &b}, [&] { return sum_all(mul(linear(x, w, b), mask)); });
  }
  {
    Rng rng(derive_seed(seed, 5));
    TensorD x = rand_leaf(rng, {3, 4, 2, 2}, true);
    TensorD gamma = rand_leaf(rng, {4}, true, 0.5, 1.5);
    TensorD beta = rand_leaf(rng, {4}, true);
    BatchNormState<double> state = BatchNormState<double>::init(4);
    Rng mask_rng(derive_seed(seed, 6));
    TensorD mask = detail::rand_leaf(mask_rng, {3, 4, 2, 2}, false, 0.25, 1.75);
    run("batch_norm", {&x, &gamma, &beta}, [&] {
      BatchNormState<double> fresh = state;
      return sum_all(mul(batch_norm(x, gamma, beta, fresh, Mode::train), mask));
    });
  }
  {
    Rng rng(derive_seed(seed, 7));
    std::vector<double> v(static_cast<std::size_t>(shape_numel({3, 4, 2, 2})));
    for (auto& x : v) {
      const double m = rng.uniform(0.2, 1.0);
      x = rng.bernoulli(0.5) ? m : -m;
    }
    TensorD x({3, 4, 2, 2}, std::move(v), true);
    Rng mask_rng(derive_seed(seed, 8));
    TensorD mask = detail::rand_leaf(mask_rng, {3, 4, 2, 2}, false, 0.25, 1.75);
    run("relu", {&x}, [&] { return sum_all(mul(relu(x), mask)); });
  }
  {
    Rng rng(derive_seed(seed, 9));
    TensorD x = rand_leaf(rng, {3, 7}, true, -2.0, 2.0);
    Rng mask_rng(derive_seed(seed, 10));
    TensorD mask = detail::rand_leaf(mask_rng, {3, 7}, false, 0.25, 1.75);
    run("softmax", {&x}, [&] { return sum_all(mul(softmax(x), mask)); });
  }
  {
    Rng rng(derive_seed(seed, 11));
    TensorD x = rand_leaf(rng, {2, 3, 6, 6}, true);
    Rng mask_rng(derive_seed(seed, 12));
    TensorD mask = detail::rand_leaf(mask_rng, {2, 3}, false, 0.25, 1.75);
    run("region_avg_pool", {&x},
        [&] { return sum_all(mul(region_avg_pool(x, 1, 4, 0, 3), mask)); });
  }
  {
    Rng rng(derive_seed(seed, 13));
    TensorD g = rand_leaf(rng, {4, 5}, true, -1.5, 1.5);
    TensorD l1 = rand_leaf(rng, {4, 5}, true, -1.5, 1.5);
    TensorD l2 = rand_leaf(rng, {4, 5}, true, -1.5, 1.5);
    const std::vector<std::int64_t> labels{0, 2, 4, 1};
    LossConfig cfg;
    cfg.lambda = 1.0;
    cfg.epsilon = 0.1;
    run("total_loss", {&g, &l1, &l2},
        [&] { return total_loss<double>(g, {l1, l2}, labels, cfg); });
  }
  return results;
}

}  // namespace gpanet
