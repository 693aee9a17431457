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
#include <functional>

#include "gpanet/errors.hpp"
#include "gpanet/tensor.hpp"

namespace gpanet {

/// Compares the reverse-mode gradient of `param` against central finite
/// differences of the scalar returned by `build`. `build` must construct the
/// graph from its leaves on every call so that perturbed parameter values
/// propagate. Returns the worst relative error
///   max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8).
template <typename Real>
Real grad_check(const std::function<Tensor<Real>()>& build, Tensor<Real>& param,
                Real step = Real(1e-5)) {
  if (!param.requires_grad()) {
    throw NumericError("grad_check: parameter does not require gradients");
  }
  param.zero_grad();
  Tensor<Real> loss = build();
  loss.backward();
  const std::vector<Real> analytic = param.grad();

  std::vector<Real>& values = param.leaf_data();
  Real worst = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Real saved = values[i];
    values[i] = saved + step;
    Real plus;
    {
      NoGradGuard guard;
      plus = build().item();
    }
    values[i] = saved - step;
    Real minus;
    {
      NoGradGuard guard;
      minus = build().item();
    }
    values[i] = saved;
    const Real numeric = (plus - minus) / (Real(2) * step);
    const Real a = analytic[i];
    const Real denom = std::max({std::abs(a), std::abs(numeric), Real(1e-8)});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace gpanet
