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

// Differentiable tensor operations: the forward kernels and their recorded
// backward closures. All kernels are plain row-major loops; loop bounds for
// the padded convolution are precomputed per kernel offset so the inner
// loops stay branch-free.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "gpanet/errors.hpp"
#include "gpanet/rng.hpp"
#include "gpanet/tensor.hpp"
#include "gpanet/threads.hpp"

namespace gpanet {

namespace detail {

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace detail

/// 2D cross-correlation of an NCHW input with an OCKK kernel, plus bias.
/// Output spatial extent is floor((H + 2*padding - K) / stride) + 1.
template <typename Real>
Tensor<Real> conv2d(const Tensor<Real>& input, const Tensor<Real>& weight,
                    const Tensor<Real>& bias, int stride, int padding) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw ShapeError("conv2d: expected NCHW input and OCKK weight, got " +
                     shape_str(input.shape()) + " and " + shape_str(weight.shape()));
  }
  const std::int64_t n = input.extent(0), c = input.extent(1);
  const std::int64_t h = input.extent(2), w = input.extent(3);
  const std::int64_t oc = weight.extent(0), kh = weight.extent(2), kw = weight.extent(3);
  if (weight.extent(1) != c) {
    throw ShapeError("conv2d: input channels " + shape_str(input.shape()) +
                     " do not match weight " + shape_str(weight.shape()));
  }
  if (bias.rank() != 1 || bias.extent(0) != oc) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be positive, got " + std::to_string(stride));
  if (padding < 0) throw ShapeError("conv2d: padding must be nonnegative, got " + std::to_string(padding));
  const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;
  if (h + 2 * padding < kh || w + 2 * padding < kw || oh < 1 || ow < 1) {
    throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) +
                     " does not fit padded input " + shape_str(input.shape()));
  }

  const Real* x = input.data().data();
  const Real* wt = weight.data().data();
  const Real* b = bias.data().data();
  std::vector<Real> out(static_cast<std::size_t>(n * oc * oh * ow));

  const std::int64_t s = stride, p = padding;
  // Valid output ranges per kernel offset: ih = ohi*s - p + ki must be in [0, h).
  auto bounds = [s, p](std::int64_t ki, std::int64_t extent, std::int64_t out_extent) {
    const std::int64_t lo = std::max<std::int64_t>(0, detail::ceil_div(p - ki, s));
    const std::int64_t hi = std::min<std::int64_t>(out_extent - 1, detail::floor_div(extent - 1 + p - ki, s));
    return std::pair<std::int64_t, std::int64_t>(lo, hi);
  };

  // One task per output plane; tasks write disjoint planes, so threading
  // never changes the result.
  parallel_for(n * oc, [&](std::int64_t plane) {
    const std::int64_t ni = plane / oc, oi = plane % oc;
    Real* oplane = out.data() + plane * oh * ow;
    std::fill(oplane, oplane + oh * ow, b[oi]);
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const Real* iplane = x + ((ni * c + ci) * h) * w;
      for (std::int64_t ki = 0; ki < kh; ++ki) {
        const auto [oh_lo, oh_hi] = bounds(ki, h, oh);
        for (std::int64_t kj = 0; kj < kw; ++kj) {
          const Real wv = wt[((oi * c + ci) * kh + ki) * kw + kj];
          const auto [ow_lo, ow_hi] = bounds(kj, w, ow);
          for (std::int64_t ohi = oh_lo; ohi <= oh_hi; ++ohi) {
            const Real* irow = iplane + (ohi * s - p + ki) * w + (ow_lo * s - p + kj);
            Real* orow = oplane + ohi * ow + ow_lo;
            const std::int64_t len = ow_hi - ow_lo + 1;
            if (s == 1) {
              for (std::int64_t t = 0; t < len; ++t) orow[t] += wv * irow[t];
            } else {
              for (std::int64_t t = 0; t < len; ++t) orow[t] += wv * irow[t * s];
            }
          }
        }
      }
    }
  });

  auto backward = [n, c, h, w, oc, kh, kw, oh, ow, s, p, bounds](detail::Node<Real>& self) {
    const Real* g = self.grad.data();
    const Real* x = self.inputs[0]->value.data();
    const Real* wt = self.inputs[1]->value.data();
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    std::vector<Real>* gw = detail::grad_sink(self, 1);
    std::vector<Real>* gb = detail::grad_sink(self, 2);
    if (gb) {
      parallel_for(oc, [&](std::int64_t oi) {
        for (std::int64_t ni = 0; ni < n; ++ni) {
          const Real* gplane = g + ((ni * oc + oi) * oh) * ow;
          Real acc = 0;
          for (std::int64_t t = 0; t < oh * ow; ++t) acc += gplane[t];
          (*gb)[static_cast<std::size_t>(oi)] += acc;
        }
      });
    }
    if (gx) {
      // One task per sample: each owns its input-gradient planes.
      parallel_for(n, [&](std::int64_t ni) {
        for (std::int64_t oi = 0; oi < oc; ++oi) {
          const Real* gplane = g + ((ni * oc + oi) * oh) * ow;
          for (std::int64_t ci = 0; ci < c; ++ci) {
            Real* gip = gx->data() + ((ni * c + ci) * h) * w;
            for (std::int64_t ki = 0; ki < kh; ++ki) {
              const auto [oh_lo, oh_hi] = bounds(ki, h, oh);
              for (std::int64_t kj = 0; kj < kw; ++kj) {
                const Real wv = wt[((oi * c + ci) * kh + ki) * kw + kj];
                const auto [ow_lo, ow_hi] = bounds(kj, w, ow);
                for (std::int64_t ohi = oh_lo; ohi <= oh_hi; ++ohi) {
                  Real* girow = gip + (ohi * s - p + ki) * w + (ow_lo * s - p + kj);
                  const Real* grow = gplane + ohi * ow + ow_lo;
                  const std::int64_t len = ow_hi - ow_lo + 1;
                  if (s == 1) {
                    for (std::int64_t t = 0; t < len; ++t) girow[t] += wv * grow[t];
                  } else {
                    for (std::int64_t t = 0; t < len; ++t) girow[t * s] += wv * grow[t];
                  }
                }
              }
            }
          }
        }
      });
    }
    if (gw) {
      // One task per (out-channel, in-channel) weight slice.
      parallel_for(oc * c, [&](std::int64_t slice) {
        const std::int64_t oi = slice / c, ci = slice % c;
        for (std::int64_t ki = 0; ki < kh; ++ki) {
          const auto [oh_lo, oh_hi] = bounds(ki, h, oh);
          for (std::int64_t kj = 0; kj < kw; ++kj) {
            const auto [ow_lo, ow_hi] = bounds(kj, w, ow);
            Real acc = 0;
            for (std::int64_t ni = 0; ni < n; ++ni) {
              const Real* gplane = g + ((ni * oc + oi) * oh) * ow;
              const Real* iplane = x + ((ni * c + ci) * h) * w;
              for (std::int64_t ohi = oh_lo; ohi <= oh_hi; ++ohi) {
                const Real* irow = iplane + (ohi * s - p + ki) * w + (ow_lo * s - p + kj);
                const Real* grow = gplane + ohi * ow + ow_lo;
                const std::int64_t len = ow_hi - ow_lo + 1;
                if (s == 1) {
                  for (std::int64_t t = 0; t < len; ++t) acc += grow[t] * irow[t];
                } else {
                  for (std::int64_t t = 0; t < len; ++t) acc += grow[t] * irow[t * s];
                }
              }
            }
            (*gw)[static_cast<std::size_t>((slice * kh + ki) * kw + kj)] += acc;
          }
        }
      });
    }
  };

  return detail::make_op<Real>("conv2d", {n, oc, oh, ow}, std::move(out),
                               {input.node_ptr(), weight.node_ptr(), bias.node_ptr()},
                               std::move(backward));
}

/// Mean over the spatial rectangle rows [r0, r1) x cols [c0, c1), per sample
/// and channel. Backward spreads the gradient uniformly over the rectangle.
template <typename Real>
Tensor<Real> region_avg_pool(const Tensor<Real>& input, std::int64_t r0, std::int64_t r1,
                             std::int64_t c0, std::int64_t c1) {
  if (input.rank() != 4) {
    throw ShapeError("region_avg_pool: expected NCHW input, got " + shape_str(input.shape()));
  }
  const std::int64_t n = input.extent(0), c = input.extent(1);
  const std::int64_t h = input.extent(2), w = input.extent(3);
  if (r0 < 0 || c0 < 0 || r0 >= r1 || c0 >= c1 || r1 > h || c1 > w) {
    throw ShapeError("region_avg_pool: range rows [" + std::to_string(r0) + "," +
                     std::to_string(r1) + ") cols [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for input " + shape_str(input.shape()));
  }
  const Real area = static_cast<Real>((r1 - r0) * (c1 - c0));
  const Real* x = input.data().data();
  std::vector<Real> out(static_cast<std::size_t>(n * c));
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t ci = 0; ci < c; ++ci) {
      const Real* plane = x + ((ni * c + ci) * h) * w;
      Real acc = 0;
      for (std::int64_t r = r0; r < r1; ++r)
        for (std::int64_t cc = c0; cc < c1; ++cc) acc += plane[r * w + cc];
      out[static_cast<std::size_t>(ni * c + ci)] = acc / area;
    }

  auto backward = [n, c, h, w, r0, r1, c0, c1, area](detail::Node<Real>& self) {
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    if (!gx) return;
    const Real* g = self.grad.data();
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t ci = 0; ci < c; ++ci) {
        const Real share = g[ni * c + ci] / area;
        Real* plane = gx->data() + ((ni * c + ci) * h) * w;
        for (std::int64_t r = r0; r < r1; ++r)
          for (std::int64_t cc = c0; cc < c1; ++cc) plane[r * w + cc] += share;
      }
  };

  return detail::make_op<Real>("region_avg_pool", {n, c}, std::move(out), {input.node_ptr()},
                               std::move(backward));
}

/// Affine map: out = input * weight + bias, input N x D, weight D x E.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& input, const Tensor<Real>& weight,
                    const Tensor<Real>& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || input.extent(1) != weight.extent(0)) {
    throw ShapeError("linear: inner dimensions disagree, input " + shape_str(input.shape()) +
                     " vs weight " + shape_str(weight.shape()));
  }
  const std::int64_t n = input.extent(0), d = input.extent(1), e = weight.extent(1);
  if (bias.rank() != 1 || bias.extent(0) != e) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(weight.shape()));
  }
  const Real* x = input.data().data();
  const Real* wt = weight.data().data();
  const Real* b = bias.data().data();
  std::vector<Real> out(static_cast<std::size_t>(n * e));
  for (std::int64_t i = 0; i < n; ++i) {
    Real* orow = out.data() + i * e;
    std::copy(b, b + e, orow);
    for (std::int64_t k = 0; k < d; ++k) {
      const Real xv = x[i * d + k];
      const Real* wrow = wt + k * e;
      for (std::int64_t j = 0; j < e; ++j) orow[j] += xv * wrow[j];
    }
  }

  auto backward = [n, d, e](detail::Node<Real>& self) {
    const Real* g = self.grad.data();
    const Real* x = self.inputs[0]->value.data();
    const Real* wt = self.inputs[1]->value.data();
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    std::vector<Real>* gw = detail::grad_sink(self, 1);
    std::vector<Real>* gb = detail::grad_sink(self, 2);
    if (gx) {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t k = 0; k < d; ++k) {
          const Real* grow = g + i * e;
          const Real* wrow = wt + k * e;
          Real acc = 0;
          for (std::int64_t j = 0; j < e; ++j) acc += grow[j] * wrow[j];
          (*gx)[static_cast<std::size_t>(i * d + k)] += acc;
        }
    }
    if (gw) {
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t k = 0; k < d; ++k) {
          const Real xv = x[i * d + k];
          const Real* grow = g + i * e;
          Real* gwrow = gw->data() + k * e;
          for (std::int64_t j = 0; j < e; ++j) gwrow[j] += xv * grow[j];
        }
    }
    if (gb) {
      for (std::int64_t i = 0; i < n; ++i) {
        const Real* grow = g + i * e;
        for (std::int64_t j = 0; j < e; ++j) (*gb)[static_cast<std::size_t>(j)] += grow[j];
      }
    }
  };

  return detail::make_op<Real>("linear", {n, e}, std::move(out),
                               {input.node_ptr(), weight.node_ptr(), bias.node_ptr()},
                               std::move(backward));
}

/// Running first/second moments for batch normalization.
template <typename Real>
struct BatchNormState {
  std::vector<Real> running_mean;
  std::vector<Real> running_var;

  static BatchNormState init(std::int64_t features) {
    BatchNormState s;
    s.running_mean.assign(static_cast<std::size_t>(features), Real(0));
    s.running_var.assign(static_cast<std::size_t>(features), Real(1));
    return s;
  }
};

/// Batch normalization over N x D (per feature) or NCHW (per channel).
/// Train mode normalizes by batch statistics (biased variance) and updates
/// the running stats: r <- (1 - momentum) * r + momentum * batch_stat, with
/// the unbiased variance entering the running average. Eval mode normalizes
/// by the running stats.
template <typename Real>
Tensor<Real> batch_norm(const Tensor<Real>& input, const Tensor<Real>& gamma,
                        const Tensor<Real>& beta, BatchNormState<Real>& state, Mode mode,
                        Real momentum = Real(0.1), Real eps = Real(1e-5)) {
  if (input.rank() != 2 && input.rank() != 4) {
    throw ShapeError("batch_norm: expected NxD or NCHW input, got " + shape_str(input.shape()));
  }
  const std::int64_t n = input.extent(0);
  const std::int64_t f = input.extent(1);
  const std::int64_t spatial = input.rank() == 4 ? input.extent(2) * input.extent(3) : 1;
  if (gamma.numel() != f || beta.numel() != f ||
      static_cast<std::int64_t>(state.running_mean.size()) != f ||
      static_cast<std::int64_t>(state.running_var.size()) != f) {
    throw ShapeError("batch_norm: parameter size does not match " + std::to_string(f) +
                     " features (input " + shape_str(input.shape()) + ")");
  }
  if (mode == Mode::train && n < 2) {
    throw NumericError("batch_norm: train mode requires batch size >= 2, got " + std::to_string(n));
  }
  const std::int64_t m = n * spatial;  // reduction count per feature
  const Real* x = input.data().data();
  const Real* gm = gamma.data().data();
  const Real* bt = beta.data().data();

  std::vector<Real> mean(static_cast<std::size_t>(f));
  std::vector<Real> var(static_cast<std::size_t>(f));
  if (mode == Mode::train) {
    for (std::int64_t fi = 0; fi < f; ++fi) {
      Real acc = 0;
      for (std::int64_t ni = 0; ni < n; ++ni) {
        const Real* base = x + (ni * f + fi) * spatial;
        for (std::int64_t t = 0; t < spatial; ++t) acc += base[t];
      }
      mean[static_cast<std::size_t>(fi)] = acc / static_cast<Real>(m);
    }
    for (std::int64_t fi = 0; fi < f; ++fi) {
      const Real mu = mean[static_cast<std::size_t>(fi)];
      Real acc = 0;
      for (std::int64_t ni = 0; ni < n; ++ni) {
        const Real* base = x + (ni * f + fi) * spatial;
        for (std::int64_t t = 0; t < spatial; ++t) {
          const Real d = base[t] - mu;
          acc += d * d;
        }
      }
      var[static_cast<std::size_t>(fi)] = acc / static_cast<Real>(m);
    }
    const Real unbias = m > 1 ? static_cast<Real>(m) / static_cast<Real>(m - 1) : Real(1);
    for (std::int64_t fi = 0; fi < f; ++fi) {
      auto i = static_cast<std::size_t>(fi);
      state.running_mean[i] = (Real(1) - momentum) * state.running_mean[i] + momentum * mean[i];
      state.running_var[i] = (Real(1) - momentum) * state.running_var[i] + momentum * var[i] * unbias;
    }
  } else {
    mean.assign(state.running_mean.begin(), state.running_mean.end());
    var.assign(state.running_var.begin(), state.running_var.end());
  }

  std::vector<Real> inv_std(static_cast<std::size_t>(f));
  for (std::int64_t fi = 0; fi < f; ++fi) {
    inv_std[static_cast<std::size_t>(fi)] =
        Real(1) / std::sqrt(var[static_cast<std::size_t>(fi)] + eps);
  }

  std::vector<Real> xhat(input.data().size());
  std::vector<Real> out(input.data().size());
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t fi = 0; fi < f; ++fi) {
      const auto i = static_cast<std::size_t>(fi);
      const Real* base = x + (ni * f + fi) * spatial;
      Real* xh = xhat.data() + (ni * f + fi) * spatial;
      Real* o = out.data() + (ni * f + fi) * spatial;
      for (std::int64_t t = 0; t < spatial; ++t) {
        xh[t] = (base[t] - mean[i]) * inv_std[i];
        o[t] = gm[i] * xh[t] + bt[i];
      }
    }

  const bool train_stats = mode == Mode::train;
  auto backward = [n, f, spatial, m, train_stats, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](detail::Node<Real>& self) {
    const Real* g = self.grad.data();
    const Real* gm = self.inputs[1]->value.data();
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    std::vector<Real>* gg = detail::grad_sink(self, 1);
    std::vector<Real>* gb = detail::grad_sink(self, 2);
    std::vector<Real> sum_g(static_cast<std::size_t>(f), Real(0));
    std::vector<Real> sum_gx(static_cast<std::size_t>(f), Real(0));
    for (std::int64_t ni = 0; ni < n; ++ni)
      for (std::int64_t fi = 0; fi < f; ++fi) {
        const auto i = static_cast<std::size_t>(fi);
        const Real* grow = g + (ni * f + fi) * spatial;
        const Real* xh = xhat.data() + (ni * f + fi) * spatial;
        for (std::int64_t t = 0; t < spatial; ++t) {
          sum_g[i] += grow[t];
          sum_gx[i] += grow[t] * xh[t];
        }
      }
    if (gg) {
      for (std::int64_t fi = 0; fi < f; ++fi)
        (*gg)[static_cast<std::size_t>(fi)] += sum_gx[static_cast<std::size_t>(fi)];
    }
    if (gb) {
      for (std::int64_t fi = 0; fi < f; ++fi)
        (*gb)[static_cast<std::size_t>(fi)] += sum_g[static_cast<std::size_t>(fi)];
    }
    if (gx) {
      const Real mr = static_cast<Real>(m);
      for (std::int64_t ni = 0; ni < n; ++ni)
        for (std::int64_t fi = 0; fi < f; ++fi) {
          const auto i = static_cast<std::size_t>(fi);
          const Real* grow = g + (ni * f + fi) * spatial;
          const Real* xh = xhat.data() + (ni * f + fi) * spatial;
          Real* gxrow = gx->data() + (ni * f + fi) * spatial;
          const Real scale = gm[i] * inv_std[i];
          if (train_stats) {
            for (std::int64_t t = 0; t < spatial; ++t) {
              gxrow[t] += scale * (grow[t] - sum_g[i] / mr - xh[t] * sum_gx[i] / mr);
            }
          } else {
            for (std::int64_t t = 0; t < spatial; ++t) gxrow[t] += scale * grow[t];
          }
        }
    }
  };

  return detail::make_op<Real>("batch_norm", input.shape(), std::move(out),
                               {input.node_ptr(), gamma.node_ptr(), beta.node_ptr()},
                               std::move(backward));
}

template <typename Real>
Tensor<Real> relu(const Tensor<Real>& input) {
  std::vector<Real> out(input.data().size());
  const Real* x = input.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > Real(0) ? x[i] : Real(0);
  auto backward = [](detail::Node<Real>& self) {
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    if (!gx) return;
    const Real* x = self.inputs[0]->value.data();
    const Real* g = self.grad.data();
    for (std::size_t i = 0; i < gx->size(); ++i)
      if (x[i] > Real(0)) (*gx)[i] += g[i];
  };
  return detail::make_op<Real>("relu", input.shape(), std::move(out), {input.node_ptr()},
                               std::move(backward));
}

/// Row-wise softmax of an N x K matrix, stabilized by the row maximum.
template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& input) {
  if (input.rank() != 2) {
    throw ShapeError("softmax: expected NxK input, got " + shape_str(input.shape()));
  }
  const std::int64_t n = input.extent(0), k = input.extent(1);
  const Real* x = input.data().data();
  std::vector<Real> out(input.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    const Real* row = x + i * k;
    Real* orow = out.data() + i * k;
    Real mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    Real denom = 0;
    for (std::int64_t j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    for (std::int64_t j = 0; j < k; ++j) orow[j] /= denom;
  }
  auto backward = [n, k](detail::Node<Real>& self) {
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    if (!gx) return;
    const Real* p = self.value.data();
    const Real* g = self.grad.data();
    for (std::int64_t i = 0; i < n; ++i) {
      const Real* prow = p + i * k;
      const Real* grow = g + i * k;
      Real dot = 0;
      for (std::int64_t j = 0; j < k; ++j) dot += prow[j] * grow[j];
      Real* gxrow = gx->data() + i * k;
      for (std::int64_t j = 0; j < k; ++j) gxrow[j] += prow[j] * (grow[j] - dot);
    }
  };
  return detail::make_op<Real>("softmax", input.shape(), std::move(out), {input.node_ptr()},
                               std::move(backward));
}

/// Inverted dropout: train mode zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity. The mask is a
/// pure function of the seed.
template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& input, double rate, Mode mode, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0) {
    throw NumericError("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return input;
  Rng rng(seed);
  const Real scale = static_cast<Real>(1.0 / (1.0 - rate));
  std::vector<Real> mask(input.data().size());
  for (auto& mv : mask) mv = rng.bernoulli(rate) ? Real(0) : scale;
  const Real* x = input.data().data();
  std::vector<Real> out(input.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  auto backward = [mask = std::move(mask)](detail::Node<Real>& self) {
    std::vector<Real>* gx = detail::grad_sink(self, 0);
    if (!gx) return;
    const Real* g = self.grad.data();
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g[i] * mask[i];
  };
  return detail::make_op<Real>("dropout", input.shape(), std::move(out), {input.node_ptr()},
                               std::move(backward));
}

/// Elementwise sum of two same-shape tensors.
template <typename Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<Real> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto backward = [](detail::Node<Real>& self) {
    const Real* g = self.grad.data();
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (std::vector<Real>* gs = detail::grad_sink(self, slot)) {
        for (std::size_t i = 0; i < gs->size(); ++i) (*gs)[i] += g[i];
      }
    }
  };
  return detail::make_op<Real>("add", a.shape(), std::move(out),
                               {a.node_ptr(), b.node_ptr()}, std::move(backward));
}

/// Elementwise product of two same-shape tensors.
template <typename Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<Real> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto backward = [](detail::Node<Real>& self) {
    const Real* g = self.grad.data();
    const Real* av = self.inputs[0]->value.data();
    const Real* bv = self.inputs[1]->value.data();
    if (std::vector<Real>* ga = detail::grad_sink(self, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (std::vector<Real>* gb = detail::grad_sink(self, 1)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  };
  return detail::make_op<Real>("mul", a.shape(), std::move(out), {a.node_ptr(), b.node_ptr()},
                               std::move(backward));
}

template <typename Real>
Tensor<Real> scale(const Tensor<Real>& a, Real factor) {
  std::vector<Real> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  auto backward = [factor](detail::Node<Real>& self) {
    if (std::vector<Real>* ga = detail::grad_sink(self, 0)) {
      const Real* g = self.grad.data();
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g[i] * factor;
    }
  };
  return detail::make_op<Real>("scale", a.shape(), std::move(out), {a.node_ptr()},
                               std::move(backward));
}

/// Sum of all entries, as a scalar.
template <typename Real>
Tensor<Real> sum_all(const Tensor<Real>& a) {
  Real acc = 0;
  for (const Real v : a.data()) acc += v;
  auto backward = [](detail::Node<Real>& self) {
    if (std::vector<Real>* ga = detail::grad_sink(self, 0)) {
      const Real g = self.grad[0];
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
    }
  };
  return detail::make_op<Real>("sum_all", {1}, std::vector<Real>{acc}, {a.node_ptr()},
                               std::move(backward));
}

}  // namespace gpanet
