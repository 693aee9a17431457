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
#include <thread>
#include <vector>

#include "gpanet/errors.hpp"

namespace gpanet {

namespace detail {
inline int& thread_count_ref() {
  static int count = 1;
  return count;
}
}  // namespace detail

inline int thread_count() { return detail::thread_count_ref(); }

inline void set_thread_count(int n) {
  if (n < 1) throw NumericError("set_thread_count: need at least one thread, got " + std::to_string(n));
  detail::thread_count_ref() = n;
}

/// Runs fn(i) for i in [0, count). Tasks are split into contiguous static
/// chunks, one per worker, so each index runs the same arithmetic in the
/// same order no matter how many threads execute; results are bit-identical
/// across thread counts as long as tasks write disjoint outputs.
template <typename Fn>
void parallel_for(std::int64_t count, Fn&& fn) {
  const int workers = static_cast<int>(
      std::min<std::int64_t>(thread_count(), count));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = count * t / workers;
    const std::int64_t hi = count * (t + 1) / workers;
    pool.emplace_back([lo, hi, &fn]() {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace gpanet
