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

#include <functional>
#include <string>
#include <vector>

#include "gpanet/config.hpp"
#include "gpanet/datasets.hpp"

namespace gpanet {

struct CellResult {
  std::int64_t h_parts = 0;
  std::int64_t v_parts = 0;
  bool feasible = false;
  double rank1 = 0;
  double map = 0;
};

struct ComponentResult {
  std::string name;
  double rank1 = 0;
  double map = 0;
};

struct AblateResult {
  std::vector<CellResult> cells;  // row-major, H_p outer, V_p inner
  std::vector<ComponentResult> components;
  std::string table;
};

/// Plain-text "rank-1 (mAP)" grid, component rows, and the full-scale
/// reference footer. Infeasible cells print "-".
std::string format_ablation_table(const AblateResult& result);

/// Trains and evaluates one model per partition-grid cell (H_p 1..h_max,
/// V_p 1..v_max) plus the three component variants, all from the same seed
/// and protocols. The 1x1 cell is the global branch alone. Cells whose
/// partition cannot tile the activation tensor are marked infeasible and
/// skipped. `progress`, when set, receives one line per finished run.
AblateResult run_ablation(const std::vector<EvalProtocol>& protocols,
                          const std::string& image_root, const RunConfig& base,
                          std::int64_t h_max = 4, std::int64_t v_max = 3,
                          const std::function<void(const std::string&)>& progress = nullptr);

}  // namespace gpanet
