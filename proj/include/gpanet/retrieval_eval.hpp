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
#include <map>
#include <string>
#include <vector>

#include "gpanet/datasets.hpp"
#include "gpanet/errors.hpp"
#include "gpanet/model.hpp"

namespace gpanet {

/// Dense n x dim descriptor rows with identity labels and distractor flags.
struct DescriptorMatrix {
  std::int64_t dim = 0;
  std::vector<std::string> identities;
  std::vector<std::uint8_t> distractor;
  std::vector<float> rows;

  std::int64_t count() const { return static_cast<std::int64_t>(identities.size()); }
  const float* row(std::int64_t i) const { return rows.data() + i * dim; }
  void append(const std::string& identity, bool is_distractor, const float* values);
  void validate() const;
};

/// 1 - a.b/(|a||b|), accumulated in double. Zero vectors are an error.
double cosine_distance(const float* a, const float* b, std::int64_t dim);
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Gallery indices by ascending distance to the query; ties resolve to the
/// lower index (stable).
std::vector<std::int64_t> rank_gallery(const float* query, std::int64_t dim,
                                       const DescriptorMatrix& gallery);

/// cmc[k-1] = fraction of queries whose first same-identity gallery item
/// (distractors never match) sits at rank <= k.
std::vector<double> cmc_curve(const std::vector<std::vector<std::int64_t>>& rankings,
                              const std::vector<std::string>& query_ids,
                              const std::vector<std::string>& gallery_ids,
                              const std::vector<std::uint8_t>& gallery_distractor);

/// Mean over queries of (mean precision at each relevant rank); relevant =
/// same identity, never a distractor.
double map_score(const std::vector<std::vector<std::int64_t>>& rankings,
                 const std::vector<std::string>& query_ids,
                 const std::vector<std::string>& gallery_ids,
                 const std::vector<std::uint8_t>& gallery_distractor);

struct RepStats {
  double rank1 = 0;
  double map = 0;
};

struct EvalReport {
  std::vector<double> cmc;  // averaged over repetitions, rank 1..gallery size
  double map = 0;           // same as mean_map
  std::vector<RepStats> per_repetition;
  double mean_rank1 = 0;
  double mean_map = 0;
};

/// Ranks one query set against one gallery.
struct RankedRun {
  std::vector<std::vector<std::int64_t>> rankings;
  std::vector<double> cmc;
  double map = 0;
};
RankedRun rank_and_score(const DescriptorMatrix& gallery, const DescriptorMatrix& query);

/// Extracts eval-mode descriptors for a set of records, in record order.
/// `cache` maps record path to descriptor row and is shared across calls so
/// repeated protocols never recompute an image.
DescriptorMatrix extract_descriptors(Model<float>& model, const NormStats& norm,
                                     const std::vector<ManifestRecord>& records,
                                     const std::string& image_root,
                                     std::map<std::string, std::vector<float>>* cache = nullptr);

/// Per-repetition gallery/query extraction, ranking, and metric averaging.
EvalReport evaluate(Model<float>& model, const NormStats& norm,
                    const std::vector<EvalProtocol>& protocols, const std::string& image_root);

/// Single-repetition report from prebuilt descriptor sets.
EvalReport evaluate_descriptors(const DescriptorMatrix& gallery, const DescriptorMatrix& query);

/// JSON report with cmc, map, per_repetition, means, a rank 1/5/10/20
/// summary, and the caller's config echo.
std::string report_to_json(const EvalReport& report,
                           const std::vector<std::string>& config_echo);
void write_report_json(const std::string& path, const EvalReport& report,
                       const std::vector<std::string>& config_echo);

/// Two-column "rank accuracy" text, one row per rank, '#'-prefixed header.
void write_cmc_text(const std::string& path, const std::vector<double>& cmc,
                    const std::vector<std::string>& header_lines);

}  // namespace gpanet
