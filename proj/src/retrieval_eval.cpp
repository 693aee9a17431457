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

#include "gpanet/retrieval_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "gpanet/fsio.hpp"
#include "json.hpp"

namespace gpanet {

void DescriptorMatrix::append(const std::string& identity, bool is_distractor,
                              const float* values) {
  identities.push_back(identity);
  distractor.push_back(is_distractor ? 1 : 0);
  rows.insert(rows.end(), values, values + dim);
}

void DescriptorMatrix::validate() const {
  if (dim < 1) throw DataError("descriptors: dimension must be positive");
  if (identities.size() != distractor.size() ||
      rows.size() != identities.size() * static_cast<std::size_t>(dim)) {
    throw DataError("descriptors: row/label bookkeeping out of sync");
  }
  for (std::int64_t i = 0; i < count(); ++i) {
    const float* r = row(i);
    bool all_zero = true;
    for (std::int64_t j = 0; j < dim; ++j) {
      if (r[j] != 0.0f) {
        all_zero = false;
        break;
      }
    }
    if (all_zero) {
      throw NumericError("descriptors: row " + std::to_string(i) +
                         " is all zeros; cosine distance is undefined");
    }
  }
}

double cosine_distance(const float* a, const float* b, std::int64_t dim) {
  double dot = 0, na = 0, nb = 0;
  for (std::int64_t i = 0; i < dim; ++i) {
    const double x = a[i], y = b[i];
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine distance: zero vector");
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine distance: dimensions " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine distance: zero vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::int64_t> rank_gallery(const float* query, std::int64_t dim,
                                       const DescriptorMatrix& gallery) {
  if (dim != gallery.dim) {
    throw ShapeError("rank: query dimension " + std::to_string(dim) + " vs gallery " +
                     std::to_string(gallery.dim));
  }
  const std::int64_t n = gallery.count();
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = cosine_distance(query, gallery.row(i), dim);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&dist](std::int64_t a, std::int64_t b) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
  });
  return order;
}

namespace {

void check_metric_inputs(const std::vector<std::vector<std::int64_t>>& rankings,
                         const std::vector<std::string>& query_ids,
                         const std::vector<std::string>& gallery_ids,
                         const std::vector<std::uint8_t>& gallery_distractor) {
  if (rankings.size() != query_ids.size()) {
    throw ShapeError("metrics: " + std::to_string(rankings.size()) + " rankings for " +
                     std::to_string(query_ids.size()) + " queries");
  }
  if (!gallery_distractor.empty() && gallery_distractor.size() != gallery_ids.size()) {
    throw ShapeError("metrics: distractor flags disagree with gallery size");
  }
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    if (rankings[q].size() != gallery_ids.size()) {
      throw ShapeError("metrics: ranking " + std::to_string(q) + " has " +
                       std::to_string(rankings[q].size()) + " entries for a gallery of " +
                       std::to_string(gallery_ids.size()));
    }
    bool present = false;
    for (std::size_t g = 0; g < gallery_ids.size(); ++g) {
      const bool dis = !gallery_distractor.empty() && gallery_distractor[g];
      if (!dis && gallery_ids[g] == query_ids[q]) {
        present = true;
        break;
      }
    }
    if (!present) {
      throw DataError("metrics: query identity '" + query_ids[q] + "' absent from the gallery");
    }
  }
}

bool relevant(const std::vector<std::string>& gallery_ids,
              const std::vector<std::uint8_t>& gallery_distractor, std::int64_t index,
              const std::string& query_id) {
  const auto g = static_cast<std::size_t>(index);
  if (!gallery_distractor.empty() && gallery_distractor[g]) return false;
  return gallery_ids[g] == query_id;
}

}  // namespace

std::vector<double> cmc_curve(const std::vector<std::vector<std::int64_t>>& rankings,
                              const std::vector<std::string>& query_ids,
                              const std::vector<std::string>& gallery_ids,
                              const std::vector<std::uint8_t>& gallery_distractor) {
  check_metric_inputs(rankings, query_ids, gallery_ids, gallery_distractor);
  std::vector<double> cmc(gallery_ids.size(), 0.0);
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    for (std::size_t rank = 0; rank < rankings[q].size(); ++rank) {
      if (relevant(gallery_ids, gallery_distractor, rankings[q][rank], query_ids[q])) {
        for (std::size_t k = rank; k < cmc.size(); ++k) cmc[k] += 1.0;
        break;
      }
    }
  }
  for (auto& v : cmc) v /= static_cast<double>(query_ids.size());
  return cmc;
}

double map_score(const std::vector<std::vector<std::int64_t>>& rankings,
                 const std::vector<std::string>& query_ids,
                 const std::vector<std::string>& gallery_ids,
                 const std::vector<std::uint8_t>& gallery_distractor) {
  check_metric_inputs(rankings, query_ids, gallery_ids, gallery_distractor);
  double sum_ap = 0;
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    std::int64_t hits = 0;
    double ap = 0;
    for (std::size_t rank = 0; rank < rankings[q].size(); ++rank) {
      if (relevant(gallery_ids, gallery_distractor, rankings[q][rank], query_ids[q])) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
      }
    }
    sum_ap += ap / static_cast<double>(hits);
  }
  return sum_ap / static_cast<double>(query_ids.size());
}

RankedRun rank_and_score(const DescriptorMatrix& gallery, const DescriptorMatrix& query) {
  gallery.validate();
  query.validate();
  if (gallery.dim != query.dim) {
    throw ShapeError("rank: query dimension " + std::to_string(query.dim) +
                     " does not match gallery dimension " + std::to_string(gallery.dim));
  }
  RankedRun run;
  run.rankings.reserve(static_cast<std::size_t>(query.count()));
  for (std::int64_t i = 0; i < query.count(); ++i) {
    run.rankings.push_back(rank_gallery(query.row(i), query.dim, gallery));
  }
  run.cmc = cmc_curve(run.rankings, query.identities, gallery.identities, gallery.distractor);
  run.map = map_score(run.rankings, query.identities, gallery.identities, gallery.distractor);
  return run;
}

DescriptorMatrix extract_descriptors(Model<float>& model, const NormStats& norm,
                                     const std::vector<ManifestRecord>& records,
                                     const std::string& image_root,
                                     std::map<std::string, std::vector<float>>* cache) {
  DescriptorMatrix out;
  out.dim = descriptor_dim(model.config);
  const std::int64_t side = model.config.backbone.input_size;
  constexpr std::int64_t kBatch = 32;

  std::vector<const ManifestRecord*> pending;
  auto flush = [&]() {
    if (pending.empty()) return;
    const std::int64_t n = static_cast<std::int64_t>(pending.size());
    std::vector<float> batch(static_cast<std::size_t>(n * 3 * side * side));
    for (std::int64_t i = 0; i < n; ++i) {
      Image img = read_ppm(resolve_path(image_root, pending[static_cast<std::size_t>(i)]->path));
      if (img.height != side || img.width != side) img = resize_bilinear(img, side, side);
      img = augment(img, Mode::eval, norm, 0.0, 0.0, 0);
      std::copy(img.pixels.begin(), img.pixels.end(),
                batch.begin() + static_cast<std::ptrdiff_t>(i * 3 * side * side));
    }
    TensorF images({n, 3, side, side}, std::move(batch));
    TensorF desc = model_descriptor(model, images);
    for (std::int64_t i = 0; i < n; ++i) {
      const float* row = desc.data().data() + i * out.dim;
      if (cache) {
        (*cache)[pending[static_cast<std::size_t>(i)]->path].assign(row, row + out.dim);
      }
    }
    pending.clear();
  };

  // First pass fills the cache for unseen paths, batch by batch.
  if (cache) {
    std::set<std::string> queued;
    for (const auto& rec : records) {
      if (cache->count(rec.path) || queued.count(rec.path)) continue;
      queued.insert(rec.path);
      pending.push_back(&rec);
      if (static_cast<std::int64_t>(pending.size()) == kBatch) flush();
    }
    flush();
    for (const auto& rec : records) {
      out.append(rec.identity, rec.is_distractor(), cache->at(rec.path).data());
    }
    return out;
  }

  std::map<std::string, std::vector<float>> local;
  return extract_descriptors(model, norm, records, image_root, &local);
}

EvalReport evaluate(Model<float>& model, const NormStats& norm,
                    const std::vector<EvalProtocol>& protocols, const std::string& image_root) {
  if (protocols.empty()) throw DataError("evaluate: no repetition protocols");
  std::map<std::string, std::vector<float>> cache;
  EvalReport report;
  for (const auto& proto : protocols) {
    DescriptorMatrix gallery = extract_descriptors(model, norm, proto.gallery, image_root, &cache);
    DescriptorMatrix query = extract_descriptors(model, norm, proto.query, image_root, &cache);
    RankedRun run = rank_and_score(gallery, query);
    if (report.cmc.empty()) {
      report.cmc.assign(run.cmc.size(), 0.0);
    } else if (report.cmc.size() != run.cmc.size()) {
      throw DataError("evaluate: gallery size changed between repetitions");
    }
    for (std::size_t k = 0; k < run.cmc.size(); ++k) report.cmc[k] += run.cmc[k];
    report.per_repetition.push_back(RepStats{run.cmc.empty() ? 0.0 : run.cmc[0], run.map});
  }
  const double reps = static_cast<double>(protocols.size());
  for (auto& v : report.cmc) v /= reps;
  for (const auto& rep : report.per_repetition) {
    report.mean_rank1 += rep.rank1;
    report.mean_map += rep.map;
  }
  report.mean_rank1 /= reps;
  report.mean_map /= reps;
  report.map = report.mean_map;
  return report;
}

EvalReport evaluate_descriptors(const DescriptorMatrix& gallery, const DescriptorMatrix& query) {
  RankedRun run = rank_and_score(gallery, query);
  EvalReport report;
  report.cmc = run.cmc;
  report.map = run.map;
  report.per_repetition.push_back(RepStats{run.cmc.empty() ? 0.0 : run.cmc[0], run.map});
  report.mean_rank1 = report.per_repetition[0].rank1;
  report.mean_map = run.map;
  return report;
}

std::string report_to_json(const EvalReport& report,
                           const std::vector<std::string>& config_echo) {
  nlohmann::json j;
  j["cmc"] = report.cmc;
  j["map"] = report.map;
  j["mean_rank1"] = report.mean_rank1;
  j["mean_map"] = report.mean_map;
  j["per_repetition"] = nlohmann::json::array();
  for (const auto& rep : report.per_repetition) {
    j["per_repetition"].push_back({{"rank1", rep.rank1}, {"map", rep.map}});
  }
  nlohmann::json summary;
  for (const std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}, std::size_t{20}}) {
    if (k <= report.cmc.size()) {
      summary["rank" + std::to_string(k)] = report.cmc[k - 1];
    }
  }
  j["cmc_summary"] = summary;
  j["config"] = config_echo;
  return j.dump(2) + "\n";
}

void write_report_json(const std::string& path, const EvalReport& report,
                       const std::vector<std::string>& config_echo) {
  atomic_write_file(path, report_to_json(report, config_echo));
}

void write_cmc_text(const std::string& path, const std::vector<double>& cmc,
                    const std::vector<std::string>& header_lines) {
  std::ostringstream out;
  for (const auto& line : header_lines) out << "# " << line << "\n";
  out << "# rank accuracy\n";
  char buf[64];
  for (std::size_t k = 0; k < cmc.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu %.6f\n", k + 1, cmc[k]);
    out << buf;
  }
  atomic_write_file(path, out.str());
}

}  // namespace gpanet
