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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "gpanet/retrieval_eval.hpp"
#include "gpanet/rng.hpp"

using namespace gpanet;

namespace {

DescriptorMatrix matrix_from(std::int64_t dim,
                             const std::vector<std::pair<std::string, std::vector<float>>>& rows,
                             const std::vector<std::uint8_t>& distractor = {}) {
  DescriptorMatrix m;
  m.dim = dim;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const bool d = i < distractor.size() && distractor[i] != 0;
    m.append(rows[i].first, d, rows[i].second.data());
  }
  return m;
}

DescriptorMatrix random_matrix(Rng& rng, std::int64_t n, std::int64_t dim, int n_ids,
                               double distractor_prob = 0.0) {
  DescriptorMatrix m;
  m.dim = dim;
  for (std::int64_t i = 0; i < n; ++i) {
    std::vector<float> row(static_cast<std::size_t>(dim));
    for (auto& v : row) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    // Keep rows away from the zero vector.
    row[0] += row[0] >= 0 ? 0.5f : -0.5f;
    const bool d = rng.uniform() < distractor_prob;
    const std::string id = d ? "dist" + std::to_string(i)
                             : "id" + std::to_string(rng.below(static_cast<std::uint64_t>(n_ids)));
    m.append(id, d, row.data());
  }
  return m;
}

// Independent metric oracle: double-precision distances, naive sorting,
// directly-counted CMC and AP.
struct Oracle {
  std::vector<double> cmc;
  double map = 0;
};

Oracle brute_force(const DescriptorMatrix& gallery, const DescriptorMatrix& query) {
  const std::int64_t g = gallery.count();
  Oracle out;
  out.cmc.assign(static_cast<std::size_t>(g), 0.0);
  double ap_sum = 0;
  for (std::int64_t q = 0; q < query.count(); ++q) {
    std::vector<double> dist(static_cast<std::size_t>(g));
    for (std::int64_t i = 0; i < g; ++i) {
      std::vector<double> a(query.row(q), query.row(q) + query.dim);
      std::vector<double> b(gallery.row(i), gallery.row(i) + gallery.dim);
      dist[static_cast<std::size_t>(i)] = cosine_distance(a, b);
    }
    std::vector<std::int64_t> order(static_cast<std::size_t>(g));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
      return dist[static_cast<std::size_t>(x)] < dist[static_cast<std::size_t>(y)];
    });
    std::int64_t first_hit = -1;
    double hits = 0, precision_sum = 0;
    for (std::int64_t r = 0; r < g; ++r) {
      const std::int64_t gi = order[static_cast<std::size_t>(r)];
      const bool relevant = !gallery.distractor[static_cast<std::size_t>(gi)] &&
                            gallery.identities[static_cast<std::size_t>(gi)] ==
                                query.identities[static_cast<std::size_t>(q)];
      if (relevant) {
        if (first_hit < 0) first_hit = r;
        hits += 1;
        precision_sum += hits / static_cast<double>(r + 1);
      }
    }
    for (std::int64_t k = first_hit; k < g; ++k) out.cmc[static_cast<std::size_t>(k)] += 1;
    ap_sum += precision_sum / hits;
  }
  for (auto& v : out.cmc) v /= static_cast<double>(query.count());
  out.map = ap_sum / static_cast<double>(query.count());
  return out;
}

}  // namespace

TEST_CASE("cosine distance basics") {
  const std::vector<float> e1{1.0f, 0.0f};
  const std::vector<float> e2{0.0f, 1.0f};
  const std::vector<float> diag{1.0f, 1.0f};
  const std::vector<float> neg{-2.0f, 0.0f};
  CHECK(cosine_distance(e1.data(), e1.data(), 2) == doctest::Approx(0.0).scale(1.0));
  CHECK(cosine_distance(e1.data(), e2.data(), 2) == doctest::Approx(1.0));
  CHECK(cosine_distance(e1.data(), neg.data(), 2) == doctest::Approx(2.0));
  CHECK(cosine_distance(e1.data(), diag.data(), 2) ==
        doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)).epsilon(1e-12));
  // Scale invariance.
  const std::vector<float> e1s{7.5f, 0.0f};
  CHECK(cosine_distance(e1s.data(), diag.data(), 2) ==
        doctest::Approx(cosine_distance(e1.data(), diag.data(), 2)).epsilon(1e-12));
}

TEST_CASE("cosine distance rejects zero vectors") {
  const std::vector<float> z{0.0f, 0.0f};
  const std::vector<float> ok{1.0f, 0.0f};
  CHECK_THROWS_AS(cosine_distance(z.data(), ok.data(), 2), NumericError);
  CHECK_THROWS_AS(cosine_distance(ok.data(), z.data(), 2), NumericError);
}

TEST_CASE("rank_gallery matches a brute-force sort on random inputs") {
  Rng rng(606);
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t dim = 2 + static_cast<std::int64_t>(rng.below(6));
    const std::int64_t g = 2 + static_cast<std::int64_t>(rng.below(15));
    DescriptorMatrix gallery = random_matrix(rng, g, dim, 4);
    std::vector<float> q(static_cast<std::size_t>(dim));
    for (auto& v : q) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    q[0] += q[0] >= 0 ? 0.5f : -0.5f;

    const auto got = rank_gallery(q.data(), dim, gallery);
    std::vector<double> dist(static_cast<std::size_t>(g));
    for (std::int64_t i = 0; i < g; ++i) {
      dist[static_cast<std::size_t>(i)] = cosine_distance(q.data(), gallery.row(i), dim);
    }
    std::vector<std::int64_t> expect(static_cast<std::size_t>(g));
    std::iota(expect.begin(), expect.end(), 0);
    std::stable_sort(expect.begin(), expect.end(), [&](std::int64_t a, std::int64_t b) {
      return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
    });
    CHECK(got == expect);
  }
}

TEST_CASE("distance ties resolve to the lower gallery index") {
  // Rows 1 and 2 are positive multiples of each other: identical distance.
  DescriptorMatrix gallery = matrix_from(2, {{"a", {0.0f, 1.0f}},
                                             {"b", {1.0f, 0.0f}},
                                             {"c", {3.0f, 0.0f}}});
  const std::vector<float> q{1.0f, 0.0f};
  const auto order = rank_gallery(q.data(), 2, gallery);
  CHECK(order == std::vector<std::int64_t>{1, 2, 0});
}

TEST_CASE("cmc and map on a worked example") {
  // Gallery: a, b, a(distractor-free), query identity a twice.
  DescriptorMatrix gallery = matrix_from(2, {{"a", {1.0f, 0.0f}},
                                             {"b", {0.0f, 1.0f}},
                                             {"a", {1.0f, 1.0f}}});
  DescriptorMatrix query = matrix_from(2, {{"a", {1.0f, 0.1f}},
                                           {"a", {0.1f, 1.0f}}});
  const RankedRun run = rank_and_score(gallery, query);
  // Query 0 is nearest row 0 (identity a): hit at rank 1.
  // Query 1 is nearest row 1 (b), then row 2 (a): hit at rank 2.
  REQUIRE(run.cmc.size() == 3);
  CHECK(run.cmc[0] == doctest::Approx(0.5));
  CHECK(run.cmc[1] == doctest::Approx(1.0));
  CHECK(run.cmc[2] == doctest::Approx(1.0));
  // AP(q0): relevant at ranks 1 and 2 -> (1/1 + 2/2) / 2 = 1.
  // AP(q1): relevant at ranks 2 and 3 -> (1/2 + 2/3) / 2 = 7/12.
  CHECK(run.map == doctest::Approx((1.0 + 7.0 / 12.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("average precision hand values") {
  auto single_query = [](const std::vector<std::string>& gallery_ids,
                         const std::vector<std::int64_t>& ranking, const std::string& qid) {
    const std::vector<std::uint8_t> dist(gallery_ids.size(), 0);
    return map_score({ranking}, {qid}, gallery_ids, dist);
  };
  // Single relevant item at rank 2.
  CHECK(single_query({"x", "a", "y"}, {0, 1, 2}, "a") == doctest::Approx(0.5));
  // Relevant at ranks 1 and 2.
  CHECK(single_query({"a", "a", "y"}, {0, 1, 2}, "a") == doctest::Approx(1.0));
  // Relevant at ranks 2 and 4: (1/2 + 2/4) / 2 = 0.5.
  CHECK(single_query({"x", "a", "y", "a"}, {0, 1, 2, 3}, "a") == doctest::Approx(0.5));
  // Single relevant identity: AP = 1/rank.
  for (std::size_t rank = 1; rank <= 4; ++rank) {
    std::vector<std::string> ids{"x1", "x2", "x3", "x4"};
    ids[rank - 1] = "a";
    CHECK(single_query(ids, {0, 1, 2, 3}, "a") ==
          doctest::Approx(1.0 / static_cast<double>(rank)).epsilon(1e-12));
  }
}

TEST_CASE("cmc is monotone nondecreasing and ends at 1 when all queries match") {
  Rng rng(707);
  DescriptorMatrix gallery = random_matrix(rng, 12, 4, 3);
  DescriptorMatrix query = random_matrix(rng, 8, 4, 3);
  const RankedRun run = rank_and_score(gallery, query);
  for (std::size_t k = 1; k < run.cmc.size(); ++k) CHECK(run.cmc[k] >= run.cmc[k - 1]);
  CHECK(run.cmc.back() == doctest::Approx(1.0));
}

TEST_CASE("scaling all descriptors by powers of two leaves rankings bit-identical") {
  Rng rng(808);
  DescriptorMatrix gallery = random_matrix(rng, 10, 5, 3);
  DescriptorMatrix query = random_matrix(rng, 6, 5, 3);
  const RankedRun base = rank_and_score(gallery, query);
  for (const float s : {0.25f, 4.0f, 1024.0f}) {
    DescriptorMatrix g2 = gallery;
    DescriptorMatrix q2 = query;
    for (auto& v : g2.rows) v *= s;
    for (auto& v : q2.rows) v *= s;
    const RankedRun scaled = rank_and_score(g2, q2);
    CHECK(scaled.rankings == base.rankings);
    CHECK(scaled.cmc == base.cmc);
    CHECK(scaled.map == base.map);
  }
}

TEST_CASE("a query identity absent from the gallery is an input error") {
  DescriptorMatrix gallery = matrix_from(2, {{"a", {1.0f, 0.0f}}, {"b", {0.0f, 1.0f}}});
  DescriptorMatrix query = matrix_from(2, {{"c", {1.0f, 1.0f}}});
  CHECK_THROWS_AS(rank_and_score(gallery, query), DataError);
  // Present only as a distractor does not count.
  DescriptorMatrix g2 = matrix_from(2, {{"a", {1.0f, 0.0f}}, {"c", {0.0f, 1.0f}}},
                                    {0, 1});
  CHECK_THROWS_AS(rank_and_score(g2, query), DataError);
}

TEST_CASE("dimension and emptiness violations are shape errors") {
  DescriptorMatrix gallery = matrix_from(2, {{"a", {1.0f, 0.0f}}});
  DescriptorMatrix query = matrix_from(3, {{"a", {1.0f, 0.0f, 1.0f}}});
  CHECK_THROWS_AS(rank_and_score(gallery, query), ShapeError);
  DescriptorMatrix empty;
  empty.dim = 2;
  CHECK_THROWS_AS(rank_and_score(empty, query), ShapeError);
}

TEST_CASE("an all-zero descriptor row fails validation") {
  DescriptorMatrix m = matrix_from(2, {{"a", {0.0f, 0.0f}}});
  CHECK_THROWS_AS(m.validate(), NumericError);
}

TEST_CASE("querying the gallery against itself yields rank-1 accuracy 1") {
  Rng rng(909);
  DescriptorMatrix gallery = random_matrix(rng, 9, 4, 9);
  for (std::size_t i = 0; i < gallery.identities.size(); ++i) {
    gallery.identities[i] = "u" + std::to_string(i);
    gallery.distractor[i] = 0;
  }
  const RankedRun run = rank_and_score(gallery, gallery);
  CHECK(run.cmc[0] == doctest::Approx(1.0));
  CHECK(run.map == doctest::Approx(1.0));
}

TEST_CASE("metrics match an independent brute-force oracle exactly") {
  Rng rng(1001);
  for (int trial = 0; trial < 40; ++trial) {
    const std::int64_t dim = 3 + static_cast<std::int64_t>(rng.below(4));
    DescriptorMatrix gallery = random_matrix(rng, 6 + static_cast<std::int64_t>(rng.below(15)),
                                             dim, 5, 0.25);
    // Queries reuse gallery identities so every query has a match.
    DescriptorMatrix query;
    query.dim = dim;
    std::vector<std::string> candidates;
    for (std::int64_t i = 0; i < gallery.count(); ++i) {
      if (!gallery.distractor[static_cast<std::size_t>(i)]) {
        candidates.push_back(gallery.identities[static_cast<std::size_t>(i)]);
      }
    }
    if (candidates.empty()) continue;
    const std::int64_t nq = 1 + static_cast<std::int64_t>(rng.below(10));
    for (std::int64_t i = 0; i < nq; ++i) {
      std::vector<float> row(static_cast<std::size_t>(dim));
      for (auto& v : row) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      row[0] += row[0] >= 0 ? 0.5f : -0.5f;
      query.append(candidates[rng.below(candidates.size())], false, row.data());
    }
    const RankedRun run = rank_and_score(gallery, query);
    const Oracle oracle = brute_force(gallery, query);
    REQUIRE(run.cmc.size() == oracle.cmc.size());
    for (std::size_t k = 0; k < run.cmc.size(); ++k) {
      CHECK(run.cmc[k] == doctest::Approx(oracle.cmc[k]).epsilon(1e-12));
    }
    CHECK(run.map == doctest::Approx(oracle.map).epsilon(1e-12));
  }
}

TEST_CASE("distractors are never relevant and lower precision when ranked early") {
  // Distractor shares the query's direction; the true match is farther.
  DescriptorMatrix gallery = matrix_from(2, {{"noise", {1.0f, 0.05f}},
                                             {"a", {1.0f, 0.4f}},
                                             {"b", {0.0f, 1.0f}}},
                                         {1, 0, 0});
  DescriptorMatrix query = matrix_from(2, {{"a", {1.0f, 0.0f}}});
  const RankedRun run = rank_and_score(gallery, query);
  // The distractor outranks the true match, so rank-1 misses and AP = 1/2.
  CHECK(run.cmc[0] == doctest::Approx(0.0).scale(1.0));
  CHECK(run.cmc[1] == doctest::Approx(1.0));
  CHECK(run.map == doctest::Approx(0.5));

  DescriptorMatrix no_distractor = matrix_from(2, {{"a", {1.0f, 0.4f}},
                                                   {"b", {0.0f, 1.0f}}});
  const RankedRun clean = rank_and_score(no_distractor, query);
  CHECK(clean.cmc[0] == doctest::Approx(1.0));
  CHECK(clean.map == doctest::Approx(1.0));
  CHECK(run.map < clean.map);
}

TEST_CASE("evaluate_descriptors wraps a single repetition into a report") {
  Rng rng(1111);
  DescriptorMatrix gallery = random_matrix(rng, 8, 4, 8);
  for (std::size_t i = 0; i < gallery.identities.size(); ++i) {
    gallery.identities[i] = "u" + std::to_string(i);
    gallery.distractor[i] = 0;
  }
  const EvalReport report = evaluate_descriptors(gallery, gallery);
  CHECK(report.per_repetition.size() == 1);
  CHECK(report.mean_rank1 == doctest::Approx(1.0));
  CHECK(report.mean_map == doctest::Approx(1.0));
  CHECK(report.map == doctest::Approx(report.mean_map));
  CHECK(report.cmc.size() == 8);
}

TEST_CASE("report json carries the metrics, summary ranks, and config echo") {
  Rng rng(1212);
  DescriptorMatrix gallery = random_matrix(rng, 25, 4, 6);
  DescriptorMatrix query = random_matrix(rng, 10, 4, 6);
  // Reuse gallery identities for queries.
  for (std::size_t i = 0; i < query.identities.size(); ++i) {
    query.identities[i] = gallery.identities[i % gallery.identities.size()];
    query.distractor[i] = 0;
  }
  const EvalReport report = evaluate_descriptors(gallery, query);
  const std::string json = report_to_json(report, {"seed = 7", "threads = 1"});
  CHECK(json.find("\"cmc\"") != std::string::npos);
  CHECK(json.find("\"mean_rank1\"") != std::string::npos);
  CHECK(json.find("\"cmc_summary\"") != std::string::npos);
  CHECK(json.find("\"rank20\"") != std::string::npos);
  CHECK(json.find("seed = 7") != std::string::npos);
  CHECK(json.back() == '\n');
}
