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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpanet/ablate.hpp"
#include "gpanet/checkpoint.hpp"
#include "gpanet/config.hpp"
#include "gpanet/descriptor_io.hpp"
#include "gpanet/fsio.hpp"
#include "gpanet/grad_suite.hpp"
#include "gpanet/protocol_io.hpp"
#include "gpanet/retrieval_eval.hpp"
#include "gpanet/threads.hpp"
#include "gpanet/training.hpp"

namespace py = pybind11;
using namespace gpanet;

namespace {

RunConfig config_from(const std::vector<std::string>& overrides, int threads) {
  RunConfig cfg;
  for (const auto& o : overrides) apply_override(cfg, o);
  if (threads > 0) cfg.threads = threads;
  set_thread_count(cfg.threads);
  return cfg;
}

py::dict report_dict(const EvalReport& report) {
  py::dict d;
  d["mean_rank1"] = report.mean_rank1;
  d["mean_map"] = report.mean_map;
  d["cmc"] = report.cmc;
  py::list reps;
  for (const auto& rep : report.per_repetition) {
    py::dict r;
    r["rank1"] = rep.rank1;
    r["map"] = rep.map;
    reps.append(r);
  }
  d["per_repetition"] = reps;
  return d;
}

py::dict record_dict(const ManifestRecord& rec) {
  py::dict d;
  d["path"] = rec.path;
  d["identity"] = rec.identity;
  d["aspect"] = std::string(aspect_name(rec.aspect));
  d["accessories"] = rec.accessories;
  d["tags"] = rec.tags;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Identity recognition from images: tensor autodiff, dual-branch model,"
            " protocols, training, and retrieval evaluation";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<DataError>(m, "DataError", base);
  py::register_exception<NumericError>(m, "NumericError", base);

  m.def("derive_seed",
        [](std::uint64_t master, std::uint64_t stream) { return derive_seed(master, stream); },
        py::arg("master"), py::arg("stream"),
        "Independent child seed for one named randomness stream");

  m.def("smoothed_targets",
        [](std::int64_t y, std::int64_t k, double eps) {
          return smoothed_targets<double>(y, k, eps);
        },
        py::arg("y"), py::arg("k"), py::arg("eps"),
        "Label-smoothed target distribution for class y of k");

  m.def("total_loss_value",
        [](const std::vector<std::vector<double>>& global_logits,
           const std::vector<std::vector<std::vector<double>>>& local_logits,
           const std::vector<std::int64_t>& labels, double lambda, double epsilon) {
          auto to_tensor = [](const std::vector<std::vector<double>>& rows) {
            if (rows.empty()) throw ShapeError("total_loss: empty logits");
            const std::int64_t n = static_cast<std::int64_t>(rows.size());
            const std::int64_t k = static_cast<std::int64_t>(rows[0].size());
            std::vector<double> flat;
            flat.reserve(static_cast<std::size_t>(n * k));
            for (const auto& row : rows) {
              if (static_cast<std::int64_t>(row.size()) != k) {
                throw ShapeError("total_loss: ragged logits rows");
              }
              flat.insert(flat.end(), row.begin(), row.end());
            }
            return TensorD({n, k}, std::move(flat));
          };
          NoGradGuard guard;
          const TensorD g = to_tensor(global_logits);
          std::vector<TensorD> locals;
          for (const auto& l : local_logits) locals.push_back(to_tensor(l));
          LossConfig cfg;
          cfg.lambda = lambda;
          cfg.epsilon = epsilon;
          return total_loss<double>(g, locals, labels, cfg).item();
        },
        py::arg("global_logits"), py::arg("local_logits"), py::arg("labels"),
        py::arg("lambda_") = 1.0, py::arg("epsilon") = 0.1,
        "Combined objective value: global cross-entropy plus lambda times the"
        " summed local cross-entropies");

  m.def("cosine_distance",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return cosine_distance(a, b);
        },
        py::arg("a"), py::arg("b"));

  m.def("partition_regions",
        [](std::int64_t height, std::int64_t width, int h_parts, int v_parts) {
          std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>> out;
          for (const Rect& r : partition_regions(height, width, PartitionScheme{h_parts, v_parts})) {
            out.emplace_back(r.r0, r.r1, r.c0, r.c1);
          }
          return out;
        },
        py::arg("height"), py::arg("width"), py::arg("h_parts"), py::arg("v_parts"),
        "Balanced partition rectangles as (r0, r1, c0, c1) half-open ranges");

  m.def("cmc_and_map",
        [](const std::vector<std::vector<std::int64_t>>& rankings,
           const std::vector<std::string>& query_ids, const std::vector<std::string>& gallery_ids,
           const std::vector<bool>& gallery_distractor) {
          std::vector<std::uint8_t> flags(gallery_distractor.begin(), gallery_distractor.end());
          return std::make_pair(cmc_curve(rankings, query_ids, gallery_ids, flags),
                                map_score(rankings, query_ids, gallery_ids, flags));
        },
        py::arg("rankings"), py::arg("query_ids"), py::arg("gallery_ids"),
        py::arg("gallery_distractor") = std::vector<bool>{},
        "CMC curve and mAP for precomputed rankings");

  m.def("grad_check_suite",
        [](std::uint64_t seed) {
          std::vector<std::pair<std::string, double>> out;
          for (const auto& e : grad_check_suite(seed)) out.emplace_back(e.op, e.max_rel_err);
          return out;
        },
        py::arg("seed") = 42, py::call_guard<py::gil_scoped_release>(),
        "Finite-difference check of every differentiable op; returns"
        " (op, worst relative error) pairs");

  m.def("synth_dataset", &synth_dataset, py::arg("num_ids"), py::arg("imgs_per_id"),
        py::arg("size"), py::arg("seed"), py::arg("out_dir"),
        py::call_guard<py::gil_scoped_release>(),
        "Render a synthetic labeled image set; returns the manifest path");

  m.def("parse_manifest",
        [](const std::string& path) {
          py::list out;
          for (const auto& rec : parse_manifest(path)) out.append(record_dict(rec));
          return out;
        },
        py::arg("path"));

  m.def("split_protocols",
        [](const std::string& manifest, const std::string& out, const std::string& aspect,
           int repetitions, std::uint64_t seed) {
          const std::vector<ManifestRecord> records = parse_manifest(manifest);
          ProtocolConfig pc;
          pc.aspect = aspect_from(aspect);
          const auto protocols = make_repetitions(records, pc, repetitions, seed);
          write_protocols(out, manifest, pc.aspect, seed, protocols);
          return out;
        },
        py::arg("manifest"), py::arg("out"), py::arg("aspect") = "none",
        py::arg("repetitions") = 10, py::arg("seed") = 7,
        "Build repetition protocols from a manifest and write them as JSON");

  m.def("train",
        [](const std::string& protocols_path, const std::string& checkpoint_out,
           const std::string& log_out, int rep, const std::vector<std::string>& overrides,
           int threads) {
          const RunConfig cfg = config_from(overrides, threads);
          py::gil_scoped_release release;
          const ProtocolFile file = read_protocols(protocols_path);
          if (rep < 0 || static_cast<std::size_t>(rep) >= file.protocols.size()) {
            throw DataError("train: repetition " + std::to_string(rep) + " out of range");
          }
          TrainOptions opts;
          opts.model = cfg.model;
          opts.loss = cfg.loss;
          opts.optim = cfg.optim;
          opts.seed = cfg.seed;
          opts.jitter = cfg.jitter;
          opts.flip_prob = cfg.flip_prob;
          TrainResult result =
              train_model(file.protocols[static_cast<std::size_t>(rep)], file.image_root, opts);
          Checkpoint ckpt = checkpoint_from_model(result.model, result.norm);
          write_checkpoint(checkpoint_out, ckpt);
          if (!log_out.empty()) write_training_log(log_out, result.log, echo_lines(cfg));
          py::gil_scoped_acquire acquire;
          py::dict d;
          d["checkpoint"] = checkpoint_out;
          d["epochs"] = result.log.size();
          d["final_loss"] = result.log.back().mean_total_loss;
          d["final_val_rank1"] = result.log.back().val_rank1;
          return d;
        },
        py::arg("protocols"), py::arg("checkpoint_out"), py::arg("log_out") = std::string(),
        py::arg("rep") = 0, py::arg("overrides") = std::vector<std::string>{},
        py::arg("threads") = 0,
        "Train on one repetition's train split; writes a checkpoint and returns a summary");

  m.def("extract_descriptors",
        [](const std::string& checkpoint, const std::string& manifest, const std::string& out) {
          py::gil_scoped_release release;
          LoadedModel loaded = model_from_checkpoint(read_checkpoint(checkpoint));
          const std::vector<ManifestRecord> records = parse_manifest(manifest);
          DescriptorMatrix m2 = extract_descriptors(loaded.model, loaded.norm, records,
                                                    parent_dir(manifest));
          write_descriptors(out, m2);
          return out;
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("out"),
        "Embed every manifest record and write a descriptor file");

  m.def("evaluate",
        [](const std::string& checkpoint, const std::string& protocols_path) {
          EvalReport report;
          {
            py::gil_scoped_release release;
            LoadedModel loaded = model_from_checkpoint(read_checkpoint(checkpoint));
            const ProtocolFile file = read_protocols(protocols_path);
            report = evaluate(loaded.model, loaded.norm, file.protocols, file.image_root);
          }
          return report_dict(report);
        },
        py::arg("checkpoint"), py::arg("protocols"),
        "Rank every repetition's queries against its gallery; returns the averaged report");

  m.def("evaluate_descriptor_files",
        [](const std::string& gallery_path, const std::string& query_path) {
          EvalReport report;
          {
            py::gil_scoped_release release;
            const DescriptorMatrix gallery = read_descriptors(gallery_path);
            const DescriptorMatrix query = read_descriptors(query_path);
            if (gallery.dim != query.dim) {
              throw DataError("eval: gallery dimension " + std::to_string(gallery.dim) +
                              " does not match query dimension " + std::to_string(query.dim));
            }
            report = evaluate_descriptors(gallery, query);
          }
          return report_dict(report);
        },
        py::arg("gallery"), py::arg("query"),
        "Score one gallery/query pair of descriptor files");

  m.def("ablate",
        [](const std::string& protocols_path, const std::vector<std::string>& overrides,
           std::int64_t h_max, std::int64_t v_max, int threads) {
          const RunConfig cfg = config_from(overrides, threads);
          py::gil_scoped_release release;
          const ProtocolFile file = read_protocols(protocols_path);
          return run_ablation(file.protocols, file.image_root, cfg, h_max, v_max).table;
        },
        py::arg("protocols"), py::arg("overrides") = std::vector<std::string>{},
        py::arg("h_max") = 4, py::arg("v_max") = 3, py::arg("threads") = 0,
        "Partition-grid and component sweep; returns the formatted table");
}
