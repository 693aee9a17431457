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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
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

namespace {

using namespace gpanet;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "INI configuration file");
  cmd->add_option("--set", args.overrides, "section.key=value override, repeatable");
  cmd->add_option("--threads", args.threads, "worker threads (overrides run.threads)");
}

RunConfig build_config(const ConfigArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) apply_config_file(cfg, args.config_path);
  for (const auto& o : args.overrides) apply_override(cfg, o);
  if (args.threads > 0) cfg.threads = args.threads;
  set_thread_count(cfg.threads);
  return cfg;
}

TrainOptions train_options(const RunConfig& cfg) {
  TrainOptions opts;
  opts.model = cfg.model;
  opts.loss = cfg.loss;
  opts.optim = cfg.optim;
  opts.seed = cfg.seed;
  opts.jitter = cfg.jitter;
  opts.flip_prob = cfg.flip_prob;
  return opts;
}

int run_app(int argc, char** argv) {
  CLI::App app{"Identity recognition from images: dual-branch feature learning,"
               " descriptor extraction, and retrieval evaluation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Render a synthetic labeled image set");
  int synth_ids = 16, synth_per_id = 8, synth_size = 64;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  synth->add_option("--ids", synth_ids, "number of identities")->check(CLI::PositiveNumber);
  synth->add_option("--per-id", synth_per_id, "images per identity")->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size, "square image size in pixels")
      ->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->callback([&] {
    const std::string manifest = synth_dataset(synth_ids, synth_per_id, synth_size, synth_seed,
                                               synth_out);
    std::cout << manifest << "\n";
  });

  auto* split = app.add_subcommand("split", "Build repetition protocols from a manifest");
  std::string split_manifest, split_out;
  ConfigArgs split_cfg;
  split->add_option("--manifest", split_manifest, "manifest CSV")->required();
  split->add_option("--out", split_out, "protocol JSON output path")->required();
  add_config_options(split, split_cfg);
  split->callback([&] {
    const RunConfig cfg = build_config(split_cfg);
    const std::vector<ManifestRecord> records = parse_manifest(split_manifest);
    ProtocolConfig pc;
    pc.aspect = cfg.aspect;
    const std::vector<EvalProtocol> protocols =
        make_repetitions(records, pc, cfg.repetitions, cfg.seed);
    write_protocols(split_out, split_manifest, cfg.aspect, cfg.seed, protocols);
    std::cout << split_out << ": " << protocols.size() << " repetitions, "
              << protocols[0].train.size() << " train / " << protocols[0].validation.size()
              << " validation images, gallery " << protocols[0].gallery.size() << ", query "
              << protocols[0].query.size() << "\n";
  });

  auto* train = app.add_subcommand("train", "Train a model on a protocol's train split");
  std::string train_protocols, train_ckpt, train_log;
  int train_rep = 0;
  ConfigArgs train_cfg;
  train->add_option("--protocols", train_protocols, "protocol JSON from split")->required();
  train->add_option("--rep", train_rep, "repetition index to train on");
  train->add_option("--out", train_ckpt, "checkpoint output path")->required();
  train->add_option("--log", train_log, "training log CSV output path");
  add_config_options(train, train_cfg);
  train->callback([&] {
    const RunConfig cfg = build_config(train_cfg);
    const ProtocolFile file = read_protocols(train_protocols);
    if (train_rep < 0 || static_cast<std::size_t>(train_rep) >= file.protocols.size()) {
      throw DataError("train: repetition " + std::to_string(train_rep) + " out of range, file has " +
                      std::to_string(file.protocols.size()));
    }
    TrainResult result =
        train_model(file.protocols[static_cast<std::size_t>(train_rep)], file.image_root,
                    train_options(cfg));
    Checkpoint ckpt = checkpoint_from_model(result.model, result.norm);
    write_checkpoint(train_ckpt, ckpt);
    if (!train_log.empty()) write_training_log(train_log, result.log, echo_lines(cfg));
    const EpochStats& last = result.log.back();
    std::printf("epoch %lld: loss %.4f, validation rank-1 %.4f\n",
                static_cast<long long>(last.epoch), last.mean_total_loss, last.val_rank1);
    std::cout << train_ckpt << "\n";
  });

  auto* extract = app.add_subcommand("extract", "Extract descriptors for a manifest");
  std::string ex_ckpt, ex_manifest, ex_out;
  ConfigArgs ex_cfg;
  extract->add_option("--checkpoint", ex_ckpt, "trained checkpoint")->required();
  extract->add_option("--manifest", ex_manifest, "manifest CSV of images to embed")->required();
  extract->add_option("--out", ex_out, "descriptor file output path")->required();
  add_config_options(extract, ex_cfg);
  extract->callback([&] {
    build_config(ex_cfg);
    LoadedModel loaded = model_from_checkpoint(read_checkpoint(ex_ckpt));
    const std::vector<ManifestRecord> records = parse_manifest(ex_manifest);
    DescriptorMatrix m = extract_descriptors(loaded.model, loaded.norm, records,
                                             parent_dir(ex_manifest));
    write_descriptors(ex_out, m);
    std::cout << ex_out << ": " << m.count() << " descriptors of dimension " << m.dim << "\n";
  });

  auto* eval = app.add_subcommand("eval", "Score retrieval: checkpoint+protocols or two"
                                          " descriptor files");
  std::string ev_ckpt, ev_protocols, ev_gallery, ev_query, ev_report, ev_cmc;
  ConfigArgs ev_cfg;
  eval->add_option("--checkpoint", ev_ckpt, "trained checkpoint");
  eval->add_option("--protocols", ev_protocols, "protocol JSON from split");
  eval->add_option("--gallery", ev_gallery, "gallery descriptor file");
  eval->add_option("--query", ev_query, "query descriptor file");
  eval->add_option("--report", ev_report, "JSON report output path");
  eval->add_option("--cmc", ev_cmc, "CMC curve text output path");
  add_config_options(eval, ev_cfg);
  eval->callback([&] {
    RunConfig cfg = build_config(ev_cfg);
    EvalReport report;
    const bool from_model = !ev_ckpt.empty() || !ev_protocols.empty();
    const bool from_files = !ev_gallery.empty() || !ev_query.empty();
    if (from_model == from_files) {
      throw CLI::ValidationError(
          "eval", "give either --checkpoint with --protocols, or --gallery with --query");
    }
    if (from_model) {
      if (ev_ckpt.empty() || ev_protocols.empty()) {
        throw CLI::ValidationError("eval", "--checkpoint and --protocols go together");
      }
      LoadedModel loaded = model_from_checkpoint(read_checkpoint(ev_ckpt));
      const ProtocolFile file = read_protocols(ev_protocols);
      report = evaluate(loaded.model, loaded.norm, file.protocols, file.image_root);
      cfg.model = loaded.model.config;
    } else {
      if (ev_gallery.empty() || ev_query.empty()) {
        throw CLI::ValidationError("eval", "--gallery and --query go together");
      }
      const DescriptorMatrix gallery = read_descriptors(ev_gallery);
      const DescriptorMatrix query = read_descriptors(ev_query);
      if (gallery.dim != query.dim) {
        throw DataError("eval: gallery dimension " + std::to_string(gallery.dim) +
                        " does not match query dimension " + std::to_string(query.dim));
      }
      report = evaluate_descriptors(gallery, query);
    }
    std::printf("mean rank-1 %.4f, mean mAP %.4f over %zu repetition(s)\n", report.mean_rank1,
                report.mean_map, report.per_repetition.size());
    for (std::size_t i = 0; i < report.per_repetition.size(); ++i) {
      std::printf("  rep %zu: rank-1 %.4f, mAP %.4f\n", i, report.per_repetition[i].rank1,
                  report.per_repetition[i].map);
    }
    if (!ev_report.empty()) write_report_json(ev_report, report, echo_lines(cfg));
    if (!ev_cmc.empty()) write_cmc_text(ev_cmc, report.cmc, echo_lines(cfg));
  });

  auto* ablate = app.add_subcommand("ablate", "Partition-grid and component sweep");
  std::string ab_protocols, ab_out;
  std::int64_t ab_hmax = 4, ab_vmax = 3;
  ConfigArgs ab_cfg;
  ablate->add_option("--protocols", ab_protocols, "protocol JSON from split")->required();
  ablate->add_option("--out", ab_out, "table text output path");
  ablate->add_option("--h-max", ab_hmax, "largest horizontal partition count")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--v-max", ab_vmax, "largest vertical partition count")
      ->check(CLI::PositiveNumber);
  add_config_options(ablate, ab_cfg);
  ablate->callback([&] {
    const RunConfig cfg = build_config(ab_cfg);
    const ProtocolFile file = read_protocols(ab_protocols);
    const AblateResult result =
        run_ablation(file.protocols, file.image_root, cfg, ab_hmax, ab_vmax,
                     [](const std::string& line) { std::cout << line << "\n"; });
    std::cout << "\n" << result.table;
    if (!ab_out.empty()) atomic_write_file(ab_out, result.table);
  });

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every"
                                                    " differentiable op");
  std::uint64_t gc_seed = 42;
  double gc_tol = 1e-4;
  gradcheck->add_option("--seed", gc_seed, "suite seed");
  gradcheck->add_option("--tol", gc_tol, "maximum allowed relative error");
  gradcheck->callback([&] {
    bool ok = true;
    for (const auto& entry : grad_check_suite(gc_seed)) {
      const bool pass = entry.max_rel_err <= gc_tol;
      ok = ok && pass;
      std::printf("%-16s max relative error %.3e  %s\n", entry.op.c_str(), entry.max_rel_err,
                  pass ? "ok" : "FAIL");
    }
    if (!ok) {
      throw NumericError("gradcheck: at least one op exceeded tolerance " +
                         std::to_string(gc_tol));
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
