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

#include "gpanet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "gpanet/fsio.hpp"
#include "gpanet/retrieval_eval.hpp"
#include "gpanet/rng.hpp"

namespace gpanet {

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64656cull;
constexpr std::uint64_t kShuffleStream = 0x73687566ull;
constexpr std::uint64_t kAugmentStream = 0x617567ull;
constexpr std::uint64_t kStepStream = 0x73746570ull;

Image load_square(const std::string& root, const std::string& rel, std::int64_t side) {
  Image img = read_ppm(resolve_path(root, rel));
  if (img.height != side || img.width != side) img = resize_bilinear(img, side, side);
  return img;
}

TensorF batch_tensor(const std::vector<Image>& images, std::int64_t side) {
  const std::int64_t n = static_cast<std::int64_t>(images.size());
  const std::int64_t plane = 3 * side * side;
  std::vector<float> data(static_cast<std::size_t>(n * plane));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& img = images[static_cast<std::size_t>(i)];
    std::copy(img.pixels.begin(), img.pixels.end(),
              data.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  return TensorF({n, 3, side, side}, std::move(data));
}

DescriptorMatrix descriptors_from_memory(Model<float>& model, const NormStats& norm,
                                         const std::vector<ManifestRecord>& records,
                                         const std::vector<Image>& raws) {
  DescriptorMatrix out;
  out.dim = descriptor_dim(model.config);
  const std::int64_t side = model.config.backbone.input_size;
  constexpr std::size_t kBatch = 32;
  for (std::size_t start = 0; start < raws.size(); start += kBatch) {
    const std::size_t stop = std::min(raws.size(), start + kBatch);
    std::vector<Image> batch;
    batch.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(augment(raws[i], Mode::eval, norm, 0.0, 0.0, 0));
    }
    TensorF images = batch_tensor(batch, side);
    TensorF desc = model_descriptor(model, images);
    for (std::size_t i = start; i < stop; ++i) {
      out.append(records[i].identity, records[i].is_distractor(),
                 desc.data().data() + static_cast<std::int64_t>(i - start) * out.dim);
    }
  }
  return out;
}

}  // namespace

TrainResult train_model(const EvalProtocol& protocol, const std::string& image_root,
                        const TrainOptions& opts) {
  opts.optim.validate();
  if (protocol.train.empty()) throw DataError("training: empty train split");
  if (opts.loss.epsilon < 0 || opts.loss.epsilon >= 1) {
    throw NumericError("training: epsilon must be in [0,1)");
  }

  std::set<std::string> id_set;
  for (const auto& rec : protocol.train) id_set.insert(rec.identity);
  std::vector<std::string> ids(id_set.begin(), id_set.end());
  std::sort(ids.begin(), ids.end(), natural_less);
  std::map<std::string, std::int64_t> class_of;
  for (std::size_t i = 0; i < ids.size(); ++i) class_of[ids[i]] = static_cast<std::int64_t>(i);

  ModelConfig cfg = opts.model;
  cfg.num_classes = static_cast<std::int64_t>(ids.size());
  cfg.validate();
  const std::int64_t side = cfg.backbone.input_size;

  std::vector<Image> train_raw;
  std::vector<std::int64_t> train_labels;
  train_raw.reserve(protocol.train.size());
  for (const auto& rec : protocol.train) {
    train_raw.push_back(load_square(image_root, rec.path, side));
    train_labels.push_back(class_of.at(rec.identity));
  }
  std::vector<Image> val_raw;
  val_raw.reserve(protocol.validation.size());
  for (const auto& rec : protocol.validation) {
    val_raw.push_back(load_square(image_root, rec.path, side));
  }

  const NormStats norm = compute_norm_stats(train_raw);
  Model<float> model = init_model<float>(cfg, derive_seed(opts.seed, kModelStream));
  SgdState<float> sgd;

  LossConfig loss_cfg = opts.loss;
  loss_cfg.num_classes = cfg.num_classes;
  const auto eps = static_cast<float>(loss_cfg.epsilon);
  const auto lambda = static_cast<float>(loss_cfg.lambda);
  if (lambda < 0) throw NumericError("training: lambda must be nonnegative");

  const std::int64_t n = static_cast<std::int64_t>(train_raw.size());
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> log;
  std::uint64_t step_counter = 0;
  for (std::int64_t epoch = 0; epoch < opts.optim.epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(opts.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);
    const std::uint64_t epoch_aug =
        derive_seed(opts.seed, kAugmentStream, static_cast<std::uint64_t>(epoch));

    double total_sum = 0, global_sum = 0, local_sum = 0;
    std::int64_t start = 0;
    while (start < n) {
      std::int64_t stop = std::min(n, start + opts.optim.batch_size);
      // A trailing single sample cannot pass train-mode batch norm; fold it
      // into this batch instead.
      if (n - stop == 1) stop = n;
      const std::int64_t bn = stop - start;
      std::vector<Image> batch;
      std::vector<std::int64_t> labels;
      batch.reserve(static_cast<std::size_t>(bn));
      for (std::int64_t i = start; i < stop; ++i) {
        const std::int64_t idx = order[static_cast<std::size_t>(i)];
        batch.push_back(augment(train_raw[static_cast<std::size_t>(idx)], Mode::train, norm,
                                opts.jitter, opts.flip_prob,
                                derive_seed(epoch_aug, static_cast<std::uint64_t>(idx))));
        labels.push_back(train_labels[static_cast<std::size_t>(idx)]);
      }
      TensorF images = batch_tensor(batch, side);
      std::vector<TensorF> logits = model_forward(
          model, images, Mode::train, derive_seed(opts.seed, kStepStream, step_counter));
      ++step_counter;

      std::size_t cursor = 0;
      double g_val = 0;
      TensorF loss = TensorF::scalar(0.0f);
      bool have_loss = false;
      if (cfg.with_global()) {
        TensorF g_ce = smoothed_cross_entropy(logits[cursor++], labels, eps);
        g_val = g_ce.item();
        loss = g_ce;
        have_loss = true;
      }
      double l_val = 0;
      if (cursor < logits.size()) {
        TensorF part_sum = smoothed_cross_entropy(logits[cursor], labels, eps);
        for (std::size_t l = cursor + 1; l < logits.size(); ++l) {
          part_sum = add(part_sum, smoothed_cross_entropy(logits[l], labels, eps));
        }
        l_val = part_sum.item();
        TensorF weighted = scale(part_sum, lambda);
        loss = have_loss ? add(loss, weighted) : weighted;
        have_loss = true;
      }
      if (!have_loss) throw DataError("training: model produced no logits");

      const double loss_val = loss.item();
      if (!std::isfinite(loss_val)) {
        throw NumericError("training: non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch starting at sample " + std::to_string(start));
      }
      loss.backward();
      sgd_step(model, sgd, opts.optim, epoch);

      const auto w = static_cast<double>(bn);
      total_sum += w * loss_val;
      global_sum += w * g_val;
      local_sum += w * l_val;
      start = stop;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_total_loss = total_sum / static_cast<double>(n);
    stats.mean_global_loss = global_sum / static_cast<double>(n);
    stats.mean_local_loss = local_sum / static_cast<double>(n);
    stats.lr_new = lr_at(epoch, ParamGroup::head, opts.optim);
    stats.lr_backbone = lr_at(epoch, ParamGroup::backbone, opts.optim);
    if (!protocol.validation.empty()) {
      DescriptorMatrix gallery = descriptors_from_memory(model, norm, protocol.train, train_raw);
      DescriptorMatrix query = descriptors_from_memory(model, norm, protocol.validation, val_raw);
      RankedRun run = rank_and_score(gallery, query);
      stats.val_rank1 = run.cmc.empty() ? 0.0 : run.cmc[0];
    }
    log.push_back(stats);
  }

  return TrainResult{std::move(model), norm, std::move(log)};
}

void write_training_log(const std::string& path, const std::vector<EpochStats>& log,
                        const std::vector<std::string>& header_lines) {
  std::ostringstream out;
  for (const auto& line : header_lines) out << "# " << line << "\n";
  out << "epoch,mean_total_loss,mean_global_loss,mean_local_loss,val_rank1,lr_new,lr_backbone\n";
  char buf[256];
  for (const auto& s : log) {
    std::snprintf(buf, sizeof buf, "%lld,%.6f,%.6f,%.6f,%.6f,%.8g,%.8g\n",
                  static_cast<long long>(s.epoch), s.mean_total_loss, s.mean_global_loss,
                  s.mean_local_loss, s.val_rank1, s.lr_new, s.lr_backbone);
    out << buf;
  }
  atomic_write_file(path, out.str());
}

}  // namespace gpanet
