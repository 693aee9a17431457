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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gpanet/errors.hpp"
#include "gpanet/tensor.hpp"

namespace gpanet {

enum class Aspect { dorsal_right, dorsal_left, palmar_right, palmar_left, none };

const char* aspect_name(Aspect a);
Aspect aspect_from(const std::string& name);

struct ManifestRecord {
  std::string path;
  std::string identity;
  Aspect aspect = Aspect::none;
  bool accessories = false;
  std::vector<std::string> tags;

  bool has_tag(const std::string& tag) const;
  bool is_distractor() const { return has_tag("distractor"); }
};

/// Header-row CSV with columns path,identity,aspect,accessories,tags. Errors
/// name the offending line.
std::vector<ManifestRecord> parse_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

/// Numeric-aware ordering: digit runs compare by value, everything else by
/// bytes, so id2 < id10 and identity labels sort the way subject numbers do.
bool natural_less(const std::string& a, const std::string& b);

struct SplitIds {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Drops accessory-flagged and distractor records, keeps the requested
/// aspect, orders identities naturally, and assigns the first ceil(n/2)
/// identities to training. The split is deterministic; the seed only labels
/// downstream randomness.
SplitIds filter_and_split(const std::vector<ManifestRecord>& records, Aspect aspect,
                          std::uint64_t seed);

struct GalleryQuery {
  std::vector<ManifestRecord> gallery;
  std::vector<ManifestRecord> query;
};

/// One uniformly random gallery image per test identity of every sub-
/// dataset, remaining images become queries; distractor records append to
/// the gallery. Distractor identities must not collide with test identities.
GalleryQuery build_gallery_query(const std::vector<std::vector<ManifestRecord>>& test_sets,
                                 std::uint64_t seed,
                                 const std::vector<ManifestRecord>& distractors);

struct EvalProtocol {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;  // one image per train identity
  std::vector<ManifestRecord> gallery;
  std::vector<ManifestRecord> query;
  std::uint64_t repetition_seed = 0;
};

struct ProtocolConfig {
  Aspect aspect = Aspect::none;
};

/// Repetition protocols over one manifest: the identity split is fixed,
/// while gallery and validation image picks are redrawn per repetition from
/// seeds derived off the master seed. Distractor-tagged records of the same
/// aspect join every gallery.
std::vector<EvalProtocol> make_repetitions(const std::vector<ManifestRecord>& records,
                                           const ProtocolConfig& cfg, int n_reps,
                                           std::uint64_t master_seed);

/// Planar float image, channel-major (3 x height x width), values in [0,1].
struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<float> pixels;

  float& at(int channel, std::int64_t r, std::int64_t c) {
    return pixels[static_cast<std::size_t>((channel * height + r) * width + c)];
  }
  float at(int channel, std::int64_t r, std::int64_t c) const {
    return pixels[static_cast<std::size_t>((channel * height + r) * width + c)];
  }
};

/// Binary 8-bit PPM (P6) I/O.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& image);

/// Bilinear resize. Sample r of the output maps to source coordinate
/// (r + 0.5) * height/out - 0.5 (half-pixel centers, the align_corners=false
/// convention); border samples clamp.
Image resize_bilinear(const Image& image, std::int64_t out_height, std::int64_t out_width);

Image hflip(const Image& image);

struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};
};

/// Per-channel mean and standard deviation over a set of images.
NormStats compute_norm_stats(const std::vector<Image>& images);

/// Train mode: horizontal flip (prob flip_prob), multiplicative brightness,
/// contrast around the image mean, saturation around the per-pixel gray,
/// each with a factor uniform in [1-jitter, 1+jitter], clamp to [0,1], then
/// per-channel standardization. Eval mode standardizes only.
Image augment(const Image& image, Mode mode, const NormStats& stats, double jitter,
              double flip_prob, std::uint64_t seed);

/// Renders num_ids synthetic identities, imgs_per_id images each, as PPM
/// files under out_dir/images plus a manifest; returns the manifest path.
/// Identities get distinct tints, stripe layouts, and blob placements so
/// raw pixels already separate them; per-image shifts, brightness, and noise
/// provide within-identity variation.
std::string synth_dataset(int num_ids, int imgs_per_id, int size, std::uint64_t seed,
                          const std::string& out_dir);

/// Joins a manifest-relative record path onto the manifest's directory.
std::string resolve_path(const std::string& root, const std::string& relative);

/// Directory part of a path ("." when none).
std::string parent_dir(const std::string& path);

}  // namespace gpanet
