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

#include "gpanet/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "gpanet/fsio.hpp"
#include "gpanet/rng.hpp"

namespace gpanet {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t at = 0;
  for (;;) {
    const std::size_t next = s.find(sep, at);
    if (next == std::string::npos) {
      out.push_back(s.substr(at));
      return out;
    }
    out.push_back(s.substr(at, next - at));
    at = next + 1;
  }
}

[[noreturn]] void manifest_error(const std::string& path, std::size_t line,
                                 const std::string& what) {
  throw DataError("manifest " + path + ": line " + std::to_string(line) + ": " + what);
}

}  // namespace

const char* aspect_name(Aspect a) {
  switch (a) {
    case Aspect::dorsal_right: return "dorsal_right";
    case Aspect::dorsal_left: return "dorsal_left";
    case Aspect::palmar_right: return "palmar_right";
    case Aspect::palmar_left: return "palmar_left";
    case Aspect::none: return "none";
  }
  throw DataError("aspect: unknown value");
}

Aspect aspect_from(const std::string& name) {
  if (name == "dorsal_right") return Aspect::dorsal_right;
  if (name == "dorsal_left") return Aspect::dorsal_left;
  if (name == "palmar_right") return Aspect::palmar_right;
  if (name == "palmar_left") return Aspect::palmar_left;
  if (name == "none") return Aspect::none;
  throw DataError("aspect: unknown value '" + name + "'");
}

bool ManifestRecord::has_tag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

std::vector<ManifestRecord> parse_manifest(const std::string& path) {
  std::istringstream in(read_file_bytes(path));
  std::string line;
  std::size_t line_no = 0;
  std::vector<ManifestRecord> records;
  std::unordered_set<std::string> seen_paths;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!saw_header) {
      const auto cols = split(line, ',');
      const std::vector<std::string> expected{"path", "identity", "aspect", "accessories", "tags"};
      if (cols.size() != expected.size()) {
        manifest_error(path, line_no, "expected header path,identity,aspect,accessories,tags");
      }
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (trim(cols[i]) != expected[i]) {
          manifest_error(path, line_no, "expected header column '" + expected[i] + "', got '" +
                                            trim(cols[i]) + "'");
        }
      }
      saw_header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 5) {
      manifest_error(path, line_no,
                     "expected 5 columns, got " + std::to_string(cols.size()));
    }
    ManifestRecord rec;
    rec.path = trim(cols[0]);
    rec.identity = trim(cols[1]);
    if (rec.path.empty()) manifest_error(path, line_no, "empty path");
    if (rec.identity.empty()) manifest_error(path, line_no, "empty identity");
    if (!seen_paths.insert(rec.path).second) {
      manifest_error(path, line_no, "duplicate path '" + rec.path + "'");
    }
    try {
      rec.aspect = aspect_from(trim(cols[2]));
    } catch (const DataError& e) {
      manifest_error(path, line_no, e.what());
    }
    const std::string acc = trim(cols[3]);
    if (acc != "0" && acc != "1") {
      manifest_error(path, line_no, "accessories must be 0 or 1, got '" + acc + "'");
    }
    rec.accessories = acc == "1";
    for (const auto& tag : split(trim(cols[4]), ';')) {
      const std::string t = trim(tag);
      if (!t.empty()) rec.tags.push_back(t);
    }
    records.push_back(std::move(rec));
  }
  if (!saw_header) throw DataError("manifest " + path + ": empty file");
  return records;
}

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ostringstream out;
  out << "path,identity,aspect,accessories,tags\n";
  for (const auto& rec : records) {
    out << rec.path << ',' << rec.identity << ',' << aspect_name(rec.aspect) << ','
        << (rec.accessories ? '1' : '0') << ',';
    for (std::size_t i = 0; i < rec.tags.size(); ++i) {
      if (i) out << ';';
      out << rec.tags[i];
    }
    out << '\n';
  }
  atomic_write_file(path, out.str());
}

bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ia = i, jb = j;
      while (ia < a.size() && std::isdigit(static_cast<unsigned char>(a[ia]))) ++ia;
      while (jb < b.size() && std::isdigit(static_cast<unsigned char>(b[jb]))) ++jb;
      std::size_t sa = i, sb = j;
      while (sa < ia - 1 && a[sa] == '0') ++sa;  // strip leading zeros
      while (sb < jb - 1 && b[sb] == '0') ++sb;
      const std::size_t la = ia - sa, lb = jb - sb;
      if (la != lb) return la < lb;
      for (std::size_t t = 0; t < la; ++t) {
        if (a[sa + t] != b[sb + t]) return a[sa + t] < b[sb + t];
      }
      // Equal value; more leading zeros sorts first for a total order.
      if (ia - i != jb - j) return ia - i > jb - j;
      i = ia;
      j = jb;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return a.size() - i < b.size() - j;
}

namespace {

bool usable(const ManifestRecord& rec, Aspect aspect) {
  return rec.aspect == aspect && !rec.accessories && !rec.is_distractor();
}

std::vector<std::string> sorted_identities(const std::vector<ManifestRecord>& records,
                                           Aspect aspect) {
  std::set<std::string> ids;
  for (const auto& rec : records) {
    if (usable(rec, aspect)) ids.insert(rec.identity);
  }
  std::vector<std::string> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end(), natural_less);
  return out;
}

/// Records of each identity, identities in natural order.
std::vector<std::pair<std::string, std::vector<ManifestRecord>>> group_by_identity(
    const std::vector<ManifestRecord>& records) {
  std::map<std::string, std::vector<ManifestRecord>> groups;
  for (const auto& rec : records) groups[rec.identity].push_back(rec);
  std::vector<std::pair<std::string, std::vector<ManifestRecord>>> out(groups.begin(),
                                                                       groups.end());
  std::sort(out.begin(), out.end(),
            [](const auto& x, const auto& y) { return natural_less(x.first, y.first); });
  return out;
}

}  // namespace

SplitIds filter_and_split(const std::vector<ManifestRecord>& records, Aspect aspect,
                          std::uint64_t seed) {
  (void)seed;  // the identity split is order-based, not randomized
  const auto ids = sorted_identities(records, aspect);
  if (ids.size() < 2) {
    throw DataError("split: need at least 2 identities for aspect " +
                    std::string(aspect_name(aspect)) + ", found " + std::to_string(ids.size()));
  }
  const std::size_t train_count = (ids.size() + 1) / 2;
  SplitIds out;
  out.train_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_count));
  out.test_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_count), ids.end());
  return out;
}

GalleryQuery build_gallery_query(const std::vector<std::vector<ManifestRecord>>& test_sets,
                                 std::uint64_t seed,
                                 const std::vector<ManifestRecord>& distractors) {
  GalleryQuery out;
  std::set<std::string> test_identities;
  Rng rng(derive_seed(seed, 0x67616c6cull));
  for (const auto& records : test_sets) {
    for (const auto& [identity, imgs] : group_by_identity(records)) {
      test_identities.insert(identity);
      if (imgs.size() < 2) {
        throw DataError("gallery: identity '" + identity +
                        "' has a single image; cannot form gallery and query");
      }
      const std::size_t pick = static_cast<std::size_t>(rng.below(imgs.size()));
      for (std::size_t i = 0; i < imgs.size(); ++i) {
        (i == pick ? out.gallery : out.query).push_back(imgs[i]);
      }
    }
  }
  for (const auto& rec : distractors) {
    if (test_identities.count(rec.identity)) {
      throw DataError("gallery: distractor identity '" + rec.identity +
                      "' collides with a test identity");
    }
    out.gallery.push_back(rec);
  }
  return out;
}

std::vector<EvalProtocol> make_repetitions(const std::vector<ManifestRecord>& records,
                                           const ProtocolConfig& cfg, int n_reps,
                                           std::uint64_t master_seed) {
  if (n_reps < 1) throw DataError("protocol: need at least one repetition");
  const SplitIds split = filter_and_split(records, cfg.aspect, master_seed);
  const std::set<std::string> train_set(split.train_ids.begin(), split.train_ids.end());
  const std::set<std::string> test_set(split.test_ids.begin(), split.test_ids.end());

  std::vector<ManifestRecord> train_pool, test_pool, distractors;
  for (const auto& rec : records) {
    if (rec.aspect != cfg.aspect || rec.accessories) continue;
    if (rec.is_distractor()) {
      distractors.push_back(rec);
    } else if (train_set.count(rec.identity)) {
      train_pool.push_back(rec);
    } else if (test_set.count(rec.identity)) {
      test_pool.push_back(rec);
    }
  }
  for (const auto& rec : distractors) {
    if (train_set.count(rec.identity) || test_set.count(rec.identity)) {
      throw DataError("protocol: distractor identity '" + rec.identity +
                      "' collides with a split identity");
    }
  }

  const auto train_groups = group_by_identity(train_pool);
  for (const auto& [identity, imgs] : train_groups) {
    if (imgs.size() < 2) {
      throw DataError("protocol: train identity '" + identity +
                      "' has a single image; cannot hold out validation");
    }
  }

  std::vector<EvalProtocol> protocols;
  protocols.reserve(static_cast<std::size_t>(n_reps));
  for (int rep = 0; rep < n_reps; ++rep) {
    const std::uint64_t rep_seed = derive_seed(master_seed, static_cast<std::uint64_t>(rep));
    EvalProtocol proto;
    proto.repetition_seed = rep_seed;
    Rng val_rng(derive_seed(rep_seed, 1));
    for (const auto& [identity, imgs] : train_groups) {
      const std::size_t pick = static_cast<std::size_t>(val_rng.below(imgs.size()));
      for (std::size_t i = 0; i < imgs.size(); ++i) {
        (i == pick ? proto.validation : proto.train).push_back(imgs[i]);
      }
    }
    GalleryQuery gq = build_gallery_query({test_pool}, derive_seed(rep_seed, 2), distractors);
    proto.gallery = std::move(gq.gallery);
    proto.query = std::move(gq.query);
    for (const auto& rec : proto.gallery) {
      if (train_set.count(rec.identity)) {
        throw DataError("protocol: train identity '" + rec.identity + "' leaked into the gallery");
      }
    }
    protocols.push_back(std::move(proto));
  }
  return protocols;
}

Image read_ppm(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  std::size_t at = 0;
  auto token = [&]() {
    // Skip whitespace and '#' comment lines between header fields.
    for (;;) {
      while (at < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
      if (at < bytes.size() && bytes[at] == '#') {
        while (at < bytes.size() && bytes[at] != '\n') ++at;
        continue;
      }
      break;
    }
    const std::size_t start = at;
    while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
    if (start == at) throw DataError("ppm " + path + ": truncated header");
    return bytes.substr(start, at - start);
  };
  if (token() != "P6") throw DataError("ppm " + path + ": not a binary P6 file");
  const long width = std::stol(token());
  const long height = std::stol(token());
  const long maxval = std::stol(token());
  if (width < 1 || height < 1) throw DataError("ppm " + path + ": bad dimensions");
  if (maxval != 255) {
    throw DataError("ppm " + path + ": only 8-bit files supported, maxval " +
                    std::to_string(maxval));
  }
  ++at;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - at < need) {
    throw DataError("ppm " + path + ": expected " + std::to_string(need) + " pixel bytes, got " +
                    std::to_string(bytes.size() - at));
  }
  Image img;
  img.width = width;
  img.height = height;
  img.pixels.resize(need);
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + at);
  for (long r = 0; r < height; ++r)
    for (long c = 0; c < width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        img.at(ch, r, c) = static_cast<float>(raw[(r * width + c) * 3 + ch]) / 255.0f;
      }
  return img;
}

void write_ppm(const std::string& path, const Image& image) {
  std::string bytes = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                      "\n255\n";
  bytes.reserve(bytes.size() +
                static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3);
  for (std::int64_t r = 0; r < image.height; ++r)
    for (std::int64_t c = 0; c < image.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const float v = std::min(1.0f, std::max(0.0f, image.at(ch, r, c)));
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
      }
  atomic_write_file(path, bytes);
}

Image resize_bilinear(const Image& image, std::int64_t out_height, std::int64_t out_width) {
  if (out_height < 1 || out_width < 1) throw ShapeError("resize: target extents must be positive");
  if (out_height == image.height && out_width == image.width) return image;
  Image out;
  out.width = out_width;
  out.height = out_height;
  out.pixels.resize(static_cast<std::size_t>(3 * out_height * out_width));
  const double sy = static_cast<double>(image.height) / static_cast<double>(out_height);
  const double sx = static_cast<double>(image.width) / static_cast<double>(out_width);
  for (std::int64_t r = 0; r < out_height; ++r) {
    const double fy = (static_cast<double>(r) + 0.5) * sy - 0.5;
    const std::int64_t y0 = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::floor(fy)), 0, image.height - 1);
    const std::int64_t y1 = std::min<std::int64_t>(y0 + 1, image.height - 1);
    const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
    for (std::int64_t c = 0; c < out_width; ++c) {
      const double fx = (static_cast<double>(c) + 0.5) * sx - 0.5;
      const std::int64_t x0 = std::clamp<std::int64_t>(
          static_cast<std::int64_t>(std::floor(fx)), 0, image.width - 1);
      const std::int64_t x1 = std::min<std::int64_t>(x0 + 1, image.width - 1);
      const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - wx) * image.at(ch, y0, x0) + wx * image.at(ch, y0, x1);
        const double bottom = (1.0 - wx) * image.at(ch, y1, x0) + wx * image.at(ch, y1, x1);
        out.at(ch, r, c) = static_cast<float>((1.0 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Image hflip(const Image& image) {
  Image out = image;
  for (int ch = 0; ch < 3; ++ch)
    for (std::int64_t r = 0; r < image.height; ++r)
      for (std::int64_t c = 0; c < image.width; ++c) {
        out.at(ch, r, c) = image.at(ch, r, image.width - 1 - c);
      }
  return out;
}

NormStats compute_norm_stats(const std::vector<Image>& images) {
  if (images.empty()) throw DataError("norm stats: no images");
  NormStats stats;
  for (int ch = 0; ch < 3; ++ch) {
    double sum = 0, sumsq = 0;
    std::int64_t count = 0;
    for (const auto& img : images) {
      for (std::int64_t r = 0; r < img.height; ++r)
        for (std::int64_t c = 0; c < img.width; ++c) {
          const double v = img.at(ch, r, c);
          sum += v;
          sumsq += v * v;
          ++count;
        }
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
    stats.mean[static_cast<std::size_t>(ch)] = mean;
    stats.std[static_cast<std::size_t>(ch)] = std::sqrt(var);
  }
  return stats;
}

Image augment(const Image& image, Mode mode, const NormStats& stats, double jitter,
              double flip_prob, std::uint64_t seed) {
  Image out = image;
  if (mode == Mode::train) {
    Rng rng(seed);
    if (rng.bernoulli(flip_prob)) out = hflip(out);
    const float brightness = static_cast<float>(rng.uniform(1.0 - jitter, 1.0 + jitter));
    const float contrast = static_cast<float>(rng.uniform(1.0 - jitter, 1.0 + jitter));
    const float saturation = static_cast<float>(rng.uniform(1.0 - jitter, 1.0 + jitter));
    for (auto& v : out.pixels) v *= brightness;
    double mean = 0;
    for (const float v : out.pixels) mean += v;
    const float m = static_cast<float>(mean / static_cast<double>(out.pixels.size()));
    for (auto& v : out.pixels) v = m + (v - m) * contrast;
    const std::int64_t plane = out.height * out.width;
    for (std::int64_t px = 0; px < plane; ++px) {
      const float gray = (out.pixels[static_cast<std::size_t>(px)] +
                          out.pixels[static_cast<std::size_t>(plane + px)] +
                          out.pixels[static_cast<std::size_t>(2 * plane + px)]) /
                         3.0f;
      for (int ch = 0; ch < 3; ++ch) {
        float& v = out.pixels[static_cast<std::size_t>(ch * plane + px)];
        v = gray + (v - gray) * saturation;
      }
    }
    for (auto& v : out.pixels) v = std::min(1.0f, std::max(0.0f, v));
  }
  const std::int64_t plane = out.height * out.width;
  for (int ch = 0; ch < 3; ++ch) {
    const double sd = stats.std[static_cast<std::size_t>(ch)];
    if (sd <= 0.0) {
      throw DataError("augment: channel " + std::to_string(ch) + " has zero std");
    }
    const float mean = static_cast<float>(stats.mean[static_cast<std::size_t>(ch)]);
    const float inv = static_cast<float>(1.0 / sd);
    for (std::int64_t px = 0; px < plane; ++px) {
      float& v = out.pixels[static_cast<std::size_t>(ch * plane + px)];
      v = (v - mean) * inv;
    }
  }
  return out;
}

namespace {

void hsv_to_rgb(double h, double s, double v, double rgb[3]) {
  const double hh = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
    case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
    case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
    case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
    case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
    default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
  }
}

}  // namespace

std::string synth_dataset(int num_ids, int imgs_per_id, int size, std::uint64_t seed,
                          const std::string& out_dir) {
  if (num_ids < 2) throw DataError("synth: need at least 2 identities");
  if (imgs_per_id < 2) throw DataError("synth: need at least 2 images per identity");
  if (size < 8) throw DataError("synth: size must be at least 8");
  std::error_code ec;
  std::filesystem::create_directories(out_dir + "/images", ec);
  if (ec) throw DataError("synth: cannot create '" + out_dir + "/images': " + ec.message());

  std::vector<ManifestRecord> records;
  const std::int64_t s64 = size;
  for (int id = 0; id < num_ids; ++id) {
    Rng base_rng(derive_seed(seed, 0x73796e74ull, static_cast<std::uint64_t>(id)));
    // Identity signature: a tint, an oriented stripe wave, and two blobs.
    const double hue = id * 0.6180339887498949 - std::floor(id * 0.6180339887498949);
    const double sat = 0.5 + 0.4 * base_rng.uniform();
    const double val = 0.55 + 0.3 * base_rng.uniform();
    double tint[3];
    hsv_to_rgb(hue, sat, val, tint);
    const int orientation = id % 4;
    const std::int64_t period = 6 + static_cast<std::int64_t>(base_rng.below(7));
    const std::int64_t phase = static_cast<std::int64_t>(base_rng.below(static_cast<std::uint64_t>(period)));
    const double stripe_amp = 0.16;
    struct Blob {
      double row, col, radius, weight[3];
    };
    Blob blobs[2];
    for (auto& blob : blobs) {
      blob.row = base_rng.uniform(0.2, 0.8) * size;
      blob.col = base_rng.uniform(0.2, 0.8) * size;
      blob.radius = base_rng.uniform(0.10, 0.20) * size;
      for (double& w : blob.weight) w = base_rng.uniform(-0.3, 0.3);
    }

    Image base;
    base.width = size;
    base.height = size;
    base.pixels.resize(static_cast<std::size_t>(3 * s64 * s64));
    for (std::int64_t r = 0; r < s64; ++r)
      for (std::int64_t c = 0; c < s64; ++c) {
        std::int64_t coord = 0;
        switch (orientation) {
          case 0: coord = r; break;
          case 1: coord = c; break;
          case 2: coord = r + c; break;
          default: coord = r - c + s64; break;
        }
        const double wave = ((coord + phase) / period) % 2 == 0 ? 1.0 : -1.0;
        for (int ch = 0; ch < 3; ++ch) {
          double v = tint[ch] + stripe_amp * wave;
          for (const auto& blob : blobs) {
            const double dr = static_cast<double>(r) - blob.row;
            const double dc = static_cast<double>(c) - blob.col;
            v += blob.weight[ch] *
                 std::exp(-(dr * dr + dc * dc) / (2.0 * blob.radius * blob.radius));
          }
          base.at(ch, r, c) = static_cast<float>(v);
        }
      }

    char identity[16];
    std::snprintf(identity, sizeof identity, "id%03d", id);
    for (int j = 0; j < imgs_per_id; ++j) {
      Rng img_rng(derive_seed(seed, 0x696d6167ull, static_cast<std::uint64_t>(id),
                              static_cast<std::uint64_t>(j)));
      const std::int64_t dr = static_cast<std::int64_t>(img_rng.below(7)) - 3;
      const std::int64_t dc = static_cast<std::int64_t>(img_rng.below(7)) - 3;
      const double brightness = img_rng.uniform(0.92, 1.08);
      Image img;
      img.width = size;
      img.height = size;
      img.pixels.resize(base.pixels.size());
      for (int ch = 0; ch < 3; ++ch)
        for (std::int64_t r = 0; r < s64; ++r)
          for (std::int64_t c = 0; c < s64; ++c) {
            const std::int64_t sr = (r + dr % s64 + s64) % s64;
            const std::int64_t sc = (c + dc % s64 + s64) % s64;
            const double v =
                base.at(ch, sr, sc) * brightness + 0.02 * img_rng.normal();
            img.at(ch, r, c) = static_cast<float>(std::min(1.0, std::max(0.0, v)));
          }
      char filename[48];
      std::snprintf(filename, sizeof filename, "images/%s_%02d.ppm", identity, j);
      write_ppm(out_dir + "/" + filename, img);
      ManifestRecord rec;
      rec.path = filename;
      rec.identity = identity;
      rec.aspect = Aspect::none;
      records.push_back(std::move(rec));
    }
  }
  const std::string manifest_path = out_dir + "/manifest.csv";
  write_manifest(manifest_path, records);
  return manifest_path;
}

std::string resolve_path(const std::string& root, const std::string& relative) {
  if (!relative.empty() && relative.front() == '/') return relative;
  if (root.empty() || root == ".") return relative;
  return root.back() == '/' ? root + relative : root + "/" + relative;
}

std::string parent_dir(const std::string& path) {
  const std::size_t slash = path.find_last_of('/');
  if (slash == std::string::npos) return ".";
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

}  // namespace gpanet
