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

#include "gpanet/protocol_io.hpp"

#include <map>

#include "gpanet/fsio.hpp"
#include "json.hpp"

namespace gpanet {

namespace {

nlohmann::json paths_of(const std::vector<ManifestRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : records) arr.push_back(rec.path);
  return arr;
}

std::vector<ManifestRecord> records_of(const nlohmann::json& arr,
                                       const std::map<std::string, ManifestRecord>& by_path,
                                       const char* field) {
  std::vector<ManifestRecord> out;
  out.reserve(arr.size());
  for (const auto& p : arr) {
    const std::string path = p.get<std::string>();
    const auto it = by_path.find(path);
    if (it == by_path.end()) {
      throw DataError(std::string("protocols: ") + field + " path '" + path +
                      "' is not in the manifest");
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

std::string serialize_protocols(const std::string& manifest_path, Aspect aspect,
                                std::uint64_t seed,
                                const std::vector<EvalProtocol>& protocols) {
  nlohmann::json j;
  j["manifest"] = manifest_path;
  j["aspect"] = aspect_name(aspect);
  j["seed"] = seed;
  j["repetitions"] = nlohmann::json::array();
  for (const auto& proto : protocols) {
    nlohmann::json rep;
    rep["seed"] = proto.repetition_seed;
    rep["train"] = paths_of(proto.train);
    rep["validation"] = paths_of(proto.validation);
    rep["gallery"] = paths_of(proto.gallery);
    rep["query"] = paths_of(proto.query);
    j["repetitions"].push_back(std::move(rep));
  }
  return j.dump(2) + "\n";
}

void write_protocols(const std::string& path, const std::string& manifest_path, Aspect aspect,
                     std::uint64_t seed, const std::vector<EvalProtocol>& protocols) {
  atomic_write_file(path, serialize_protocols(manifest_path, aspect, seed, protocols));
}

ProtocolFile read_protocols(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("protocols: '" + path + "' is not valid JSON: " + e.what());
  }
  ProtocolFile file;
  try {
    file.manifest_path = j.at("manifest").get<std::string>();
    file.aspect = aspect_from(j.at("aspect").get<std::string>());
    file.seed = j.at("seed").get<std::uint64_t>();

    std::string manifest_on_disk = file.manifest_path;
    if (!manifest_on_disk.empty() && manifest_on_disk[0] != '/') {
      manifest_on_disk = resolve_path(parent_dir(path), manifest_on_disk);
    }
    file.image_root = parent_dir(manifest_on_disk);
    std::map<std::string, ManifestRecord> by_path;
    for (const auto& rec : parse_manifest(manifest_on_disk)) by_path[rec.path] = rec;

    for (const auto& rep : j.at("repetitions")) {
      EvalProtocol proto;
      proto.repetition_seed = rep.at("seed").get<std::uint64_t>();
      proto.train = records_of(rep.at("train"), by_path, "train");
      proto.validation = records_of(rep.at("validation"), by_path, "validation");
      proto.gallery = records_of(rep.at("gallery"), by_path, "gallery");
      proto.query = records_of(rep.at("query"), by_path, "query");
      file.protocols.push_back(std::move(proto));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("protocols: '" + path + "' malformed: " + e.what());
  }
  if (file.protocols.empty()) throw DataError("protocols: '" + path + "' holds no repetitions");
  return file;
}

}  // namespace gpanet
