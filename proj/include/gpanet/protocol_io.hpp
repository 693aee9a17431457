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
#include <string>
#include <vector>

#include "gpanet/datasets.hpp"

namespace gpanet {

/// A protocol file pairs a manifest reference with the repetition splits
/// drawn from it. Records are stored as manifest paths; parsing loads the
/// manifest and rebuilds the full records.
struct ProtocolFile {
  std::string manifest_path;
  Aspect aspect = Aspect::none;
  std::uint64_t seed = 0;
  std::vector<EvalProtocol> protocols;
  std::string image_root;  // directory of the manifest, set when parsing
};

std::string serialize_protocols(const std::string& manifest_path, Aspect aspect,
                                std::uint64_t seed,
                                const std::vector<EvalProtocol>& protocols);

void write_protocols(const std::string& path, const std::string& manifest_path, Aspect aspect,
                     std::uint64_t seed, const std::vector<EvalProtocol>& protocols);

/// Reads a protocol file; a relative manifest path resolves against the
/// protocol file's directory. Every stored path must exist in the manifest.
ProtocolFile read_protocols(const std::string& path);

}  // namespace gpanet
