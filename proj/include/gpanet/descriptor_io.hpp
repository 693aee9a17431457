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

#include <string>

#include "gpanet/retrieval_eval.hpp"

namespace gpanet {

/// Descriptor file format: magic "GPAE", u32 row count, u32 dimension, then
/// per row a u16-length identity, a u8 distractor flag, and dimension f32
/// values, all little-endian.
std::string serialize_descriptors(const DescriptorMatrix& m);
DescriptorMatrix parse_descriptors(const std::string& bytes);

void write_descriptors(const std::string& path, const DescriptorMatrix& m);
DescriptorMatrix read_descriptors(const std::string& path);

}  // namespace gpanet
