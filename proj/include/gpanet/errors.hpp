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

#include <stdexcept>
#include <string>

namespace gpanet {

/// Base class for all library failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape or index-range disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (manifests, protocols, files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or violated numeric preconditions.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpanet
