# Copyright (c) 2026 The gpanet Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Identity recognition from images: dual-branch feature learning, descriptor
extraction, and cosine-distance retrieval evaluation."""

from gpanet._core import (
    DataError,
    Error,
    NumericError,
    ShapeError,
    ablate,
    cmc_and_map,
    cosine_distance,
    derive_seed,
    evaluate,
    evaluate_descriptor_files,
    extract_descriptors,
    grad_check_suite,
    parse_manifest,
    partition_regions,
    smoothed_targets,
    split_protocols,
    synth_dataset,
    total_loss_value,
    train,
)

__all__ = [
    "DataError",
    "Error",
    "NumericError",
    "ShapeError",
    "ablate",
    "cmc_and_map",
    "cosine_distance",
    "derive_seed",
    "evaluate",
    "evaluate_descriptor_files",
    "extract_descriptors",
    "grad_check_suite",
    "parse_manifest",
    "partition_regions",
    "smoothed_targets",
    "split_protocols",
    "synth_dataset",
    "total_loss_value",
    "train",
]

__version__ = "0.1.0"
