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

import math

import pytest

import gpanet


def test_smoothed_targets_closed_form():
    q = gpanet.smoothed_targets(2, 4, 0.1)
    assert q == pytest.approx([0.025, 0.025, 0.925, 0.025], abs=0.0)
    assert sum(q) == 1.0


def test_smoothed_targets_rejects_bad_label():
    with pytest.raises(gpanet.DataError):
        gpanet.smoothed_targets(4, 4, 0.1)
    with pytest.raises(gpanet.NumericError):
        gpanet.smoothed_targets(0, 4, 1.5)


def test_partition_regions_balanced():
    regions = gpanet.partition_regions(8, 8, 3, 1)
    heights = [r1 - r0 for (r0, r1, _, _) in regions]
    assert heights == [3, 3, 2]
    assert regions[0][2:] == (0, 8)


def test_cosine_distance():
    assert gpanet.cosine_distance([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert gpanet.cosine_distance([1.0, 0.0], [1.0, 1.0]) == pytest.approx(
        1.0 - 1.0 / math.sqrt(2.0)
    )
    with pytest.raises(gpanet.NumericError):
        gpanet.cosine_distance([0.0, 0.0], [1.0, 0.0])


def test_uniform_logits_loss_value():
    k, p = 6, 3
    logits = [[0.0] * k for _ in range(2)]
    locals_ = [[[0.0] * k for _ in range(2)] for _ in range(p)]
    value = gpanet.total_loss_value(logits, locals_, [0, 5], lambda_=1.0, epsilon=0.1)
    assert value == pytest.approx((1 + p) * math.log(k), rel=1e-6)


def test_cmc_and_map_hand_case():
    cmc, mean_ap = gpanet.cmc_and_map(
        rankings=[[0, 1, 2]],
        query_ids=["a"],
        gallery_ids=["x", "a", "y"],
    )
    assert cmc == pytest.approx([0.0, 1.0, 1.0])
    assert mean_ap == pytest.approx(0.5)


def test_derive_seed_streams_differ():
    a = gpanet.derive_seed(7, 1)
    b = gpanet.derive_seed(7, 2)
    assert a != b
    assert a == gpanet.derive_seed(7, 1)


def test_end_to_end_round_trip(tmp_path):
    data = tmp_path / "data"
    manifest = gpanet.synth_dataset(4, 4, 32, 5, str(data))
    records = gpanet.parse_manifest(manifest)
    assert len(records) == 16
    assert {r["identity"] for r in records} == {"id000", "id001", "id002", "id003"}

    protocols = str(tmp_path / "protocols.json")
    gpanet.split_protocols(manifest, protocols, repetitions=2, seed=5)

    checkpoint = str(tmp_path / "model.gpac")
    summary = gpanet.train(
        protocols,
        checkpoint,
        overrides=[
            "backbone.input_size=32",
            "backbone.last_stride=2",
            "head.h_parts=2",
            "head.v_parts=1",
            "head.reduce_dim=16",
            "optim.epochs=2",
            "optim.batch=4",
        ],
    )
    assert summary["epochs"] == 2
    assert math.isfinite(summary["final_loss"])

    report = gpanet.evaluate(checkpoint, protocols)
    assert len(report["per_repetition"]) == 2
    assert 0.0 <= report["mean_rank1"] <= 1.0
    assert 0.0 <= report["mean_map"] <= 1.0
    assert len(report["cmc"]) >= 1

    descriptors = str(tmp_path / "all.gpae")
    gpanet.extract_descriptors(checkpoint, manifest, descriptors)
    self_report = gpanet.evaluate_descriptor_files(descriptors, descriptors)
    assert self_report["mean_rank1"] == pytest.approx(1.0)


def test_exception_mapping(tmp_path):
    missing = str(tmp_path / "nope.csv")
    with pytest.raises(gpanet.DataError):
        gpanet.parse_manifest(missing)
    with pytest.raises(gpanet.Error):
        gpanet.parse_manifest(missing)
