import json

import numpy as np
import pytest

from fvl.boxes import BoundingBox
from fvl.errors import ValidationError
from fvl.metrics import (EvalReport, SampleResult, build_reports,
                         displacement_errors, final_iou, reports_to_json,
                         split_cases)
from fvl.rng import Xoshiro256


def test_perfect_prediction_scores_zero():
    truth = np.array([[10.0, 20.0, 5.0, 5.0], [12.0, 21.0, 5.0, 5.0]])
    assert displacement_errors(truth, truth) == (0.0, 0.0)


def test_constant_three_four_offset_gives_five():
    truth = Xoshiro256(4).uniforms((10, 4), 50.0, 500.0)
    pred = truth.copy()
    pred[:, 0] += 3.0
    pred[:, 1] += 4.0
    fde, ade = displacement_errors(pred, truth)
    assert fde == 5.0
    assert ade == 5.0


def test_growing_offset_means():
    truth = np.tile([100.0, 100.0, 10.0, 10.0], (10, 1))
    pred = truth.copy()
    pred[:, 0] += np.arange(1, 11)
    fde, ade = displacement_errors(pred, truth)
    assert fde == 10.0
    assert ade == 5.5


def test_displacement_errors_rejects_length_mismatch():
    a = np.zeros((3, 4)) + [0, 0, 1, 1]
    b = np.zeros((4, 4)) + [0, 0, 1, 1]
    with pytest.raises(ValidationError, match="differ"):
        displacement_errors(a, b)


def test_iou_identical_and_disjoint():
    box = BoundingBox(cx=5.0, cy=5.0, w=10.0, h=10.0)
    assert final_iou(box, box) == 1.0
    far = BoundingBox(cx=100.0, cy=100.0, w=10.0, h=10.0)
    assert final_iou(box, far) == 0.0


def test_iou_half_overlap_is_one_third():
    a = BoundingBox(cx=5.0, cy=5.0, w=10.0, h=10.0)
    b = BoundingBox(cx=10.0, cy=5.0, w=10.0, h=10.0)
    assert final_iou(a, b) == 1.0 / 3.0


def test_iou_symmetry_and_scale_invariance():
    rng = Xoshiro256(44)
    for _ in range(25):
        a = rng.uniforms((4,), 5.0, 50.0)
        b = rng.uniforms((4,), 5.0, 50.0)
        assert final_iou(a, b) == final_iou(b, a)
        scale = rng.uniform(0.1, 10.0)
        assert abs(final_iou(a * scale, b * scale) - final_iou(a, b)) < 1e-12


def test_iou_tolerates_degenerate_extents():
    collapsed = np.array([5.0, 5.0, -1.0, 10.0])
    box = np.array([5.0, 5.0, 10.0, 10.0])
    assert final_iou(collapsed, box) == 0.0
    assert final_iou(collapsed, collapsed) == 0.0


def test_single_step_ade_equals_fde():
    pred = np.array([[4.0, 7.0, 2.0, 2.0]])
    truth = np.array([[1.0, 3.0, 2.0, 2.0]])
    fde, ade = displacement_errors(pred, truth)
    assert fde == ade == 5.0


def test_split_identical_fdes_all_challenging():
    easy, challenging = split_cases([7.5, 7.5, 7.5])
    assert easy == []
    assert challenging == [0, 1, 2]


def test_split_two_point_example():
    easy, challenging = split_cases([10.0, 90.0])
    assert easy == [0]
    assert challenging == [1]


def test_split_matches_independent_recomputation():
    fdes = Xoshiro256(5).uniforms((40,), 0.0, 30.0)
    easy, challenging = split_cases(fdes)
    threshold = float(np.mean(fdes))
    for i in easy:
        assert fdes[i] < threshold
    for i in challenging:
        assert fdes[i] >= threshold
    assert sorted(easy + challenging) == list(range(40))


def test_split_rejects_empty_input():
    with pytest.raises(ValidationError, match="empty"):
        split_cases([])


def test_report_means_match_records():
    rng = Xoshiro256(6)
    records = [SampleResult(index=i, fde=rng.uniform(0, 20),
                            ade=rng.uniform(0, 10), fiou=rng.uniform(0, 1))
               for i in range(12)]
    report = EvalReport(case="all", records=records)
    assert abs(report.fde - np.mean([r.fde for r in records])) < 1e-12
    assert abs(report.ade - np.mean([r.ade for r in records])) < 1e-12
    assert abs(report.fiou - np.mean([r.fiou for r in records])) < 1e-12
    assert report.count == 12
    with pytest.raises(ValidationError, match="empty"):
        EvalReport(case="all", records=[])


def test_build_reports_partitions_and_serializes():
    rng = Xoshiro256(7)
    truths = [rng.uniforms((5, 4), 50.0, 400.0) for _ in range(8)]
    preds = [t + rng.uniforms((5, 4), -4.0, 4.0) for t in truths]
    reference = [1.0, 1.0, 1.0, 1.0, 9.0, 9.0, 9.0, 9.0]
    reports = build_reports(preds, truths, reference)
    assert reports["all"].count == 8
    assert reports["easy"].count == 4
    assert reports["challenging"].count == 4
    assert {r.index for r in reports["easy"].records} == {0, 1, 2, 3}

    payload = json.loads(reports_to_json(reports))
    assert payload["all"]["count"] == 8
    assert payload["easy"]["fde"] == reports["easy"].fde
    assert len(payload["challenging"]["samples"]) == 4
