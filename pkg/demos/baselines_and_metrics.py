"""Fit the polynomial baselines to tracks of known degree and score them
with the displacement / overlap metrics and the split reporting.

    python3 demos/baselines_and_metrics.py
"""

import json

import numpy as np

from fvl.baselines import BASELINE_DEGREES, fit_extrapolate
from fvl.boxes import BoundingBox
from fvl.metrics import (
    build_reports,
    displacement_errors,
    final_iou,
    reports_to_json,
)
from fvl.rng import Xoshiro256


def quadratic_track(rng, length):
    t = np.arange(length, dtype=np.float64)
    track = np.empty((length, 4))
    track[:, 0] = rng.uniform(200, 800) + rng.uniform(-4, 4) * t + 0.05 * t * t
    track[:, 1] = rng.uniform(150, 350) + rng.uniform(-2, 2) * t
    track[:, 2] = rng.uniform(40, 90) + 0.3 * t
    track[:, 3] = rng.uniform(30, 70) + 0.2 * t
    return track


def main():
    rng = Xoshiro256(9)
    track = quadratic_track(rng, 20)
    past, future = track[:10], track[10:]

    print("a constant-acceleration track, extrapolated 10 frames ahead:")
    for name, degree in BASELINE_DEGREES.items():
        pred = fit_extrapolate(past, degree, 10)
        fde, ade = displacement_errors(pred, future)
        print(f"  {name:<10} (degree {degree}): FDE {fde:9.4f} px, "
              f"ADE {ade:9.4f} px")
    print("degree 2 recovers its own class exactly; degree 1 cannot")

    print()
    box = BoundingBox(cx=5.0, cy=5.0, w=10.0, h=10.0)
    shifted = BoundingBox(cx=10.0, cy=5.0, w=10.0, h=10.0)
    print(f"IoU of a box with itself: {final_iou(box, box)}")
    print(f"IoU after shifting by half a width: {final_iou(box, shifted)} "
          f"(exactly 1/3: {final_iou(box, shifted) == 1.0 / 3.0})")

    # score twenty noisy linear tracks and split them by difficulty
    predictions, truths, reference = [], [], []
    for _ in range(20):
        t = quadratic_track(rng, 20)
        pred = fit_extrapolate(t[:10], 1, 10)
        pred_noisy = pred + rng.uniforms(pred.shape, -2.0, 2.0)
        predictions.append(pred_noisy)
        truths.append(t[10:])
        reference.append(displacement_errors(pred, t[10:])[0])

    reports = build_reports(predictions, truths, reference)
    print()
    print("evaluation rows (easy/challenging split on the reference FDE):")
    for case in ("all", "easy", "challenging"):
        print(" ", reports[case].row())
    data = json.loads(reports_to_json(reports))
    print()
    print("aggregates from the JSON export (per-sample rows omitted):")
    for case in ("all", "easy", "challenging"):
        body = data[case]
        print(f"  {case}: count={body['count']} fde={body['fde']:.3f} "
              f"ade={body['ade']:.3f} fiou={body['fiou']:.4f}")


if __name__ == "__main__":
    main()
