import numpy as np
import pytest

from fvl.boxes import BoundingBox
from fvl.errors import DataFormatError, ValidationError
from fvl.flowfeat import (FlowGrid, PooledFlow, expand_roi, read_flow_grid,
                          roi_pool, write_flow_grid)
from fvl.rng import Xoshiro256
from oracles import pool_oracle


def random_grid(seed, width=32, height=32):
    data = Xoshiro256(seed).uniforms((height, width, 2), -5.0, 5.0)
    return FlowGrid(width=width, height=height, data=data)


def random_roi(rng, width, height):
    w = rng.uniform(2.0, width / 2.0)
    h = rng.uniform(2.0, height / 2.0)
    cx = rng.uniform(0.0, width)
    cy = rng.uniform(0.0, height)
    return BoundingBox(cx=cx, cy=cy, w=w, h=h)


def test_expand_roi_identity_factor():
    box = BoundingBox(cx=100.0, cy=100.0, w=40.0, h=20.0)
    assert expand_roi(box, 1.0, 1280, 640) == box


def test_expand_roi_pure_scaling():
    box = BoundingBox(cx=100.0, cy=100.0, w=40.0, h=20.0)
    assert expand_roi(box, 1.5, 1280, 640) == BoundingBox(100.0, 100.0, 60.0, 30.0)


def test_expand_roi_clips_scaled_corners_at_image_edge():
    # Scaled corners of the 40-wide box at cx=5 are [-25, 35]; the image
    # keeps [0, 35], so the surviving box is 35 wide and centered at 17.5.
    box = BoundingBox(cx=5.0, cy=100.0, w=40.0, h=20.0)
    out = expand_roi(box, 1.5, 1280, 640)
    assert (out.cx, out.cy, out.w, out.h) == (17.5, 100.0, 35.0, 30.0)


def test_expand_roi_rejects_bad_inputs():
    box = BoundingBox(cx=100.0, cy=100.0, w=40.0, h=20.0)
    with pytest.raises(ValidationError, match="factor"):
        expand_roi(box, 0.5, 1280, 640)
    outside = BoundingBox(cx=-50.0, cy=100.0, w=10.0, h=10.0)
    with pytest.raises(ValidationError, match="outside"):
        expand_roi(outside, 1.0, 1280, 640)


def test_pool_constant_field_is_exact():
    grid = FlowGrid.constant(64, 48, u=2.0, v=-1.0)
    roi = BoundingBox(cx=20.0, cy=25.0, w=17.0, h=9.0)
    pooled = roi_pool(grid, roi, n=5)
    assert pooled.values.shape == (50,)
    np.testing.assert_array_equal(pooled.values[0::2], 2.0)
    np.testing.assert_array_equal(pooled.values[1::2], -1.0)


def test_bilinear_midpoint_of_two_by_two():
    # Sampling dead center of a 2x2 grid averages all four pixels.
    data = np.zeros((2, 2, 2))
    data[:, :, 0] = [[0.0, 1.0], [2.0, 3.0]]
    grid = FlowGrid(width=2, height=2, data=data)
    roi = BoundingBox(cx=1.0, cy=1.0, w=1.0, h=1.0)
    pooled = roi_pool(grid, roi, n=1)
    assert pooled.values[0] == pytest.approx(1.5, abs=1e-15)


def test_pool_matches_independent_oracle():
    grid = random_grid(seed=11)
    rng = Xoshiro256(12)
    for _ in range(20):
        roi = random_roi(rng, grid.width, grid.height)
        pooled = roi_pool(grid, roi, n=5)
        expected = pool_oracle(grid, roi, n=5)
        assert np.abs(pooled.values - expected).max() < 1e-6


def test_pool_is_linear_in_the_grid():
    a = random_grid(seed=21)
    b = random_grid(seed=22)
    alpha, beta = 0.7, -1.3
    mixed = FlowGrid(width=a.width, height=a.height,
                     data=alpha * a.data + beta * b.data)
    rng = Xoshiro256(23)
    for _ in range(10):
        roi = random_roi(rng, a.width, a.height)
        lhs = roi_pool(mixed, roi, n=4).values
        rhs = (alpha * roi_pool(a, roi, n=4).values
               + beta * roi_pool(b, roi, n=4).values)
        assert np.abs(lhs - rhs).max() < 1e-9


def test_pooled_values_stay_within_grid_range():
    grid = random_grid(seed=31)
    rng = Xoshiro256(32)
    lo, hi = grid.data.min(), grid.data.max()
    for _ in range(10):
        roi = random_roi(rng, grid.width, grid.height)
        values = roi_pool(grid, roi, n=6).values
        assert values.min() >= lo - 1e-12
        assert values.max() <= hi + 1e-12


def test_pool_clamps_beyond_borders():
    # An ROI hanging past the image edge samples border pixels, exactly
    # as the oracle does.
    grid = random_grid(seed=41, width=16, height=12)
    roi = BoundingBox(cx=15.0, cy=1.0, w=8.0, h=6.0)
    pooled = roi_pool(grid, roi, n=5)
    expected = pool_oracle(grid, roi, n=5)
    assert np.abs(pooled.values - expected).max() < 1e-6


def test_pool_rejects_degenerate_requests():
    grid = random_grid(seed=51)
    roi = BoundingBox(cx=10.0, cy=10.0, w=4.0, h=4.0)
    with pytest.raises(ValidationError, match="lattice"):
        roi_pool(grid, roi, n=0)


def test_flow_grid_validates_shape_and_finiteness():
    with pytest.raises(ValidationError, match="shape"):
        FlowGrid(width=4, height=4, data=np.zeros((4, 4)))
    bad = np.zeros((2, 2, 2))
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValidationError, match="finite"):
        FlowGrid(width=2, height=2, data=bad)


def test_pooled_flow_validates_length():
    with pytest.raises(ValidationError, match="length"):
        PooledFlow(values=np.zeros(49), n=5)


def test_flow_file_round_trip(tmp_path):
    grid = random_grid(seed=61, width=20, height=10)
    path = tmp_path / "000000.ffgr"
    write_flow_grid(path, grid)
    loaded = read_flow_grid(path)
    assert (loaded.width, loaded.height) == (20, 10)
    # storage is f32: reading back gives exactly the rounded values
    np.testing.assert_array_equal(
        loaded.data, grid.data.astype("<f4").astype(np.float64))
    assert np.abs(loaded.data - grid.data).max() < 1e-6

    write_flow_grid(path, loaded)
    again = read_flow_grid(path)
    np.testing.assert_array_equal(again.data, loaded.data)


def test_flow_file_rejects_corruption(tmp_path):
    grid = random_grid(seed=62, width=6, height=4)
    path = tmp_path / "grid.ffgr"
    write_flow_grid(path, grid)
    blob = path.read_bytes()

    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(DataFormatError, match="magic"):
        read_flow_grid(path)

    path.write_bytes(blob[:-7])
    with pytest.raises(DataFormatError, match="offset"):
        read_flow_grid(path)
