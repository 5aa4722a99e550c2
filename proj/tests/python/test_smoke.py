import math

import numpy as np
import pytest

import mina


def test_paper_percentages():
    assert mina.format_percent(14, 18) == "77.7"
    assert mina.format_percent(7, 18) == "38.8"
    assert mina.accuracy(17, 18) == pytest.approx(94.444, abs=1e-3)
    with pytest.raises(mina.InvalidArgument):
        mina.fp_rate(1, 0)


def test_rasterize_hand_trace():
    grid = mina.rasterize([0.5, 5.0], angle_min=0.0, angle_increment=math.pi / 2, range_max=20.0)
    assert grid.shape == (256, 256)
    assert grid.dtype == np.uint8
    assert grid[178, 128] == 255
    assert int((grid == 255).sum()) == 1
    assert mina.deproject_cell(178, 128) == pytest.approx((0.5, 0.0, 0.0))


def test_protocol_and_baseline():
    trials = mina.protocol_scans(1)
    assert len(trials) == 18
    t = trials[4]
    grid = mina.rasterize(t["ranges"], t["angle_min"], t["angle_increment"], t["range_max"])
    mask = mina.baseline_segment(grid)
    assert mask.shape == (256, 256)
    assert set(np.unique(mask)).issubset({0.0, 1.0})
    # every baseline pixel is an occupied grid pixel
    assert np.all(grid[mask > 0.5] == 255)


def test_model_roundtrip(tmp_path):
    model = mina.Model(seed=3)
    path = str(tmp_path / "m.bin")
    model.save(path)
    again = mina.Model.load(path)
    grid = np.zeros((256, 256), dtype=np.uint8)
    grid[150, 120:130] = 255
    a = model.segment(grid)
    assert np.array_equal(a, again.segment(grid))
    assert np.all((a >= 0) & (a <= 1))
    with open(path, "r+b") as f:
        f.write(b"X")
    with pytest.raises(mina.FormatError):
        mina.Model.load(path)
    with pytest.raises(mina.ShapeError):
        model.segment(np.zeros((64, 64), dtype=np.uint8))


def test_controller_and_cli(tmp_path):
    vx, vy, omega = mina.compute_command(0.0, 0.0, -0.6, 0.0)
    assert (vx, vy, omega) == (0.0, 0.0, 0.0)
    out = str(tmp_path / "s.jsonl")
    assert mina.run_cli(["simulate", "--seed", "2", "--out", out]) == 0
    with open(out) as f:
        assert len(f.readlines()) == 18
    assert mina.run_cli(["simulate", "--bogus"]) == 1
