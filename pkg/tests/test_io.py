import json

import numpy as np
import pytest

from nspr import io as nio
from nspr.field import Grid
from nspr.nse import SolverConfig, run


def test_snapshot_roundtrip_x_fastest(tmp_path):
    g = Grid(8, 3.0)
    a = np.arange(512, dtype=float).reshape(8, 8, 8)
    nio.write_snapshot(tmp_path / "s.json", g, 0.25, {"f": a})
    raw = np.frombuffer((tmp_path / "s.f.bin").read_bytes(), dtype="<f8")
    # x index varies fastest on disk
    assert raw[1] == a[1, 0, 0] and raw[8] == a[0, 1, 0]
    snap = nio.read_snapshot(tmp_path / "s.json")
    assert snap.grid == g and snap.time == 0.25
    assert np.array_equal(snap.fields["f"], a)
    meta = json.loads((tmp_path / "s.json").read_text())
    assert meta == {"box_length": 3.0, "fields": ["f"], "n": 8, "time": 0.25}


def test_snapshot_shape_checked(tmp_path):
    with pytest.raises(ValueError):
        nio.write_snapshot(tmp_path / "s.json", Grid(8), 0.0, {"f": np.zeros((4, 4, 4))})


def test_trajectory_roundtrip(tmp_path):
    tr = run(SolverConfig(n=8, dt=1e-2, t_end=0.03))
    nio.write_trajectory(tmp_path / "t", tr)
    back = nio.read_trajectory(tmp_path / "t")
    assert np.array_equal(back.u, tr.u) and np.array_equal(back.p, tr.p)
    assert np.array_equal(back.times, tr.times)
    idx = json.loads((tmp_path / "t" / "index.json").read_text())
    assert idx["config_hash"] == SolverConfig(n=8, dt=1e-2, t_end=0.03).digest()


def test_missing_index(tmp_path):
    with pytest.raises(FileNotFoundError):
        nio.read_trajectory(tmp_path)


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "x.txt"
    with pytest.raises(RuntimeError):
        with nio.atomic_path(target) as tmp:
            tmp.write_text("partial")
            raise RuntimeError("boom")
    assert list(tmp_path.iterdir()) == []


def test_csv_floats_roundtrip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, -2.5e17]
    nio.write_csv(tmp_path / "a.csv", ["v", "flag", "empty"], [[v, True, None] for v in vals])
    rows = nio.read_csv(tmp_path / "a.csv")
    assert [float(r["v"]) for r in rows] == vals
    assert rows[0]["flag"] == "1" and rows[0]["empty"] == ""
