"""On-disk formats: field snapshots, trajectory directories, CSV tables.

A snapshot ``<stem>.json`` holds ``{"n", "box_length", "time", "fields"}``;
each listed field lives in ``<stem>.<name>.bin`` as little-endian float64,
x-fastest. A trajectory directory holds ``index.json`` plus one snapshot
per saved time.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import Grid
from .nse.trajectory import Trajectory

_DTYPE = np.dtype("<f8")


@dataclass
class Snapshot:
    grid: Grid
    time: float
    fields: dict[str, np.ndarray]


@contextlib.contextmanager
def atomic_path(path: str | os.PathLike):
    """Yield a temp path beside ``path``; rename onto it only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_text_atomic(path, text: str) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(text)


def write_json_atomic(path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def fmt_float(x) -> str:
    """17 significant digits: lossless float round-trip."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt_float(v) for v in row])
    write_text_atomic(path, buf.getvalue())


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _field_path(header: Path, name: str) -> Path:
    return header.with_name(f"{header.stem}.{name}.bin")


def write_snapshot(header_path, grid: Grid, time: float, fields: dict[str, np.ndarray]) -> None:
    header_path = Path(header_path)
    for name, arr in fields.items():
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (grid.n,) * 3:
            raise ValueError(f"field {name} has shape {arr.shape}, expected {(grid.n,) * 3}")
        with atomic_path(_field_path(header_path, name)) as tmp:
            tmp.write_bytes(arr.astype(_DTYPE).ravel(order="F").tobytes())
    write_json_atomic(header_path, {
        "n": grid.n,
        "box_length": grid.box_length,
        "time": float(time),
        "fields": list(fields),
    })


def read_snapshot(header_path) -> Snapshot:
    header_path = Path(header_path)
    meta = json.loads(header_path.read_text())
    grid = Grid(int(meta["n"]), float(meta["box_length"]))
    fields = {}
    for name in meta["fields"]:
        raw = np.frombuffer(_field_path(header_path, name).read_bytes(), dtype=_DTYPE)
        if raw.size != grid.n**3:
            raise ValueError(f"field {name}: expected {grid.n**3} values, found {raw.size}")
        fields[name] = raw.reshape((grid.n,) * 3, order="F").astype(float)
    return Snapshot(grid, float(meta["time"]), fields)


def write_trajectory(directory, traj: Trajectory) -> None:
    """Write snapshots then ``index.json`` (the index appears last, atomically)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for i, t in enumerate(traj.times):
        stem = f"snap_{i:05d}"
        write_snapshot(d / f"{stem}.json", traj.grid, t, {
            "u1": traj.u[i, 0], "u2": traj.u[i, 1], "u3": traj.u[i, 2], "p": traj.p[i],
        })
        names.append(f"{stem}.json")
    write_json_atomic(d / "index.json", {
        "n": traj.grid.n,
        "box_length": traj.grid.box_length,
        "viscosity": traj.viscosity,
        "times": [float(t) for t in traj.times],
        "snapshots": names,
        "config_hash": traj.provenance.get("config_hash"),
        "provenance": traj.provenance,
    })


def read_trajectory(directory) -> Trajectory:
    d = Path(directory)
    index_path = d / "index.json"
    if not index_path.exists():
        raise FileNotFoundError(f"{index_path} not found")
    meta = json.loads(index_path.read_text())
    grid = Grid(int(meta["n"]), float(meta["box_length"]))
    us, ps = [], []
    for name in meta["snapshots"]:
        snap = read_snapshot(d / name)
        if snap.grid != grid:
            raise ValueError(f"snapshot {name} grid mismatch")
        us.append(np.stack([snap.fields["u1"], snap.fields["u2"], snap.fields["u3"]]))
        ps.append(snap.fields["p"])
    return Trajectory(grid, meta["times"], np.array(us), np.array(ps),
                      meta.get("viscosity", 1.0), meta.get("provenance", {}))
