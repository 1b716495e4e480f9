"""Time-ordered (u, P) snapshots and space-time sampling of them."""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import RadiusTooLarge, TimeRangeUnavailable
from ..field import Grid, ScalarField, SpacetimePoint, VectorField, gradient_array

_TIME_EPS = 1e-12


def _interp(arrays: list[np.ndarray], coords: np.ndarray) -> np.ndarray:
    return np.stack(
        [map_coordinates(a, coords, order=1, mode="grid-wrap") for a in arrays], axis=-1
    )


class Trajectory:
    """Discrete velocity/pressure pair on a periodic grid.

    ``u`` has shape (T, 3, n, n, n) and ``p`` shape (T, n, n, n). Values
    between snapshots are linear in time; off-grid values are trilinear.
    """

    def __init__(self, grid: Grid, times, u, p, viscosity: float = 1.0,
                 provenance: dict | None = None):
        times = np.asarray(times, dtype=float)
        u = np.asarray(u, dtype=float)
        p = np.asarray(p, dtype=float)
        n = grid.n
        if times.ndim != 1 or len(times) == 0:
            raise ValueError("need at least one snapshot time")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        if u.shape != (len(times), 3, n, n, n) or p.shape != (len(times), n, n, n):
            raise ValueError("snapshot arrays do not match grid and time count")
        for a in (times, u, p):
            a.setflags(write=False)
        self.grid = grid
        self.times = times
        self.u = u
        self.p = p
        self.viscosity = float(viscosity)
        self.provenance = dict(provenance or {})

    def __len__(self):
        return len(self.times)

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def box_length(self) -> float:
        return self.grid.box_length

    @property
    def resolution(self) -> float:
        return self.grid.h

    def snapshot(self, i: int) -> tuple[VectorField, ScalarField]:
        return VectorField(self.grid, self.u[i]), ScalarField(self.grid, self.p[i])

    @functools.lru_cache(maxsize=16)
    def gradient(self, i: int) -> np.ndarray:
        """Du of snapshot i, shape (3, 3, n, n, n) indexed [component, direction]."""
        g = gradient_array(self.u[i], self.grid)
        g.setflags(write=False)
        return g

    # -- spacetime-source interface ---------------------------------------

    def check_cylinder(self, base: SpacetimePoint, r: float) -> None:
        if not r > 0:
            raise ValueError("radius must be positive")
        if r >= self.grid.box_length / 2:
            raise RadiusTooLarge(
                f"radius {r:g} does not fit in box of side {self.grid.box_length:g}"
            )
        if base.t - r * r < self.t_min - _TIME_EPS or base.t > self.t_max + _TIME_EPS:
            raise TimeRangeUnavailable(
                f"cylinder time range ({base.t - r * r:g}, {base.t:g}] not inside "
                f"[{self.t_min:g}, {self.t_max:g}]"
            )

    def _bracket(self, t: float):
        ts = self.times
        if t < ts[0] - _TIME_EPS or t > ts[-1] + _TIME_EPS:
            raise TimeRangeUnavailable(f"time {t:g} outside [{ts[0]:g}, {ts[-1]:g}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 1)
        if i == len(ts) - 1 or abs(t - ts[i]) <= _TIME_EPS:
            return [(i, 1.0)]
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        if w >= 1.0 - _TIME_EPS:
            return [(i + 1, 1.0)]
        return [(i, 1.0 - w), (i + 1, w)]

    def _coords(self, points):
        return (np.atleast_2d(np.asarray(points, dtype=float)) / self.grid.h).T

    def velocity(self, points, t: float) -> np.ndarray:
        coords = self._coords(points)
        return sum(w * _interp(list(self.u[i]), coords) for i, w in self._bracket(t))

    def pressure(self, points, t: float) -> np.ndarray:
        coords = self._coords(points)
        return sum(
            w * map_coordinates(self.p[i], coords, order=1, mode="grid-wrap")
            for i, w in self._bracket(t)
        )

    def velocity_gradient(self, points, t: float) -> np.ndarray:
        """Sampled Du, shape (m, 3, 3)."""
        coords = self._coords(points)
        out = 0.0
        for i, w in self._bracket(t):
            g = self.gradient(i)
            vals = _interp([g[a, b] for a in range(3) for b in range(3)], coords)
            out = out + w * vals
        return out.reshape(-1, 3, 3)

    def with_pressure_offset(self, f) -> "Trajectory":
        """Copy with P replaced by P + f(t) (a time-only gauge shift)."""
        offs = np.array([f(t) for t in self.times], dtype=float)
        return Trajectory(self.grid, self.times, self.u, self.p + offs[:, None, None, None],
                          self.viscosity, self.provenance)

    def scaled(self, alpha: float) -> "Trajectory":
        """Amplitude-scaled copy: u -> alpha u, P -> alpha^2 P (not a solution in general)."""
        return Trajectory(self.grid, self.times, alpha * self.u, alpha**2 * self.p,
                          self.viscosity, dict(self.provenance, amplitude_scale=alpha))

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(np.sum(self.u**2, axis=1))))


class FunctionSource:
    """Spacetime source backed by closed-form callables.

    ``velocity(points, t) -> (m, 3)``, ``pressure(points, t) -> (m,)`` and
    ``gradient(points, t) -> (m, 3, 3)``; missing pressure/gradient default
    to zero. Used for fields that cannot live on a periodic grid.
    """

    def __init__(self, velocity, pressure=None, gradient=None, t_min: float = -math.inf,
                 t_max: float = math.inf, box_length: float = math.inf,
                 resolution: float = 0.0, viscosity: float = 1.0):
        self._u = velocity
        self._p = pressure
        self._g = gradient
        self.t_min = t_min
        self.t_max = t_max
        self.box_length = box_length
        self.resolution = resolution
        self.viscosity = viscosity

    def check_cylinder(self, base: SpacetimePoint, r: float) -> None:
        if not r > 0:
            raise ValueError("radius must be positive")
        if r >= self.box_length / 2:
            raise RadiusTooLarge(f"radius {r:g} does not fit in the domain")
        if base.t - r * r < self.t_min - _TIME_EPS or base.t > self.t_max + _TIME_EPS:
            raise TimeRangeUnavailable("cylinder outside the source time range")

    def velocity(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.broadcast_to(np.asarray(self._u(pts, t), dtype=float), (len(pts), 3))

    def pressure(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._p is None:
            return np.zeros(len(pts))
        return np.broadcast_to(np.asarray(self._p(pts, t), dtype=float), (len(pts),))

    def velocity_gradient(self, points, t):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self._g is None:
            return np.zeros((len(pts), 3, 3))
        return np.broadcast_to(np.asarray(self._g(pts, t), dtype=float), (len(pts), 3, 3))


def ball_volume(r: float) -> float:
    return 4.0 / 3.0 * math.pi * r**3
