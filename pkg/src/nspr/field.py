"""Periodic grids, sampled fields and the averaging machinery.

Every average ``⨍`` used elsewhere in the package goes through
:func:`ball_average`, :func:`sphere_average` or :func:`cylinder_average`.
Quadrature nodes are low-discrepancy point sets on the unit ball / unit
sphere, scaled and translated to the requested ball, so the same plan
always produces the same nodes.

Arrays are indexed ``values[ix, iy, iz]``; the on-disk layout (x fastest)
is handled by :mod:`nspr.io`.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft
from scipy.ndimage import map_coordinates
from scipy.spatial.transform import Rotation
from scipy.stats import qmc

from .errors import RadiusTooLarge

_FFT_WORKERS: int | None = None


def set_threads(n: int | None) -> None:
    """Number of workers handed to scipy.fft (None = library default)."""
    global _FFT_WORKERS
    _FFT_WORKERS = n


def rfftn(a):
    return sfft.rfftn(a, axes=(-3, -2, -1), workers=_FFT_WORKERS)


def irfftn(a, n):
    return sfft.irfftn(a, s=(n, n, n), axes=(-3, -2, -1), workers=_FFT_WORKERS)


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` vertex-centred samples per axis."""

    n: int
    box_length: float = 2 * math.pi

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def center(self) -> np.ndarray:
        return np.full(3, self.box_length / 2)

    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def mesh(self):
        c = self.coords()
        return np.meshgrid(c, c, c, indexing="ij")

    def points(self) -> np.ndarray:
        """All node positions as an (n**3, 3) array in C order of ``values``."""
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    @functools.cached_property
    def _spectral(self):
        n, L = self.n, self.box_length
        k_full = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
        k_half = 2 * np.pi * np.fft.rfftfreq(n, d=L / n)
        # first derivatives: drop the unpaired Nyquist mode
        k1_full = k_full.copy()
        k1_full[n // 2] = 0.0
        k1_half = k_half.copy()
        k1_half[-1] = 0.0
        kx = k_full[:, None, None]
        ky = k_full[None, :, None]
        kz = k_half[None, None, :]
        first = (k1_full[:, None, None], k1_full[None, :, None], k1_half[None, None, :])
        k2 = kx**2 + ky**2 + kz**2
        k2_inv = np.zeros_like(k2)
        k2_inv[k2 > 0] = 1.0 / k2[k2 > 0]
        idx_full = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        idx_half = np.fft.rfftfreq(n, d=1.0 / n)
        cut = n / 3.0
        dealias = (
            (idx_full[:, None, None] < cut)
            & (idx_full[None, :, None] < cut)
            & (idx_half[None, None, :] < cut)
        )
        return {
            "k": (kx, ky, kz),
            "k1": first,
            "k2": k2,
            "k2_inv": k2_inv,
            "dealias": dealias,
        }

    def wavenumbers(self):
        """Full wavenumbers per axis, broadcastable to the rfft shape."""
        return self._spectral["k"]

    def derivative_wavenumbers(self):
        """Wavenumbers for first derivatives (Nyquist zeroed)."""
        return self._spectral["k1"]

    def k_squared(self):
        return self._spectral["k2"]

    def inverse_k_squared(self):
        return self._spectral["k2_inv"]

    def dealias_mask(self):
        return self._spectral["dealias"]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        n = self.grid.n
        if v.shape != (n, n, n):
            raise ValueError(f"expected {n}^3 samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, f) -> "ScalarField":
        X, Y, Z = grid.mesh()
        return cls(grid, np.broadcast_to(f(X, Y, Z), X.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full((grid.n,) * 3, float(c)))

    def __call__(self, points):
        return sample(self, points)


@dataclass(frozen=True, eq=False)
class VectorField:
    """Three components stored as one (3, n, n, n) array."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        n = self.grid.n
        if v.shape != (3, n, n, n):
            raise ValueError(f"expected shape (3,{n},{n},{n}), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_components(cls, *components: ScalarField) -> "VectorField":
        grids = {c.grid for c in components}
        if len(components) != 3 or len(grids) != 1:
            raise ValueError("need three components on a common grid")
        return cls(components[0].grid, np.stack([c.values for c in components]))

    @classmethod
    def from_function(cls, grid: Grid, f) -> "VectorField":
        X, Y, Z = grid.mesh()
        return cls(grid, np.stack([np.broadcast_to(c, X.shape) for c in f(X, Y, Z)]))

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.sum(self.values**2, axis=0))


@dataclass(frozen=True)
class SpacetimePoint:
    x: tuple
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in np.asarray(self.x, dtype=float).ravel())
        if len(x) != 3:
            raise ValueError("spatial position must have 3 coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def xv(self) -> np.ndarray:
        return np.array(self.x)


@dataclass(frozen=True)
class ParabolicCylinder:
    """Q_r(x0, t0) = B_r(x0) x (t0 - r^2, t0]."""

    base: SpacetimePoint
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("cylinder radius must be positive")

    @property
    def t_start(self) -> float:
        return self.base.t - self.r**2


@dataclass(frozen=True)
class SamplingPlan:
    n_volume: int = 4096
    n_boundary: int = 1024
    seed: int = 0
    n_time: int = 8

    def __post_init__(self):
        if self.n_volume < 1000:
            raise ValueError("n_volume must be >= 1000")
        if self.n_boundary < 100:
            raise ValueError("n_boundary must be >= 100")
        if self.n_time < 1:
            raise ValueError("n_time must be >= 1")


REFERENCE_PLAN = SamplingPlan(n_volume=100_000, n_boundary=10_000, seed=0, n_time=8)


@functools.lru_cache(maxsize=32)
def unit_ball_points(n: int, seed: int) -> np.ndarray:
    """Scrambled-Halton points uniform in the unit ball, antipodally paired.

    The count is rounded up to an even number; pairing ``x`` with ``-x``
    makes every odd moment vanish exactly.
    """
    m = (n + 1) // 2
    u = qmc.Halton(d=3, scramble=True, seed=seed).random(m)
    rad = np.cbrt(u[:, 0])
    cos_t = 2.0 * u[:, 1] - 1.0
    sin_t = np.sqrt(np.clip(1.0 - cos_t**2, 0.0, None))
    phi = 2.0 * np.pi * u[:, 2]
    half = rad[:, None] * np.stack(
        [sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1
    )
    return _frozen(np.concatenate([half, -half]))


@functools.lru_cache(maxsize=32)
def unit_sphere_points(n: int, seed: int) -> np.ndarray:
    """Spherical Fibonacci nodes (randomly rotated by ``seed``), antipodally paired."""
    m = (n + 1) // 2
    k = np.arange(m) + 0.5
    z = 1.0 - 2.0 * k / m
    golden = (1.0 + 5.0**0.5) / 2.0
    phi = 2.0 * np.pi * k / golden
    s = np.sqrt(np.clip(1.0 - z**2, 0.0, None))
    half = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)
    half = Rotation.random(random_state=seed).apply(half)
    pts = np.concatenate([half, -half])
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return _frozen(pts)


def cylinder_time_nodes(n_time: int) -> np.ndarray:
    """Midpoint nodes of (-1, 0] in unit parabolic time."""
    return -(np.arange(n_time) + 0.5) / n_time


FieldLike = Union[ScalarField, Callable[[np.ndarray], np.ndarray]]


def sample(field: ScalarField, x) -> np.ndarray | float:
    """Trilinear periodic interpolation at one point (3,) or many (m, 3)."""
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    coords = (pts / field.grid.h).T
    out = map_coordinates(field.values, coords, order=1, mode="grid-wrap")
    return float(out[0]) if single else out


def evaluate(f: FieldLike, points: np.ndarray) -> np.ndarray:
    if isinstance(f, ScalarField):
        return sample(f, points)
    return np.asarray(f(points), dtype=float)


def _check_ball(f, r: float, box_length: float | None = None):
    if not r > 0:
        raise ValueError("radius must be positive")
    L = f.grid.box_length if isinstance(f, ScalarField) else box_length
    if L is not None and r >= L / 2:
        raise RadiusTooLarge(f"ball of radius {r:g} does not fit in box of side {L:g}")


def ball_average(f: FieldLike, center, r: float, p: float = 1.0,
                 plan: SamplingPlan = SamplingPlan()) -> float:
    """Quadrature estimate of the mean of |f|^p over B_r(center)."""
    _check_ball(f, r)
    pts = np.asarray(center, dtype=float) + r * unit_ball_points(plan.n_volume, plan.seed)
    vals = np.abs(evaluate(f, pts))
    return float(np.mean(vals**p))


def sphere_average(f: FieldLike, center, r: float, p: float = 1.0,
                   plan: SamplingPlan = SamplingPlan()) -> float:
    """Quadrature estimate of the mean of |f|^p over the sphere of radius r."""
    _check_ball(f, r)
    pts = np.asarray(center, dtype=float) + r * unit_sphere_points(plan.n_boundary, plan.seed)
    vals = np.abs(evaluate(f, pts))
    return float(np.mean(vals**p))


def cylinder_average(traj, cyl: ParabolicCylinder, which: str, p: float,
                     plan: SamplingPlan = SamplingPlan()) -> float:
    """Space-time mean of |u|^p (``which="velocity"``) or |P|^p over Q_r.

    ``traj`` is anything exposing the spacetime-source interface of
    :class:`nspr.nse.trajectory.Trajectory`.
    """
    if which not in ("velocity", "pressure"):
        raise ValueError(f"unknown quantity {which!r}")
    traj.check_cylinder(cyl.base, cyl.r)
    xi = unit_ball_points(plan.n_volume, plan.seed)
    pts = cyl.base.xv + cyl.r * xi
    total = 0.0
    taus = cylinder_time_nodes(plan.n_time)
    for tau in taus:
        t = cyl.base.t + cyl.r**2 * tau
        if which == "velocity":
            vals = np.linalg.norm(traj.velocity(pts, t), axis=1)
        else:
            vals = np.abs(traj.pressure(pts, t))
        total += np.mean(vals**p)
    return float(total / len(taus))


# --- spectral calculus -------------------------------------------------------

def _as_array(f):
    return f.values if isinstance(f, (ScalarField, VectorField)) else np.asarray(f)


def gradient_array(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Spectral gradient of a (..., n, n, n) array; new axis inserted at -4."""
    fh = rfftn(values)
    k1 = grid.derivative_wavenumbers()
    return np.stack([irfftn(1j * k * fh, grid.n) for k in k1], axis=-4)


def spectral_gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, gradient_array(f.values, f.grid))


def divergence(v: VectorField) -> ScalarField:
    vh = rfftn(v.values)
    k1 = v.grid.derivative_wavenumbers()
    dh = sum(1j * k * vh[i] for i, k in enumerate(k1))
    return ScalarField(v.grid, irfftn(dh, v.grid.n))


def laplacian(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, irfftn(-f.grid.k_squared() * rfftn(f.values), f.grid.n))


def curl(v: VectorField) -> VectorField:
    vh = rfftn(v.values)
    kx, ky, kz = v.grid.derivative_wavenumbers()
    c = np.stack([
        1j * (ky * vh[2] - kz * vh[1]),
        1j * (kz * vh[0] - kx * vh[2]),
        1j * (kx * vh[1] - ky * vh[0]),
    ])
    return VectorField(v.grid, irfftn(c, v.grid.n))


def smooth_cutoff(grid: Grid, center, inner: float, outer: float) -> ScalarField:
    """C-infinity radial cutoff: 1 on B_inner(center), 0 outside B_outer."""
    if not 0 < inner < outer < grid.box_length / 2:
        raise ValueError("need 0 < inner < outer < box_length/2")
    X, Y, Z = grid.mesh()
    c = np.asarray(center, dtype=float)
    d = np.sqrt((X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2)
    s = np.clip((d - inner) / (outer - inner), 0.0, 1.0)

    def bump(x):
        out = np.zeros_like(x)
        m = x > 0
        out[m] = np.exp(-1.0 / x[m])
        return out

    a, b = bump(1.0 - s), bump(s)
    return ScalarField(grid, a / (a + b))
