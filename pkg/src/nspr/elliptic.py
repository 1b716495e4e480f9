"""Harmonic extension on balls and zero-Dirichlet Poisson solves.

Dirichlet problems on B_r0(center) are solved in two steps: a periodic
particular solution obtained by spectral inversion in the box, then
subtraction of the Poisson-kernel extension of its boundary trace.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import PointOutsideBall, RadiusTooLarge, SingularSource
from .field import (
    FieldLike,
    Grid,
    SamplingPlan,
    ScalarField,
    evaluate,
    irfftn,
    laplacian,
    rfftn,
    sample,
    sphere_average,
    unit_sphere_points,
)

ELLIPTIC_PLAN = SamplingPlan(n_volume=1000, n_boundary=10_000, seed=0)
DEFAULT_R0 = 5.0 / 8.0
_CHUNK = 4_000_000


@dataclass(frozen=True, eq=False)
class BallProblem:
    """Data for a problem posed on B_r0(center).

    At most one of ``F`` (shape (3, n, n, n)), ``G`` (shape (3, 3, n, n, n))
    or ``source`` (shape (n, n, n)) is given; arrays may also be passed as
    VectorField / ScalarField.
    """

    grid: Grid
    center: tuple
    r0: float
    boundary_data: Optional[FieldLike] = None
    F: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None
    source: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not 0 < self.r0 < self.grid.box_length / 2:
            raise RadiusTooLarge(f"r0={self.r0:g} must lie in (0, box_length/2)")
        given = [x for x in (self.F, self.G, self.source) if x is not None]
        if len(given) > 1:
            raise ValueError("give at most one source form")
        n = self.grid.n
        for name, shape in (("F", (3, n, n, n)), ("G", (3, 3, n, n, n)), ("source", (n, n, n))):
            val = getattr(self, name)
            if val is None:
                continue
            arr = np.asarray(getattr(val, "values", val), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise SingularSource(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def cv(self) -> np.ndarray:
        return np.array(self.center)


class HarmonicExtension:
    """Poisson-kernel extension of boundary data into B_r0(center).

    h(x) = sum_k K(x, y_k) g(y_k) / sum_k K(x, y_k) with
    K(x, y) = r0 (r0^2 - |x - c|^2) / |x - y|^3 over sphere nodes y_k.
    Each kernel term is harmonic in x; dividing by the discrete kernel sum
    reproduces constants exactly.
    """

    def __init__(self, center, r0: float, boundary, plan: SamplingPlan = ELLIPTIC_PLAN):
        self.center = np.asarray(center, dtype=float)
        self.r0 = float(r0)
        self.directions = unit_sphere_points(plan.n_boundary, plan.seed)
        self.nodes = self.center + self.r0 * self.directions
        if callable(boundary) or isinstance(boundary, ScalarField):
            g = evaluate(boundary, self.nodes)
        else:
            g = np.asarray(boundary, dtype=float)
        if g.shape != (len(self.nodes),):
            raise ValueError("boundary values do not match node count")
        self.values = g

    def _local(self, x):
        xi = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        rho2 = np.sum(xi**2, axis=1)
        if np.any(rho2 >= self.r0**2):
            raise PointOutsideBall("harmonic extension evaluated outside the open ball")
        return xi, rho2

    def _chunks(self, m):
        step = max(1, _CHUNK // len(self.nodes))
        for s in range(0, m, step):
            yield slice(s, min(m, s + step))

    def __call__(self, x) -> np.ndarray:
        xi, rho2 = self._local(x)
        out = np.empty(len(xi))
        r0 = self.r0
        for sl in self._chunks(len(xi)):
            d2 = rho2[sl, None] + r0**2 - 2 * r0 * (xi[sl] @ self.directions.T)
            d2 = np.maximum(d2, 1e-300)
            k = (r0 * (r0**2 - rho2[sl]))[:, None] / (d2 * np.sqrt(d2))
            out[sl] = (k @ self.values) / np.sum(k, axis=1)
        return out

    def laplacian(self, x) -> np.ndarray:
        """Exact Laplacian of the normalized quadrature sum (small but nonzero)."""
        xi, rho2 = self._local(x)
        out = np.empty(len(xi))
        r0 = self.r0
        s = self.directions
        for sl in self._chunks(len(xi)):
            x_ = xi[sl]
            d2 = np.maximum(rho2[sl, None] + r0**2 - 2 * r0 * (x_ @ s.T), 1e-300)
            d3 = d2 * np.sqrt(d2)
            a = (r0**2 - rho2[sl])[:, None]
            k = r0 * a / d3
            # grad_x K = c1 * xi + c2 * (xi - r0 s)
            c1 = -2 * r0 / d3
            c2 = -3 * r0 * a / (d3 * d2)
            cs = c1 + c2

            def grad(w):
                return (cs @ w)[:, None] * x_ - r0 * ((c2 * w) @ s)

            ones = np.ones(len(s))
            B = k @ ones
            A = k @ self.values
            f = A / B
            gB = grad(ones)
            gA = grad(self.values)
            gf = (gA - f[:, None] * gB) / B[:, None]
            out[sl] = -2 * np.sum(gf * gB, axis=1) / B
        return out


def harmonic_extension(problem: BallProblem, x, plan: SamplingPlan = ELLIPTIC_PLAN):
    """h(x) for the Laplace problem with ``problem.boundary_data`` on the sphere."""
    if problem.boundary_data is None:
        raise ValueError("problem has no boundary data")
    ext = HarmonicExtension(problem.center, problem.r0, problem.boundary_data, plan)
    out = ext(x)
    return float(out[0]) if np.asarray(x).ndim == 1 else out


def solve_poisson_periodic(source: ScalarField) -> ScalarField:
    """Zero-mean periodic solution of Laplacian(w) = source - mean(source)."""
    g = source.grid
    wh = -rfftn(source.values) * g.inverse_k_squared()
    return ScalarField(g, irfftn(wh, g.n))


def _particular_div2(G: np.ndarray, grid: Grid) -> np.ndarray:
    kf = grid.wavenumbers()
    k1 = grid.derivative_wavenumbers()
    Gh = rfftn(G)
    acc = 0.0
    for i in range(3):
        for j in range(3):
            kk = kf[i] ** 2 if i == j else k1[i] * k1[j]
            acc = acc + kk * Gh[i, j]
    return irfftn(acc * grid.inverse_k_squared(), grid.n)


def _particular_div(F: np.ndarray, grid: Grid) -> np.ndarray:
    k1 = grid.derivative_wavenumbers()
    Fh = rfftn(F)
    div = sum(1j * k1[i] * Fh[i] for i in range(3))
    return irfftn(-div * grid.inverse_k_squared(), grid.n)


class BallSolution:
    """w = w_p - h[w_p on the sphere] on B_r0(center); zero on the boundary."""

    def __init__(self, problem: BallProblem, particular: ScalarField,
                 plan: SamplingPlan = ELLIPTIC_PLAN):
        self.problem = problem
        self.particular = particular
        self.correction = HarmonicExtension(problem.center, problem.r0, particular, plan)

    @property
    def grid(self) -> Grid:
        return self.problem.grid

    def __call__(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return sample(self.particular, pts) - self.correction(pts)

    @functools.cached_property
    def _nodes(self):
        """Grid indices and unwrapped positions of nodes strictly inside the ball."""
        g = self.grid
        c = self.problem.cv
        coords = g.coords()
        disp = [(coords - c[a] + g.box_length / 2) % g.box_length - g.box_length / 2
                for a in range(3)]
        DX, DY, DZ = np.meshgrid(*disp, indexing="ij")
        inside = DX**2 + DY**2 + DZ**2 < self.problem.r0**2
        idx = np.nonzero(inside)
        pos = c + np.stack([DX[idx], DY[idx], DZ[idx]], axis=-1)
        return idx, pos

    def node_positions(self) -> np.ndarray:
        return self._nodes[1]

    def node_values(self) -> tuple[tuple, np.ndarray, np.ndarray]:
        """(index tuple, positions, w values) at grid nodes inside the ball."""
        idx, pos = self._nodes
        vals = self.particular.values[idx] - self.correction(pos)
        return idx, pos, vals

    @functools.cached_property
    def field(self) -> ScalarField:
        """w on the grid, extended by zero outside the ball."""
        idx, _, vals = self.node_values()
        out = np.zeros((self.grid.n,) * 3)
        out[idx] = vals
        return ScalarField(self.grid, out)

    def laplacian(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return sample(laplacian(self.particular), pts) - self.correction.laplacian(pts)


def solve_dirichlet_div2(problem: BallProblem, plan: SamplingPlan = ELLIPTIC_PLAN) -> BallSolution:
    """Laplacian(w) = sum_ij d_i d_j G_ij in the ball, w = 0 on its boundary."""
    if problem.G is None:
        raise ValueError("problem has no div^2-form source")
    w_p = ScalarField(problem.grid, _particular_div2(problem.G, problem.grid))
    return BallSolution(problem, w_p, plan)


def solve_dirichlet_div(problem: BallProblem, plan: SamplingPlan = ELLIPTIC_PLAN) -> BallSolution:
    """Laplacian(w) = div F in the ball, w = 0 on its boundary."""
    if problem.F is None:
        raise ValueError("problem has no divergence-form source")
    w_p = ScalarField(problem.grid, _particular_div(problem.F, problem.grid))
    return BallSolution(problem, w_p, plan)


def solve_dirichlet(problem: BallProblem, plan: SamplingPlan = ELLIPTIC_PLAN) -> BallSolution:
    """Laplacian(w) = source in the ball, w = 0 on its boundary.

    The periodic particular solution sees the source minus its box mean, so
    the source must have zero mean over the box for this to be exact.
    """
    if problem.source is None:
        raise ValueError("problem has no scalar source")
    w_p = solve_poisson_periodic(ScalarField(problem.grid, problem.source))
    return BallSolution(problem, w_p, plan)


def choose_r0(u: FieldLike, center, p: float, scan: bool = False,
              plan: SamplingPlan = ELLIPTIC_PLAN, lo: float = 0.5, hi: float = 0.75,
              candidates: int = 8) -> float:
    """Radius for the harmonic/remainder split.

    Fixed at 5/8 unless ``scan``; scanning picks, among ``candidates``
    radii in [lo, hi], the one minimizing r^{-2} * integral over the sphere
    of |u|^p (the sphere area is 4 pi r^2, so this is the sphere mean).
    """
    if not scan:
        return DEFAULT_R0
    radii = np.linspace(lo, hi, candidates)
    scores = [sphere_average(u, center, r, p, plan) for r in radii]
    return float(radii[int(np.argmin(scores))])
