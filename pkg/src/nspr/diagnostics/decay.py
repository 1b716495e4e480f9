"""Oscillation decay across a geometric ladder of cylinders, and P = H + R."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..elliptic import ELLIPTIC_PLAN, BallProblem, BallSolution, solve_dirichlet
from ..errors import ScaleUnderResolved
from ..field import (
    SamplingPlan,
    ScalarField,
    cylinder_time_nodes,
    laplacian,
    sample,
    unit_ball_points,
)
from .scales import as_point, c_value, loglog_slope

MIN_CELLS = 4


@dataclass(frozen=True)
class DecayRow:
    k: int
    radius: float
    V: tuple
    C: float
    drift: float  # |V_k - V_{k-1}|, 0 for the first row


@dataclass
class DecayProfile:
    lam: float
    k_max: int
    r_base: float
    rows: list[DecayRow]
    holder_estimate: float
    truncated: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def max_drift(self) -> float:
        return max((row.drift for row in self.rows), default=0.0)


def resolvable(radius: float, resolution: float, cells: int = MIN_CELLS) -> bool:
    """A cylinder of this radius spans at least ``cells`` grid cells across."""
    return 2.0 * radius >= cells * resolution


def _oscillation(source, base, rho: float, plan: SamplingPlan):
    """(V, C_rho[u - V, P - f]) with V the cylinder mean and f the slice means."""
    source.check_cylinder(base, rho)
    xi = unit_ball_points(plan.n_volume, plan.seed)
    pts = base.xv + rho * xi
    taus = cylinder_time_nodes(plan.n_time)
    us, ps = [], []
    for tau in taus:
        t = base.t + rho * rho * tau
        us.append(source.velocity(pts, t))
        ps.append(source.pressure(pts, t))
    u = np.stack(us)
    p = np.stack(ps)
    V = u.mean(axis=(0, 1))
    f = p.mean(axis=1, keepdims=True)
    u3 = float(np.mean(np.linalg.norm(u - V, axis=-1) ** 3))
    p32 = float(np.mean(np.abs(p - f) ** 1.5))
    return V, c_value(u3, p32, rho)


def decay_profile(source, base, lam: float, k_max: int, r_base: float = 1.0,
                  plan: SamplingPlan = SamplingPlan(), strict: bool = False) -> DecayProfile:
    """Rows C_{r lam^k}[u - V_k, P - f_k] for k = 0..k_max.

    The ladder stops at the last radius spanning ``MIN_CELLS`` grid cells;
    with ``strict`` that raises ScaleUnderResolved instead.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    base = as_point(base)
    res = getattr(source, "resolution", 0.0)
    rows: list[DecayRow] = []
    truncated = False
    notes = []
    prev = None
    for k in range(k_max + 1):
        rho = r_base * lam**k
        if not resolvable(rho, res):
            if strict or k == 0:
                raise ScaleUnderResolved(
                    f"radius {rho:g} spans fewer than {MIN_CELLS} cells of size {res:g}")
            truncated = True
            notes.append(f"stopped before k={k}: radius {rho:g} under-resolved")
            break
        V, C = _oscillation(source, base, rho, plan)
        drift = 0.0 if prev is None else float(np.linalg.norm(V - prev))
        rows.append(DecayRow(k, rho, tuple(float(v) for v in V), C, drift))
        prev = V
    slope = loglog_slope([row.radius for row in rows], [row.C for row in rows])
    return DecayProfile(lam, k_max, r_base, rows, slope, truncated, notes)


# --- pressure splitting ------------------------------------------------------

@dataclass
class SliceSplit:
    t: float
    snapshot: int
    remainder: BallSolution
    pressure: ScalarField
    residual: float

    def H(self, x) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        return sample(self.pressure, pts) - self.remainder(pts)

    def R(self, x) -> np.ndarray:
        return self.remainder(np.atleast_2d(np.asarray(x, dtype=float)))


@dataclass
class PressureSplit:
    base: object
    r: float
    inner: float
    slices: list[SliceSplit]

    @property
    def max_residual(self) -> float:
        return max((s.residual for s in self.slices), default=0.0)


def velocity_source(grad: np.ndarray) -> np.ndarray:
    """-sum_ij d_i u^j d_j u^i from Du indexed [component, direction]."""
    return -np.einsum("jiabc,ijabc->abc", grad, grad)


def pressure_split(traj, base, r: float = 0.75, inner: float | None = None,
                   plan: SamplingPlan = ELLIPTIC_PLAN) -> PressureSplit:
    """Split each snapshot pressure in the cylinder as harmonic H plus remainder R.

    R solves Laplacian(R) = -d_i u^j d_j u^i in B_r(x0) with R = 0 on the
    sphere; H = P - R. The residual of a slice is the grid L2 norm of
    Laplacian(H) over nodes in B_inner, relative to that of Laplacian(P).
    """
    base = as_point(base)
    traj.check_cylinder(base, r)
    inner = 0.7 * r if inner is None else float(inner)
    if not 0 < inner < r:
        raise ValueError("inner radius must lie in (0, r)")
    grid = traj.grid
    lo = base.t - r * r
    slices = []
    for i, t in enumerate(traj.times):
        if not lo - 1e-12 <= t <= base.t + 1e-12:
            continue
        src = velocity_source(traj.gradient(i))
        problem = BallProblem(grid, base.x, r, source=src)
        rem = solve_dirichlet(problem, plan)
        pres = ScalarField(grid, traj.p[i])
        nodes = rem.node_positions()
        near = np.sum((nodes - base.xv) ** 2, axis=1) < inner**2
        nodes = nodes[near]
        lap_p = sample(laplacian(pres), nodes)
        lap_h = lap_p - rem.laplacian(nodes)
        scale = max(np.linalg.norm(lap_p), np.linalg.norm(sample(ScalarField(grid, src), nodes)))
        resid = float(np.linalg.norm(lap_h) / scale) if scale > 0 else float(np.linalg.norm(lap_h))
        slices.append(SliceSplit(float(t), i, rem, pres, resid))
    if not slices:
        raise ValueError("no snapshot falls inside the cylinder time range")
    return PressureSplit(base, r, inner, slices)


def holder_ok(profile: DecayProfile, lo: float = 0.8, hi: float = 1.2) -> bool:
    return not math.isnan(profile.holder_estimate) and lo <= profile.holder_estimate <= hi
