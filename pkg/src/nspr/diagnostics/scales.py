"""Scale-invariant cylinder quantities and the two rescaled views.

For a base point (x0, t0) and radius r the cylinder is
Q_r = B_r(x0) x (t0 - r^2, t0]. All quantities are unit-quadrature means:
the same unit-ball points and unit time nodes are mapped into every
cylinder, which makes the scaling identities hold to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..field import SamplingPlan, SpacetimePoint, cylinder_time_nodes, unit_ball_points

ORIGIN = SpacetimePoint((0.0, 0.0, 0.0), 0.0)


def as_point(base) -> SpacetimePoint:
    if isinstance(base, SpacetimePoint):
        return base
    x, y, z, t = (float(v) for v in base)
    return SpacetimePoint((x, y, z), t)


@dataclass(frozen=True)
class ScaleQuantities:
    r: float
    C_r: float
    N_r: float
    E_r: float
    base: SpacetimePoint


def cylinder_means(source, base, r: float, plan: SamplingPlan = SamplingPlan(),
                   velocity: bool = True, pressure: bool = True, gradient: bool = True,
                   check: bool = True) -> dict[str, float]:
    """Means of |u|^3, |P|^{3/2} and |Du|^2 over Q_r(base) (only those requested)."""
    base = as_point(base)
    if check:
        source.check_cylinder(base, r)
    xi = unit_ball_points(plan.n_volume, plan.seed)
    pts = base.xv + r * xi
    taus = cylinder_time_nodes(plan.n_time)
    acc = {"u3": 0.0, "p32": 0.0, "du2": 0.0}
    for tau in taus:
        t = base.t + r * r * tau
        if velocity:
            acc["u3"] += np.mean(np.linalg.norm(source.velocity(pts, t), axis=1) ** 3)
        if pressure:
            acc["p32"] += np.mean(np.abs(source.pressure(pts, t)) ** 1.5)
        if gradient:
            acc["du2"] += np.mean(np.sum(source.velocity_gradient(pts, t) ** 2, axis=(1, 2)))
    return {k: float(v / len(taus)) for k, v in acc.items()}


def c_value(u3: float, p32: float, r: float) -> float:
    return float(np.cbrt(u3) + r * p32 ** (2.0 / 3.0))


def scale_quantities(source, base, r: float, plan: SamplingPlan = SamplingPlan()) -> ScaleQuantities:
    """C_r, N_r = r C_r and E_r = r^4 mean |Du|^2 on Q_r(base)."""
    base = as_point(base)
    m = cylinder_means(source, base, r, plan)
    c = c_value(m["u3"], m["p32"], r)
    return ScaleQuantities(r=float(r), C_r=c, N_r=r * c, E_r=r**4 * m["du2"], base=base)


class ScaledView:
    """Lazily rescaled source about ``base``.

    Evaluating the view at (x, t) reads the source at
    (x0 + r x, t0 + r^2 t) and multiplies velocity, pressure and
    velocity gradient by the given factors.
    """

    def __init__(self, source, base, r: float, u_factor: float, p_factor: float,
                 g_factor: float):
        if not r > 0:
            raise ValueError("scale must be positive")
        self.source = source
        self.base = as_point(base)
        self.r = float(r)
        self._fu, self._fp, self._fg = u_factor, p_factor, g_factor

    @property
    def t_min(self) -> float:
        return (self.source.t_min - self.base.t) / (self.r * self.r)

    @property
    def t_max(self) -> float:
        return (self.source.t_max - self.base.t) / (self.r * self.r)

    @property
    def box_length(self) -> float:
        return self.source.box_length / self.r

    @property
    def resolution(self) -> float:
        return self.source.resolution / self.r

    @property
    def viscosity(self) -> float:
        return getattr(self.source, "viscosity", 1.0)

    def _map(self, points, t):
        pts = self.base.xv + self.r * np.atleast_2d(np.asarray(points, dtype=float))
        return pts, self.base.t + self.r * self.r * t

    def check_cylinder(self, base, rho: float) -> None:
        base = as_point(base)
        x, t = self._map(base.xv, base.t)
        self.source.check_cylinder(SpacetimePoint(tuple(x[0]), t), self.r * rho)

    def velocity(self, points, t):
        return self._fu * self.source.velocity(*self._map(points, t))

    def pressure(self, points, t):
        return self._fp * self.source.pressure(*self._map(points, t))

    def velocity_gradient(self, points, t):
        return self._fg * self.source.velocity_gradient(*self._map(points, t))


def rescale_linear(source, base, r: float) -> ScaledView:
    """u_r(x, t) = u(x0 + r x, t0 + r^2 t), P_r = r P(...); C_1[u_r, P_r] = C_r[u, P]."""
    return ScaledView(source, base, r, 1.0, r, r)


def rescale_nonlinear(source, base, r: float) -> ScaledView:
    """u_r = r u(...), P_r = r^2 P(...): the Navier-Stokes scaling; C_1 of it is N_r."""
    return ScaledView(source, base, r, r, r * r, r * r)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x over positive entries."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])
