"""Suitability checks on a trajectory: local energy inequality and two local bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ..errors import SupportOutOfDomain
from ..field import SamplingPlan, SpacetimePoint, cylinder_time_nodes, unit_ball_points
from .trajectory import ball_volume

CHECK_PLAN = SamplingPlan(n_volume=4096, n_boundary=1024, seed=0, n_time=16)


def _bump(s: np.ndarray):
    """exp(1 - 1/(1 - s^2)) on |s| < 1 with q = 1 - s^2; zero outside."""
    inside = np.abs(s) < 1
    q = np.where(inside, 1.0 - s * s, 1.0)
    g = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    return g, q, inside


@dataclass(frozen=True)
class TestFunction:
    """Nonnegative smooth bump phi(x, t) = g(|x - x0| / rho) theta((t - t0) / tau).

    Both factors are exp(1 - 1/(1 - s^2)) profiles, so phi is supported in
    B_rho(x0) x (t0 - tau, t0 + tau) and equals 1 at the centre.
    """

    __test__ = False  # not a pytest class

    center: SpacetimePoint
    radius: float
    tau: float

    def __post_init__(self):
        if not (self.radius > 0 and self.tau > 0):
            raise ValueError("radius and tau must be positive")

    def _disp(self, points: np.ndarray, box_length: float) -> np.ndarray:
        d = np.asarray(points, dtype=float) - self.center.xv
        if math.isfinite(box_length):
            d = (d + box_length / 2) % box_length - box_length / 2
        return d

    def time_factor(self, t: float) -> tuple[float, float]:
        """(theta, d theta / dt)."""
        sig = (t - self.center.t) / self.tau
        th, q, inside = _bump(np.asarray(sig))
        dth = np.where(inside, th * (-2 * sig / q**2), 0.0) / self.tau
        return float(th), float(dth)

    def space_factor(self, points: np.ndarray, box_length: float = math.inf):
        """(g, grad g of shape (m, 3), Laplacian g) at the given points."""
        d = self._disp(points, box_length)
        rho = self.radius
        s = np.linalg.norm(d, axis=-1) / rho
        g, q, inside = _bump(s)
        grad = np.where(inside, -2 * g / q**2, 0.0)[..., None] * d / rho**2
        lap = np.where(inside, g * (4 * s**2 / q**4 - 6 / q**2 - 8 * s**2 / q**3), 0.0) / rho**2
        return g, grad, lap

    def __call__(self, points, t: float, box_length: float = math.inf) -> np.ndarray:
        g, _, _ = self.space_factor(points, box_length)
        return g * self.time_factor(t)[0]


@dataclass(frozen=True)
class EnergyCheck:
    t: float
    lhs: float
    rhs: float
    slack: float
    scale: float

    @property
    def relative_slack(self) -> float:
        return self.slack / self.scale if self.scale > 0 else 0.0


def _trapezoid(values, times) -> float:
    return float(trapezoid(values, times)) if len(values) > 1 else 0.0


def check_energy_inequality(traj, phi: TestFunction, t: float | None = None) -> EnergyCheck:
    """rhs - lhs of the localized energy inequality at snapshot time ``t``.

    lhs = int |u|^2 phi(t) + 2 nu int int |Du|^2 phi
    rhs = int int |u|^2 (phi_t + nu Laplacian phi) + (|u|^2 + 2P) u . grad phi

    Space integrals are grid sums, time integrals trapezoidal over the
    snapshots from the start of phi's support to ``t`` (default: the
    snapshot nearest the bump centre). ``scale`` sums the magnitudes of the
    individual terms.
    """
    grid = traj.grid
    L = grid.box_length
    if phi.radius >= L / 2:
        raise SupportOutOfDomain("bump radius does not fit in the periodic box")
    start = phi.center.t - phi.tau
    if start < traj.t_min - 1e-12:
        raise SupportOutOfDomain(
            f"bump support starts at t={start:g}, before the trajectory ({traj.t_min:g})")
    times = traj.times
    if t is None:
        t = float(times[np.argmin(np.abs(times - phi.center.t))])
    hits = np.nonzero(np.abs(times - t) <= 1e-9)[0]
    if len(hits) == 0:
        raise SupportOutOfDomain(f"t={t:g} is not a snapshot time")
    last = int(hits[0])
    first = int(np.searchsorted(times, start, side="right")) - 1
    first = max(first, 0)
    if first >= last and t > start:
        raise SupportOutOfDomain("too few snapshots inside the bump support")
    g, grad_g, lap_g = phi.space_factor(grid.points(), L)
    n = grid.n
    g = g.reshape(n, n, n)
    lap_g = lap_g.reshape(n, n, n)
    grad_g = np.moveaxis(grad_g.reshape(n, n, n, 3), -1, 0)
    dv = grid.h**3
    nu = traj.viscosity
    idx = range(first, last + 1)
    diss, flux_a, flux_b, lap_terms = [], [], [], []
    for i in idx:
        th, dth = phi.time_factor(times[i])
        u = traj.u[i]
        u2 = np.sum(u**2, axis=0)
        du2 = np.sum(traj.gradient(i) ** 2, axis=(0, 1))
        udg = np.sum(u * grad_g, axis=0)
        diss.append(2 * nu * th * np.sum(du2 * g) * dv)
        lap_terms.append(np.sum(u2 * (dth * g + nu * th * lap_g)) * dv)
        flux_a.append(th * np.sum(u2 * udg) * dv)
        flux_b.append(th * np.sum(2 * traj.p[i] * udg) * dv)
    ts = times[first:last + 1]
    th_end = phi.time_factor(times[last])[0]
    top = th_end * float(np.sum(np.sum(traj.u[last] ** 2, axis=0) * g) * dv)
    d_int = _trapezoid(diss, ts)
    rhs_parts = [_trapezoid(lap_terms, ts), _trapezoid(flux_a, ts), _trapezoid(flux_b, ts)]
    lhs = top + d_int
    rhs = sum(rhs_parts)
    scale = abs(top) + abs(d_int) + sum(abs(v) for v in rhs_parts)
    return EnergyCheck(float(t), float(lhs), float(rhs), float(rhs - lhs), float(scale))


# --- cylinder norms by quadrature ---------------------------------------------

def _slices(traj, base: SpacetimePoint, r: float, plan: SamplingPlan):
    traj.check_cylinder(base, r)
    pts = base.xv + r * unit_ball_points(plan.n_volume, plan.seed)
    for tau in cylinder_time_nodes(plan.n_time):
        t = base.t + r * r * tau
        yield t, pts


@dataclass(frozen=True)
class LocalEnergyReport:
    lhs: float
    rhs: float
    ratio: float
    degenerate: bool


DEGENERATE_RHS = 1e-12
DEGENERATE_LHS = 1e-6


def check_local_energy_estimate(traj, base, inner: float = 0.75, outer: float = 1.0,
                                plan: SamplingPlan = CHECK_PLAN) -> LocalEnergyReport:
    """sup_t int_{B_inner} |u|^2 + int_{Q_inner} |Du|^2 against int_{Q_outer} |u|^3 + |P|^{3/2}.

    ``ratio`` is lhs/rhs (0 when both vanish). Rows with rhs below 1e-12
    but lhs above 1e-6 are flagged degenerate instead of producing an
    unbounded ratio.
    """
    base = _as_point(base)
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    vb = ball_volume(inner)
    sup_e, dis = 0.0, 0.0
    for t, pts in _slices(traj, base, inner, plan):
        sup_e = max(sup_e, vb * float(np.mean(np.sum(traj.velocity(pts, t) ** 2, axis=1))))
        dis += float(np.mean(np.sum(traj.velocity_gradient(pts, t) ** 2, axis=(1, 2))))
    dis *= vb * inner**2 / plan.n_time
    acc = 0.0
    for t, pts in _slices(traj, base, outer, plan):
        u = np.linalg.norm(traj.velocity(pts, t), axis=1)
        acc += float(np.mean(u**3 + np.abs(traj.pressure(pts, t)) ** 1.5))
    rhs = acc * ball_volume(outer) * outer**2 / plan.n_time
    lhs = sup_e + dis
    degenerate = rhs < DEGENERATE_RHS and lhs > DEGENERATE_LHS
    if degenerate:
        ratio = math.nan
    elif rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = 0.0
    return LocalEnergyReport(lhs, rhs, ratio, degenerate)


@dataclass(frozen=True)
class L103Report:
    lhs: float
    sup_l2: float
    l2h1: float
    bound: float
    ratio: float


def check_l103(traj, base, r: float = 0.5, plan: SamplingPlan = CHECK_PLAN) -> L103Report:
    """||u||_{L^{10/3}(Q_r)} against (sup_t ||u||_{L^2})^{2/5} ||u||_{L^2 H^1}^{3/5}.

    ``ratio`` = lhs / bound is the fitted constant for this instance.
    """
    base = _as_point(base)
    vb = ball_volume(r)
    vq = vb * r * r
    p = 10.0 / 3.0
    acc_p, acc_h1, sup2 = 0.0, 0.0, 0.0
    for t, pts in _slices(traj, base, r, plan):
        u2 = np.sum(traj.velocity(pts, t) ** 2, axis=1)
        du2 = np.sum(traj.velocity_gradient(pts, t) ** 2, axis=(1, 2))
        acc_p += float(np.mean(u2 ** (p / 2)))
        acc_h1 += float(np.mean(u2 + du2))
        sup2 = max(sup2, vb * float(np.mean(u2)))
    lhs = (vq * acc_p / plan.n_time) ** (1 / p)
    sup_l2 = math.sqrt(sup2)
    l2h1 = math.sqrt(vq * acc_h1 / plan.n_time)
    bound = sup_l2**0.4 * l2h1**0.6
    ratio = lhs / bound if bound > 0 else 0.0
    return L103Report(lhs, sup_l2, l2h1, bound, ratio)


def _as_point(base) -> SpacetimePoint:
    if isinstance(base, SpacetimePoint):
        return base
    x, y, z, t = (float(v) for v in base)
    return SpacetimePoint((x, y, z), t)
