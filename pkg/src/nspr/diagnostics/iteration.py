"""Checks of the nonlinear iteration: the A/B bounds, one step, and the cascade."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..field import SamplingPlan
from .scales import (
    ORIGIN,
    as_point,
    c_value,
    cylinder_means,
    rescale_nonlinear,
    scale_quantities,
)

DEFAULT_LAM = 0.1
DEFAULT_EPS1 = 0.05
LEMMA51_RADII = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)


def _fit(lhs, struct) -> float:
    """Smallest C with lhs <= C * struct on every row (0/0 rows ignored)."""
    best = 0.0
    for a, b in zip(lhs, struct):
        if b > 0:
            best = max(best, a / b)
        elif a > 0:
            return math.inf
    return best


@dataclass(frozen=True)
class Lemma51Row:
    r: float
    lhs_a: float
    struct_a: float
    lhs_b: float
    struct_b: float
    margin_a: float
    margin_b: float


@dataclass
class Lemma51Report:
    base: object
    outer: float
    N1: float
    E1: float
    C_a: float
    C_b: float
    rows: list[Lemma51Row]

    @property
    def passed(self) -> bool:
        return math.isfinite(self.C_a) and math.isfinite(self.C_b)


def lemma51_check(source, base, radii=LEMMA51_RADII, outer: float = 1.0,
                  plan: SamplingPlan = SamplingPlan()) -> Lemma51Report:
    """Both sides of the velocity (A) and pressure (B) bounds over a radius sweep.

    Evaluated on the Navier-Stokes rescaling by ``outer`` about ``base``,
    so Q_1 of the view is Q_outer of the source. The structure terms are

      A: (r + E1/r^2) N1^3 + E1^2/r^5 + E1^{4/3}/r^3   vs  r^3 mean_{Q_r} |u|^3
      B: (r + E1/r^2) N1^{3/2} + E1^2/r^5            vs  r^3 mean_{Q_r} |P|^{3/2}

    C is fitted as the smallest constant making every row hold; margins are
    C * structure - lhs.
    """
    radii = [float(r) for r in radii]
    if not radii or any(not 0 < r <= 0.5 for r in radii):
        raise ValueError("radii must lie in (0, 1/2]")
    base = as_point(base)
    view = rescale_nonlinear(source, base, outer)
    q1 = scale_quantities(view, ORIGIN, 1.0, plan)
    n1, e1 = q1.N_r, q1.E_r
    raw = []
    for r in radii:
        m = cylinder_means(view, ORIGIN, r, plan, gradient=False)
        lead = r + e1 / r**2
        raw.append((r, r**3 * m["u3"], lead * n1**3 + e1**2 / r**5 + e1 ** (4 / 3) / r**3,
                    r**3 * m["p32"], lead * n1**1.5 + e1**2 / r**5))
    ca = _fit([x[1] for x in raw], [x[2] for x in raw])
    cb = _fit([x[3] for x in raw], [x[4] for x in raw])
    rows = [Lemma51Row(r, la, sa, lb, sb, ca * sa - la if math.isfinite(ca) else -math.inf,
                       cb * sb - lb if math.isfinite(cb) else -math.inf)
            for r, la, sa, lb, sb in raw]
    return Lemma51Report(base, outer, n1, e1, ca, cb, rows)


@dataclass(frozen=True)
class KeyIterationResult:
    r_base: float
    lam: float
    N_r: float
    N_lr: float
    E_r: float
    margin: float
    hypothesis_met: bool


def key_iteration_check(source, base, r_base: float, lam: float = DEFAULT_LAM,
                        eps1: float = DEFAULT_EPS1,
                        plan: SamplingPlan = SamplingPlan()) -> KeyIterationResult:
    """margin = N_r/2 + E_r^{1/3} - N_{lam r}; nonnegative means the step holds.

    ``hypothesis_met`` records whether E_r <= eps1; the margin is reported
    either way.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    base = as_point(base)
    outer = scale_quantities(source, base, r_base, plan)
    m = cylinder_means(source, base, lam * r_base, plan, gradient=False)
    inner_r = lam * r_base
    n_lr = inner_r * c_value(m["u3"], m["p32"], inner_r)
    margin = 0.5 * outer.N_r + np.cbrt(outer.E_r) - n_lr
    return KeyIterationResult(float(r_base), float(lam), outer.N_r, float(n_lr), outer.E_r,
                              float(margin), bool(outer.E_r <= eps1))


@dataclass(frozen=True)
class CascadeRow:
    k: int
    radius: float
    N: float
    bound: float
    margin: float


@dataclass
class CascadeReport:
    lam: float
    eps: float
    N1: float
    rows: list[CascadeRow]
    first_failure: int | None
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.first_failure is None


def cascade_check(source, base, lam: float = DEFAULT_LAM, k_max: int = 3,
                  eps: float | None = None, outer: float = 1.0,
                  plan: SamplingPlan = SamplingPlan()) -> CascadeReport:
    """Rows N_{lam^k} <= 2^{-k} N_1 + 2 eps^{1/3} for k = 0..k_max.

    Radii are measured in units of ``outer``. When ``eps`` is None it is
    the largest E measured on the same ladder: the smallness hypothesis is
    only ever probed at these finitely many radii.
    """
    if not 0 < lam < 1:
        raise ValueError("lam must lie in (0, 1)")
    base = as_point(base)
    view = rescale_nonlinear(source, base, outer)
    qs = [scale_quantities(view, ORIGIN, lam**k, plan) for k in range(k_max + 1)]
    notes = []
    if eps is None:
        eps = max(q.E_r for q in qs)
        notes.append("eps taken as the largest E on the probed ladder")
    n1 = qs[0].N_r
    rows = []
    first = None
    for k, q in enumerate(qs):
        bound = n1 / 2**k + 2 * np.cbrt(eps)
        margin = float(bound - q.N_r)
        if margin < 0 and first is None:
            first = k
        rows.append(CascadeRow(k, q.r * outer, q.N_r, float(bound), margin))
    return CascadeReport(float(lam), float(eps), n1, rows, first, notes)
