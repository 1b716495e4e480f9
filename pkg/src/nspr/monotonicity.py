"""Empirical checks of the harmonic and inhomogeneous monotonicity lemmas.

Each verifier returns a :class:`MonotonicityReport` whose rows hold the
left-hand side and the two right-hand-side terms at each radius. For the
inhomogeneous lemmas the universal constants are *fitted*:

* ``C1`` is the largest ratio lhs/rhs1 over rows with r >= 1/2 (the range
  where the inequality holds with the second term dropped);
* ``C2`` is the smallest value making every remaining row pass given C1.

A report passes when both constants are finite and every margin
``C1*rhs1 + C2*rhs2 - lhs`` is nonnegative up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .elliptic import BallProblem, solve_dirichlet_div, solve_dirichlet_div2
from .errors import NotHarmonic
from .field import (
    REFERENCE_PLAN,
    FieldLike,
    Grid,
    SamplingPlan,
    ScalarField,
    ball_average,
    evaluate,
    gradient_array,
    sample,
    smooth_cutoff,
    sphere_average,
    unit_ball_points,
)

DEFAULT_RADII = tuple(round(0.05 * k, 10) for k in range(1, 11)) + (0.625, 0.75, 1.0)
UNIT_BALL_BOX = 2.5
HARMONIC_TOL = 1e-6
SMALL_LHS = 1e-10
CSV_HEADER = ["lemma", "seed", "n", "p", "q", "r", "lhs", "rhs1", "rhs2",
              "C1_fit", "C2_fit", "margin"]


@dataclass
class MonotonicityRow:
    r: float
    lhs: float
    rhs1: float
    rhs2: float
    C1: float = math.nan
    C2: float = math.nan
    margin: float = math.nan
    flagged: bool = False


@dataclass
class MonotonicityReport:
    lemma_id: str
    rows: list[MonotonicityRow]
    seed: int | None = None
    n: int | None = None
    p: float | None = None
    q: float | None = None
    C1: float = math.nan
    C2: float = math.nan
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        active = [row for row in self.rows if not row.flagged]
        if self.lemma_id != "harmonic" and not (
            math.isfinite(self.C1) and math.isfinite(self.C2)
        ):
            return False
        return all(row.margin >= 0 for row in active)

    def csv_rows(self):
        for row in self.rows:
            yield [self.lemma_id, self.seed, self.n, self.p, self.q, row.r, row.lhs,
                   row.rhs1, row.rhs2, row.C1, row.C2, row.margin]


def _check_radii(radii):
    radii = sorted(float(r) for r in radii)
    if not radii or radii[0] <= 0 or radii[-1] > 1:
        raise ValueError("radii must lie in (0, 1]")
    return radii


def fd_laplacian_residual(u: ScalarField, center, radius: float = 1.0) -> float:
    """Relative L2 norm of the 7-point Laplacian of u over nodes in B_radius.

    The stencil is exact on cubic polynomials; spectral differentiation
    cannot be used because a function harmonic on a ball is not periodic.
    """
    v = u.values
    h = u.grid.h
    lap = sum(np.roll(v, 1, a) + np.roll(v, -1, a) for a in range(3)) - 6 * v
    lap /= h * h
    X, Y, Z = u.grid.mesh()
    c = np.asarray(center, dtype=float)
    inside = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2 < radius**2
    scale = np.sqrt(np.mean(v[inside] ** 2))
    res = np.sqrt(np.mean(lap[inside] ** 2))
    if scale == 0:
        return 0.0 if res == 0 else math.inf
    return float(res / scale)


def verify_harmonic(u: FieldLike, p: float, radii: Sequence[float] = DEFAULT_RADII,
                    plan: SamplingPlan = REFERENCE_PLAN, center=(0.0, 0.0, 0.0),
                    tol: float = 1e-4, check_harmonic: bool = True,
                    seed: int | None = None) -> MonotonicityReport:
    """Ball and sphere p-averages of a harmonic u must be nondecreasing in r.

    Rows hold (r, ball mean, sphere mean); ``margin`` is the smaller slack of
    the two step conditions ``s_i >= (1 - tol) * s_{i-1}``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    radii = _check_radii(radii)
    if check_harmonic and isinstance(u, ScalarField):
        res = fd_laplacian_residual(u, center)
        if res > HARMONIC_TOL:
            raise NotHarmonic(f"Laplacian residual {res:.3g} exceeds {HARMONIC_TOL:g}")
    rows = []
    prev = None
    for r in radii:
        b = ball_average(u, center, r, p, plan)
        s = sphere_average(u, center, r, p, plan)
        margin = 0.0 if prev is None else min(b - (1 - tol) * prev[0], s - (1 - tol) * prev[1])
        rows.append(MonotonicityRow(r, b, s, 0.0, margin=margin, flagged=b < SMALL_LHS))
        prev = (b, s)
    n = u.grid.n if isinstance(u, ScalarField) else None
    return MonotonicityReport("harmonic", rows, seed=seed, n=n, p=p)


def fit_constants(rows: list[MonotonicityRow]) -> tuple[float, float]:
    """Fit (C1, C2) by the rule in the module docstring and fill row margins."""
    outer = [row for row in rows if row.r >= 0.5]
    C1 = max((row.lhs / row.rhs1 for row in outer if row.rhs1 > 0), default=1.0)
    C2 = 0.0
    for row in rows:
        excess = row.lhs - C1 * row.rhs1
        if excess <= 0:
            continue
        C2 = max(C2, excess / row.rhs2) if row.rhs2 > 0 else math.inf
    for row in rows:
        row.C1, row.C2 = C1, C2
        bound = C1 * row.rhs1 + (C2 * row.rhs2 if C2 else 0.0)
        # rounding slack relative to the size of the terms
        row.margin = bound - row.lhs + 1e-12 * max(bound, row.lhs)
    return C1, C2


def _norm_average(values: Callable, center, r: float, p: float, plan: SamplingPlan) -> float:
    pts = np.asarray(center, dtype=float) + r * unit_ball_points(plan.n_volume, plan.seed)
    v = np.asarray(values(pts), dtype=float)
    mags = np.sqrt(np.sum(v.reshape(len(pts), -1) ** 2, axis=1))
    return float(np.mean(mags**p))


def _tensor_sampler(arr: np.ndarray, grid: Grid) -> Callable:
    """Trilinear sampler of a (..., n, n, n) array returning (m, ...) values."""
    lead = arr.shape[:-3]
    flat = arr.reshape((-1,) + arr.shape[-3:])

    def f(pts):
        vals = [sample(ScalarField(grid, c), pts) for c in flat]
        return np.stack(vals, axis=-1).reshape((len(pts),) + lead)

    return f


def _inhom_report(lemma, u, rhs2_base, p, radii, plan, center, seed, n, q=None):
    radii = _check_radii(radii)
    rhs1 = ball_average(u, center, 1.0, p, plan)
    rows = []
    for r in radii:
        lhs = ball_average(u, center, r, p, plan)
        rows.append(MonotonicityRow(r, lhs, rhs1, rhs2_base / r**3, flagged=lhs < SMALL_LHS))
    C1, C2 = fit_constants(rows)
    return MonotonicityReport(lemma, rows, seed=seed, n=n, p=p, q=q, C1=C1, C2=C2)


def verify_inhom_b(u: FieldLike, G, p: float, radii: Sequence[float] = DEFAULT_RADII,
                   plan: SamplingPlan = REFERENCE_PLAN, center=(0.0, 0.0, 0.0),
                   grid: Grid | None = None, seed: int | None = None) -> MonotonicityReport:
    """Check mean_{B_r}|u|^p <= C1 mean_{B_1}|u|^p + C2 r^-3 mean_{B_1}|G|^p.

    ``G`` is a callable returning (m, 3, 3) values or a (3, 3, n, n, n)
    array on ``grid``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    g_fn = _tensor_sampler(np.asarray(G), grid) if not callable(G) else G
    rhs2 = _norm_average(g_fn, center, 1.0, p, plan)
    n = grid.n if grid is not None else getattr(getattr(u, "grid", None), "n", None)
    return _inhom_report("inhom_b", u, rhs2, p, radii, plan, center, seed, n)


def verify_inhom_a(u: FieldLike, F, q: float, p: float,
                   radii: Sequence[float] = DEFAULT_RADII, plan: SamplingPlan = REFERENCE_PLAN,
                   center=(0.0, 0.0, 0.0), grid: Grid | None = None,
                   seed: int | None = None) -> MonotonicityReport:
    """Check mean_{B_r}|u|^p <= C1 mean_{B_1}|u|^p + C2 r^-3 (mean_{B_1}|F|^q)^(p/q)."""
    if not 1 <= q < 3:
        raise ValueError("need 1 <= q < 3")
    if not 1 <= p <= 3 * q / (3 - q):
        raise ValueError("need 1 <= p <= 3q/(3-q)")
    f_fn = _tensor_sampler(np.asarray(F), grid) if not callable(F) else F
    rhs2 = _norm_average(f_fn, center, 1.0, q, plan) ** (p / q)
    n = grid.n if grid is not None else getattr(getattr(u, "grid", None), "n", None)
    return _inhom_report("inhom_a", u, rhs2, p, radii, plan, center, seed, n, q=q)


def verify_interpolated(u: ScalarField, radii: Sequence[float] = DEFAULT_RADII,
                        plan: SamplingPlan = REFERENCE_PLAN, center=(0.0, 0.0, 0.0),
                        seed: int | None = None) -> MonotonicityReport:
    """Check the L^3 bound with the (L^2 on B_3/4)^(1/2) * (Dirichlet energy on B_1) term.

    The second right-hand term uses plain integrals, not averages.
    """
    grad = gradient_array(u.values, u.grid)
    du = _tensor_sampler(grad, u.grid)
    vol = lambda r: 4.0 / 3.0 * math.pi * r**3
    l2 = vol(0.75) * ball_average(u, center, 0.75, 2, plan)
    dirichlet = vol(1.0) * _norm_average(du, center, 1.0, 2, plan)
    base = math.sqrt(l2) * dirichlet
    return _inhom_report("interpolated", u, base, 3.0, radii, plan, center, seed, u.grid.n)


def corpus_constants(reports: Sequence[MonotonicityReport]) -> tuple[float, float]:
    """One (C1, C2) pair covering every trial: the largest fitted values."""
    if not reports:
        raise ValueError("empty corpus")
    return max(r.C1 for r in reports), max(r.C2 for r in reports)


def constants_stable(a: MonotonicityReport, b: MonotonicityReport, tol: float = 0.5) -> bool:
    """Fitted constants of two reports differ by less than ``tol`` (relative)."""
    for x, y in ((a.C1, b.C1), (a.C2, b.C2)):
        if not (math.isfinite(x) and math.isfinite(y)):
            return False
        top = max(abs(x), abs(y))
        if top > 0 and abs(x - y) / top >= tol:
            return False
    return True


# --- corpora -----------------------------------------------------------------

class HarmonicPolynomial:
    """Sum of Re(c (a . (x - x0))^d) with isotropic complex a (a . a = 0)."""

    def __init__(self, center, constant: float, terms: list[tuple[int, complex, np.ndarray]]):
        self.center = np.asarray(center, dtype=float)
        self.constant = float(constant)
        self.terms = terms

    @property
    def degree(self) -> int:
        return max((d for d, _, _ in self.terms), default=0)

    def __call__(self, pts) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(pts, dtype=float)) - self.center
        out = np.full(len(xi), self.constant)
        for d, c, a in self.terms:
            out += np.real(c * (xi @ a) ** d)
        return out

    def scaled(self, alpha: float) -> "HarmonicPolynomial":
        return HarmonicPolynomial(self.center, alpha * self.constant,
                                  [(d, alpha * c, a) for d, c, a in self.terms])

    def on_grid(self, grid: Grid) -> ScalarField:
        return ScalarField(grid, self(grid.points()).reshape((grid.n,) * 3))


def random_harmonic_polynomial(rng: np.random.Generator, max_degree: int = 3,
                               center=(0.0, 0.0, 0.0), scale: float = 1.0) -> HarmonicPolynomial:
    terms = []
    for d in range(1, max_degree + 1):
        q, _ = np.linalg.qr(rng.standard_normal((3, 2)))
        a = q[:, 0] + 1j * q[:, 1]
        c = scale * complex(rng.standard_normal(), rng.standard_normal())
        terms.append((d, c, a))
    return HarmonicPolynomial(center, scale * rng.standard_normal(), terms)


def harmonic_corpus(seed: int, trials: int, max_degree: int = 3):
    rng = np.random.default_rng(seed)
    return [random_harmonic_polynomial(rng, max_degree) for _ in range(trials)]


def random_smooth_field(grid: Grid, rng: np.random.Generator, shape: tuple,
                        modes: int = 2, amplitude: float = 1.0) -> np.ndarray:
    """Random periodic trigonometric field with wave indices up to ``modes``."""
    X, Y, Z = grid.mesh()
    k0 = 2 * math.pi / grid.box_length
    out = np.zeros(shape + X.shape)
    for idx in np.ndindex(*shape):
        acc = np.zeros_like(X)
        for _ in range(3):
            m = rng.integers(-modes, modes + 1, size=3)
            phase = rng.uniform(0, 2 * math.pi)
            acc += rng.standard_normal() * np.cos(k0 * (m[0] * X + m[1] * Y + m[2] * Z) + phase)
        out[idx] = amplitude * acc
    return out


@dataclass
class InhomTrial:
    grid: Grid
    center: np.ndarray
    harmonic: HarmonicPolynomial
    remainder: object
    source: np.ndarray

    def u(self, pts) -> np.ndarray:
        return self.harmonic(pts) + sample(self.remainder.field, pts)


HARNESS_PLAN = SamplingPlan(n_volume=1000, n_boundary=4096, seed=0)


def inhom_trial(seed: int, n: int, kind: str = "div2", harmonic_scale: float = 0.3,
                box_length: float = UNIT_BALL_BOX,
                plan: SamplingPlan = HARNESS_PLAN) -> InhomTrial:
    """u = h + w on B_1 with h a random degree <= 2 harmonic polynomial and
    w the zero-Dirichlet solution of Laplacian(w) = div^2 G (or div F).

    The source is a random trigonometric field localized to B_1/2 so that
    small-ball averages of u are dominated by w.
    """
    rng = np.random.default_rng(seed)
    grid = Grid(n, box_length)
    c = grid.center
    h = random_harmonic_polynomial(rng, 2, c, harmonic_scale)
    shape = (3, 3) if kind == "div2" else (3,)
    src = random_smooth_field(grid, rng, shape) * smooth_cutoff(grid, c, 0.1, 0.5).values
    if kind == "div2":
        src = 0.5 * (src + np.swapaxes(src, 0, 1))
        w = solve_dirichlet_div2(BallProblem(grid, c, 1.0, G=src), plan)
    else:
        w = solve_dirichlet_div(BallProblem(grid, c, 1.0, F=src), plan)
    return InhomTrial(grid, c, h, w, src)


def interpolated_trial(seed: int, n: int, box_length: float = UNIT_BALL_BOX) -> ScalarField:
    rng = np.random.default_rng(seed)
    grid = Grid(n, box_length)
    return ScalarField(grid, random_smooth_field(grid, rng, ())[()])


def manufactured_div2(grid: Grid, r0: float = 1.0):
    """G = -|x - c|^2 I near the ball (smoothly cut off before the box faces); w = r0^2 - |x - c|^2."""
    c = grid.center
    chi = smooth_cutoff(grid, c, r0 + 0.05, grid.box_length / 2 - 0.05).values
    X, Y, Z = grid.mesh()
    d2 = (X - c[0]) ** 2 + (Y - c[1]) ** 2 + (Z - c[2]) ** 2
    G = np.zeros((3, 3) + X.shape)
    for i in range(3):
        G[i, i] = -d2 * chi
    exact = lambda pts: r0**2 - np.sum((np.atleast_2d(pts) - c) ** 2, axis=1)
    return G, exact


def manufactured_div(grid: Grid, r0: float = 1.0):
    """F = (x - c) near the ball; w = (|x - c|^2 - r0^2)/2."""
    c = grid.center
    chi = smooth_cutoff(grid, c, r0 + 0.05, grid.box_length / 2 - 0.05).values
    X, Y, Z = grid.mesh()
    F = np.stack([(X - c[0]) * chi, (Y - c[1]) * chi, (Z - c[2]) * chi])
    exact = lambda pts: 0.5 * (np.sum((np.atleast_2d(pts) - c) ** 2, axis=1) - r0**2)
    return F, exact


def run_corpus(lemma: str, trials: int, seed: int, n: int,
               plan: SamplingPlan = REFERENCE_PLAN, p: float | None = None,
               q: float = 2.0) -> list[MonotonicityReport]:
    """Seeded corpus for one lemma; trial i uses seed ``seed + i``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    reports = []
    for i in range(trials):
        s = seed + i
        if lemma == "harmonic":
            rng = np.random.default_rng(s)
            u = random_harmonic_polynomial(rng, 3)
            for pp in ((p,) if p else (1.0, 2.0, 3.0)):
                rep = verify_harmonic(u, pp, plan=plan, seed=s)
                rep.n = n
                reports.append(rep)
        elif lemma == "inhom_b":
            t = inhom_trial(s, n, "div2")
            reports.append(verify_inhom_b(t.u, t.source, p or 2.0, plan=plan,
                                          center=t.center, grid=t.grid, seed=s))
        elif lemma == "inhom_a":
            t = inhom_trial(s, n, "div")
            reports.append(verify_inhom_a(t.u, t.source, q, p or 3.0, plan=plan,
                                          center=t.center, grid=t.grid, seed=s))
        elif lemma == "interpolated":
            u = interpolated_trial(s, n)
            reports.append(verify_interpolated(u, plan=plan, center=u.grid.center, seed=s))
        else:
            raise ValueError(f"unknown lemma {lemma!r}")
    return reports
