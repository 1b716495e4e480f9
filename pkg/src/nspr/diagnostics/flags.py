"""Epsilon-regularity flags on a probe lattice and a parabolic box-counting dimension."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..errors import EmptySet, TimeRangeUnavailable
from ..field import SamplingPlan, SpacetimePoint, cylinder_time_nodes, unit_ball_points
from .scales import loglog_slope

FLAG_PLAN = SamplingPlan(n_volume=1000, n_boundary=100, seed=0, n_time=4)
REGULAR, SUSPECT, UNKNOWN = "regular", "suspect", "unknown"


def derived_eps2(eps0: float, eps1: float) -> float:
    return min(eps0**3 / 2**21, eps1)


@dataclass(frozen=True)
class ThresholdConfig:
    """Smallness thresholds; eps2 is derived from eps0 and eps1 unless given.

    An explicit ``eps2`` must respect the derived bound while
    ``derive_eps2`` is on; switch it off to probe arbitrary thresholds.
    """

    eps0: float = 0.05
    eps1: float = 0.05
    eps2: float | None = None
    lam: float = 0.1
    R: float = 0.4
    derive_eps2: bool = True

    def __post_init__(self):
        for name in ("eps0", "eps1", "lam"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not self.R > 0:
            raise ValueError("R must be positive")
        bound = derived_eps2(self.eps0, self.eps1)
        if self.eps2 is None:
            if not self.derive_eps2:
                raise ValueError("eps2 is required when derive_eps2 is off")
            object.__setattr__(self, "eps2", bound)
        elif not 0 < self.eps2 < 1:
            raise ValueError("eps2 must lie in (0, 1)")
        elif self.derive_eps2 and self.eps2 > bound:
            raise ValueError(f"eps2={self.eps2:g} exceeds min(eps0^3/2^21, eps1)={bound:g}")


def predicted_radius(n1: float, eps0: float, lam: float) -> float:
    """r0 = lam^6 (N_1 / eps0)^{ln lam / ln 2}, capped at 1 (unit-scale units)."""
    if n1 <= 0:
        return 1.0
    return float(min(1.0, lam**6 * (n1 / eps0) ** (math.log(lam) / math.log(2))))


@dataclass
class FlagMap:
    """Probe points (x, y, z, t) with their status.

    ``failing_r`` is the largest probed radius whose E exceeded eps2 (nan
    otherwise); ``r0`` is the predicted regularity radius in units of R
    for regular points (nan elsewhere or when not computed).
    """

    points: np.ndarray
    status: np.ndarray
    failing_r: np.ndarray
    max_E: np.ndarray
    r0: np.ndarray
    radii: tuple
    thresholds: ThresholdConfig
    box_length: float
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 4)
        m = len(self.points)
        self.status = np.asarray(self.status, dtype=object).reshape(m)
        self.failing_r = np.asarray(self.failing_r, dtype=float).reshape(m)
        self.max_E = np.asarray(self.max_E, dtype=float).reshape(m)
        self.r0 = np.asarray(self.r0, dtype=float).reshape(m)

    @classmethod
    def planted(cls, points, box_length: float = math.inf) -> "FlagMap":
        """A map whose every point is suspect (for box-counting oracles)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 4)
        m = len(pts)
        nan = np.full(m, np.nan)
        return cls(pts, np.full(m, SUSPECT, dtype=object), nan, nan, nan, (),
                   ThresholdConfig(), box_length, ["planted"])

    def count(self, status: str) -> int:
        return int(np.sum(self.status == status))

    @property
    def suspects(self) -> np.ndarray:
        return self.points[self.status == SUSPECT]

    def csv_rows(self):
        for p, s, fr in zip(self.points, self.status, self.failing_r):
            yield [p[0], p[1], p[2], p[3], s, None if math.isnan(fr) else fr]


def _batched_gradient_mean(source, centers, t0: float, r: float, plan: SamplingPlan):
    """mean_{Q_r(c, t0)} |Du|^2 for every spatial center c at one base time."""
    xi = unit_ball_points(plan.n_volume, plan.seed)
    pts = (centers[:, None, :] + r * xi[None]).reshape(-1, 3)
    acc = np.zeros(len(centers))
    taus = cylinder_time_nodes(plan.n_time)
    for tau in taus:
        g = source.velocity_gradient(pts, t0 + r * r * tau)
        acc += np.sum(g**2, axis=(1, 2)).reshape(len(centers), -1).mean(axis=1)
    return acc / len(taus)


def _batched_n(source, centers, t0: float, r: float, plan: SamplingPlan):
    xi = unit_ball_points(plan.n_volume, plan.seed)
    pts = (centers[:, None, :] + r * xi[None]).reshape(-1, 3)
    u3 = np.zeros(len(centers))
    p32 = np.zeros(len(centers))
    taus = cylinder_time_nodes(plan.n_time)
    for tau in taus:
        t = t0 + r * r * tau
        u3 += (np.linalg.norm(source.velocity(pts, t), axis=1) ** 3).reshape(len(centers), -1).mean(1)
        p32 += (np.abs(source.pressure(pts, t)) ** 1.5).reshape(len(centers), -1).mean(1)
    u3 /= len(taus)
    p32 /= len(taus)
    return r * (np.cbrt(u3) + r * p32 ** (2.0 / 3.0))


def default_radii(R: float, levels: int = 4) -> tuple:
    return tuple(R / 2**j for j in range(levels))


def flag_map(traj, thresholds: ThresholdConfig = ThresholdConfig(), stride: int = 4,
             time_stride: int = 4, radii=None, plan: SamplingPlan = FLAG_PLAN,
             record_radius: bool = True) -> FlagMap:
    """Probe E_r on a space-time lattice of grid nodes and snapshot times.

    A probe is suspect iff E_r > eps2 for some probed r <= R, regular
    otherwise, and unknown when Q_R does not fit in the time range.
    """
    if stride < 1 or time_stride < 1:
        raise ValueError("strides must be >= 1")
    R = thresholds.R
    radii = default_radii(R) if radii is None else tuple(sorted((float(r) for r in radii),
                                                              reverse=True))
    if not radii or any(not 0 < r <= R for r in radii):
        raise ValueError("probe radii must lie in (0, R]")
    grid = traj.grid
    coords = grid.coords()[::stride]
    X, Y, Z = np.meshgrid(coords, coords, coords, indexing="ij")
    centers = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=-1)
    times = traj.times[::time_stride]
    pts, status, failing, emax, r0 = [], [], [], [], []
    eps2 = thresholds.eps2
    for t0 in times:
        m = len(centers)
        pts.append(np.column_stack([centers, np.full(m, t0)]))
        try:
            traj.check_cylinder(_probe_point(centers[0], t0), max(radii))
        except TimeRangeUnavailable:
            status.append(np.full(m, UNKNOWN, dtype=object))
            failing.append(np.full(m, np.nan))
            emax.append(np.full(m, np.nan))
            r0.append(np.full(m, np.nan))
            continue
        E = np.stack([r**4 * _batched_gradient_mean(traj, centers, t0, r, plan)
                      for r in radii])
        over = E > eps2
        sus = over.any(axis=0)
        fr = np.full(m, np.nan)
        for j, r in reversed(list(enumerate(radii))):
            fr[over[j]] = r
        status.append(np.where(sus, SUSPECT, REGULAR).astype(object))
        failing.append(fr)
        emax.append(E.max(axis=0))
        rad = np.full(m, np.nan)
        if record_radius:
            n1 = _batched_n(traj, centers, t0, R, plan)
            rad = np.array([predicted_radius(v, thresholds.eps0, thresholds.lam) for v in n1])
            rad[sus] = np.nan
        r0.append(rad)
    return FlagMap(np.concatenate(pts), np.concatenate(status), np.concatenate(failing),
                   np.concatenate(emax), np.concatenate(r0), radii, thresholds,
                   grid.box_length)


def _probe_point(x, t):
    return SpacetimePoint(tuple(float(v) for v in x), float(t))


# --- box counting ------------------------------------------------------------

@dataclass
class BoxCount:
    radii: tuple
    counts: tuple
    dimension: float
    empty: bool

    def csv_rows(self):
        return [[r, n] for r, n in zip(self.radii, self.counts)]


def cover_count(points: np.ndarray, r: float, box_length: float = math.inf) -> int:
    """Greedy cover of (x, y, z, t) points by parabolic cylinders of radius r.

    Two points are neighbours when |dx| <= r and |dt| <= r^2. Centres are
    chosen among the points, each time the one covering the most uncovered
    points (ties to the lowest index, so the count is deterministic).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 4)
    if len(pts) == 0:
        return 0
    if math.isfinite(box_length):
        tree = cKDTree(np.mod(pts[:, :3], box_length), boxsize=box_length)
    else:
        tree = cKDTree(pts[:, :3])
    cand = tree.query_ball_point(tree.data, r)
    nbrs = []
    for i, js in enumerate(cand):
        js = np.asarray(js, dtype=int)
        nbrs.append(set(js[np.abs(pts[js, 3] - pts[i, 3]) <= r * r].tolist()))
    uncovered = set(range(len(pts)))
    heap = [(-len(n), i) for i, n in enumerate(nbrs)]
    heapq.heapify(heap)
    count = 0
    while uncovered:
        neg, i = heapq.heappop(heap)
        gain = len(nbrs[i] & uncovered)
        if gain == 0:
            continue
        if gain < -neg:
            heapq.heappush(heap, (-gain, i))
            continue
        uncovered -= nbrs[i]
        count += 1
    return count


def boxcount_dimension(flags: FlagMap, radii) -> BoxCount:
    """Counts N(r) of the suspect set and d = -slope of log N against log r.

    Needs at least three radii spanning a factor of ten. An empty suspect
    set gives all-zero counts and an undefined (nan) dimension.
    """
    radii = tuple(sorted(float(r) for r in radii))
    if len(radii) < 3 or radii[0] <= 0 or radii[-1] / radii[0] < 10 * (1 - 1e-12):
        raise ValueError("need at least 3 positive radii spanning a decade")
    sus = flags.suspects
    if len(sus) == 0:
        return BoxCount(radii, tuple(0 for _ in radii), math.nan, True)
    counts = tuple(cover_count(sus, r, flags.box_length) for r in radii)
    return BoxCount(radii, counts, 0.0 - loglog_slope(radii, counts), False)


def require_nonempty(result: BoxCount) -> BoxCount:
    if result.empty:
        raise EmptySet("no suspect points to cover")
    return result
