"""Pseudo-spectral incompressible Navier-Stokes on the periodic box.

Viscous term by integrating factor (exact in Fourier space), nonlinear
term by explicit two-stage Runge-Kutta (Heun) in divergence form, 2/3-rule
dealiasing of products and a Leray projection at every stage.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import BlowupDetected, CflViolation
from ..field import Grid, ScalarField, VectorField, irfftn, rfftn
from .trajectory import Trajectory

log = logging.getLogger(__name__)

BLOWUP_SPEED = 1e6
INIT_KINDS = ("zero", "taylor_green", "random_divfree", "from_file")


@dataclass(frozen=True)
class SolverConfig:
    n: int = 32
    viscosity: float = 1.0
    dt: float = 1e-3
    t_end: float = 0.1
    dealias: bool = True
    init: str = "taylor_green"
    seed: int = 0
    spectrum_slope: float = -5.0 / 3.0
    amplitude: float = 1.0
    init_path: str | None = None
    save_every: int = 1
    box_length: float = 2 * math.pi

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("n must be even and >= 8")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.viscosity > 0:
            raise ValueError("viscosity must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")
        if self.init not in INIT_KINDS:
            raise ValueError(f"init must be one of {INIT_KINDS}")
        if self.init == "from_file" and not self.init_path:
            raise ValueError("init=from_file needs init_path")

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.box_length)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# --- projections and pressure ------------------------------------------------

def _project_hat(vh: np.ndarray, grid: Grid) -> np.ndarray:
    k = grid.derivative_wavenumbers()
    k2 = sum(kk**2 for kk in k)
    inv = np.zeros_like(k2)
    inv[k2 > 0] = 1.0 / k2[k2 > 0]
    kdotv = sum(kk * vh[i] for i, kk in enumerate(k))
    return np.stack([vh[i] - k[i] * kdotv * inv for i in range(3)])


def leray_project(v: VectorField) -> VectorField:
    """Remove the gradient part: v - grad(Laplacian^-1 div v)."""
    vh = rfftn(v.values)
    return VectorField(v.grid, irfftn(_project_hat(vh, v.grid), v.grid.n))


def _product_hats(u: np.ndarray, grid: Grid, dealias: bool):
    """Fourier transforms of u_i u_j for i <= j, keyed by (i, j)."""
    mask = grid.dealias_mask() if dealias else None
    out = {}
    for i in range(3):
        for j in range(i, 3):
            qh = rfftn(u[i] * u[j])
            if mask is not None:
                qh = qh * mask
            out[i, j] = out[j, i] = qh
    return out


def _pressure_hat(u: np.ndarray, grid: Grid, dealias: bool) -> np.ndarray:
    k = grid.derivative_wavenumbers()
    q = _product_hats(u, grid, dealias)
    k2 = sum(kk**2 for kk in k)
    inv = np.zeros_like(k2)
    inv[k2 > 0] = 1.0 / k2[k2 > 0]
    # Laplacian P = -d_i d_j (u^i u^j)
    s = sum(k[i] * k[j] * q[i, j] for i in range(3) for j in range(3))
    return -s * inv


def compute_pressure(u: VectorField, dealias: bool = True) -> ScalarField:
    """Zero-mean pressure of a divergence-free velocity field."""
    return ScalarField(u.grid, irfftn(_pressure_hat(u.values, u.grid, dealias), u.grid.n))


def _nonlinear_hat(uh: np.ndarray, grid: Grid, dealias: bool) -> np.ndarray:
    """Projected -div(u (x) u) in Fourier space."""
    u = irfftn(uh, grid.n)
    k = grid.derivative_wavenumbers()
    q = _product_hats(u, grid, dealias)
    nh = np.stack([-sum(1j * k[j] * q[i, j] for j in range(3)) for i in range(3)])
    return _project_hat(nh, grid)


# --- initial data ------------------------------------------------------------

def taylor_green_velocity(grid: Grid, t: float = 0.0, viscosity: float = 1.0,
                          amplitude: float = 1.0) -> VectorField:
    k0 = 2 * math.pi / grid.box_length
    decay = amplitude * math.exp(-2 * viscosity * k0**2 * t)
    X, Y, Z = grid.mesh()
    return VectorField(grid, decay * np.stack([
        np.sin(k0 * X) * np.cos(k0 * Y),
        -np.cos(k0 * X) * np.sin(k0 * Y),
        np.zeros_like(Z),
    ]))


def taylor_green_pressure(grid: Grid, t: float = 0.0, viscosity: float = 1.0,
                          amplitude: float = 1.0) -> ScalarField:
    k0 = 2 * math.pi / grid.box_length
    decay = amplitude**2 * math.exp(-4 * viscosity * k0**2 * t)
    X, Y, _ = grid.mesh()
    return ScalarField(grid, 0.25 * decay * (np.cos(2 * k0 * X) + np.cos(2 * k0 * Y)))


def random_divfree(grid: Grid, seed: int, slope: float = -5.0 / 3.0,
                   amplitude: float = 1.0) -> VectorField:
    """Solenoidal random field with shell spectrum E(k) ~ k^slope, max|u| = amplitude."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((3,) + (grid.n,) * 3)
    nh = rfftn(noise)
    kx, ky, kz = grid.wavenumbers()
    kmag = np.sqrt(kx**2 + ky**2 + kz**2) * grid.box_length / (2 * math.pi)
    shape = np.zeros_like(kmag)
    band = (kmag >= 1.0) & (grid.dealias_mask())
    shape[band] = np.sqrt(kmag[band] ** slope) / kmag[band]
    vh = _project_hat(nh * shape, grid)
    v = irfftn(vh, grid.n)
    peak = np.sqrt(np.max(np.sum(v**2, axis=0)))
    return VectorField(grid, amplitude * v / peak)


def initial_velocity(config: SolverConfig) -> VectorField:
    grid = config.grid
    if config.init == "zero":
        return VectorField(grid, np.zeros((3,) + (grid.n,) * 3))
    if config.init == "taylor_green":
        return taylor_green_velocity(grid, 0.0, config.viscosity, config.amplitude)
    if config.init == "random_divfree":
        return random_divfree(grid, config.seed, config.spectrum_slope, config.amplitude)
    from ..io import read_snapshot

    snap = read_snapshot(config.init_path)
    if snap.grid != grid:
        raise ValueError(f"initial file grid {snap.grid} does not match config grid {grid}")
    u = np.stack([snap.fields[c] for c in ("u1", "u2", "u3")])
    return leray_project(VectorField(grid, u))


# --- time stepping -----------------------------------------------------------

@dataclass
class SolverState:
    u_hat: np.ndarray
    t: float
    steps: int = 0


def _max_speed(u: np.ndarray) -> float:
    return float(np.sqrt(np.max(np.sum(u**2, axis=0))))


def _check_stability(u: np.ndarray, t: float, config: SolverConfig) -> float:
    speed = _max_speed(u)
    if not np.isfinite(speed) or speed > BLOWUP_SPEED:
        raise BlowupDetected(speed, t)
    h = config.box_length / config.n
    if speed > 0 and config.dt > 0.5 * h / speed:
        raise CflViolation(speed, config.dt, h)
    return speed


def step(state: SolverState, config: SolverConfig) -> SolverState:
    grid = config.grid
    u = irfftn(state.u_hat, grid.n)
    _check_stability(u, state.t, config)
    dt = config.dt
    decay = np.exp(-config.viscosity * grid.k_squared() * dt)
    k1 = _nonlinear_hat(state.u_hat, grid, config.dealias)
    mid = decay * (state.u_hat + dt * k1)
    k2 = _nonlinear_hat(mid, grid, config.dealias)
    new = decay * (state.u_hat + 0.5 * dt * k1) + 0.5 * dt * k2
    return SolverState(new, state.t + dt, state.steps + 1)


def run(config: SolverConfig) -> Trajectory:
    """Integrate to ``t_end`` and collect snapshots every ``save_every`` steps."""
    grid = config.grid
    u0 = initial_velocity(config)
    state = SolverState(rfftn(u0.values), 0.0)
    nsteps = int(round(config.t_end / config.dt))
    times, us, ps = [], [], []

    def save():
        u = irfftn(state.u_hat, grid.n)
        times.append(state.steps * config.dt)
        us.append(u)
        ps.append(irfftn(_pressure_hat(u, grid, config.dealias), grid.n))

    save()
    for _ in range(nsteps):
        state = step(state, config)
        if state.steps % config.save_every == 0 or state.steps == nsteps:
            save()
    log.debug("finished %d steps, %d snapshots", nsteps, len(times))
    prov = {"config_hash": config.digest(), "config": asdict(config)}
    return Trajectory(grid, times, np.array(us), np.array(ps), config.viscosity, prov)
