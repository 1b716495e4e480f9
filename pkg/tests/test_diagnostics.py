import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nspr.diagnostics import (
    ORIGIN,
    cascade_check,
    decay_profile,
    key_iteration_check,
    lemma51_check,
    loglog_slope,
    pressure_split,
    rescale_linear,
    rescale_nonlinear,
    scale_quantities,
)
from nspr.errors import RadiusTooLarge, ScaleUnderResolved, TimeRangeUnavailable
from nspr.field import Grid, SamplingPlan, SpacetimePoint
from nspr.nse import Trajectory, taylor_green_pressure, taylor_green_velocity
from nspr.nse.trajectory import FunctionSource

PI = math.pi
PLAN = SamplingPlan(n_volume=2000, n_boundary=500, seed=0, n_time=8)


def exact_tg(n, times, amplitude=1.0):
    g = Grid(n)
    u = np.stack([taylor_green_velocity(g, t, 1.0, amplitude).values for t in times])
    p = np.stack([taylor_green_pressure(g, t, 1.0, amplitude).values for t in times])
    return Trajectory(g, times, u, p)


@pytest.fixture(scope="module")
def tg64():
    return exact_tg(64, np.linspace(0.0, 1.2, 61))


def constant_source(c, p=0.0):
    c = np.asarray(c, dtype=float)
    return FunctionSource(lambda pts, t: c, lambda pts, t: np.full(len(pts), p),
                          t_min=-10, t_max=10)


def test_constant_field_scale_quantities():
    src = constant_source([2.0, 0.0, 0.0])
    for r in (0.1, 0.5, 1.0):
        q = scale_quantities(src, (0, 0, 0, 0), r, PLAN)
        assert q.C_r == pytest.approx(2.0, rel=1e-12)
        assert q.N_r == pytest.approx(2.0 * r, rel=1e-12)
        assert q.E_r == 0.0


def test_zero_field_all_zero():
    q = scale_quantities(constant_source([0, 0, 0]), (0, 0, 0, 0), 0.5, PLAN)
    assert (q.C_r, q.N_r, q.E_r) == (0.0, 0.0, 0.0)


def test_domain_errors(tg_long):
    with pytest.raises(TimeRangeUnavailable):
        scale_quantities(tg_long, (1, 1, 1, 0.1), 0.5)
    with pytest.raises(RadiusTooLarge):
        scale_quantities(tg_long, (1, 1, 1, 1.2), 3.2)


def test_taylor_green_energy_slope(tg_long, box_center):
    radii = [0.05, 0.1, 0.2, 0.3, 0.4]
    qs = [scale_quantities(tg_long, (*box_center, 0.2), r) for r in radii]
    assert loglog_slope(radii, [q.E_r for q in qs]) == pytest.approx(4.0, abs=0.3)


def test_n_slope_is_one_where_velocity_does_not_vanish(tg_long):
    radii = [0.05, 0.1, 0.2, 0.3, 0.4]
    qs = [scale_quantities(tg_long, (1.0, 2.0, 0.5, 0.2), r) for r in radii]
    assert loglog_slope(radii, [q.N_r for q in qs]) == pytest.approx(1.0, abs=0.2)


@pytest.mark.parametrize("r", [0.25, 0.5, 0.8])
def test_scaling_identities(tg_long, r):
    base = SpacetimePoint((1.0, 2.0, 0.5), 1.0)
    direct = scale_quantities(tg_long, base, r, PLAN)
    lin = scale_quantities(rescale_linear(tg_long, base, r), ORIGIN, 1.0, PLAN)
    nl = scale_quantities(rescale_nonlinear(tg_long, base, r), ORIGIN, 1.0, PLAN)
    assert lin.C_r == pytest.approx(direct.C_r, rel=1e-10)
    assert nl.C_r == pytest.approx(direct.N_r, rel=1e-10)
    assert nl.E_r == pytest.approx(direct.E_r, rel=1e-10)


def test_unit_views_are_identity(tg_long):
    base = SpacetimePoint((1.0, 2.0, 0.5), 1.0)
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (10, 3))
    for view in (rescale_linear(tg_long, base, 1.0), rescale_nonlinear(tg_long, base, 1.0)):
        assert np.array_equal(view.velocity(pts, -0.3), tg_long.velocity(base.xv + pts, 0.7))
        assert np.array_equal(view.pressure(pts, -0.3), tg_long.pressure(base.xv + pts, 0.7))


def test_views_of_constant_field():
    src = constant_source([0.0, 3.0, 0.0])
    assert np.allclose(rescale_linear(src, (0, 0, 0, 0), 0.3).velocity(np.zeros((1, 3)), 0), [0, 3, 0])
    view = rescale_nonlinear(src, (0, 0, 0, 0), 0.3)
    assert np.allclose(view.velocity(np.zeros((1, 3)), 0), [0, 0.9, 0])
    assert scale_quantities(view, ORIGIN, 1.0, PLAN).C_r == pytest.approx(0.9)


def test_translation_covariance():
    # shifting base point and field together leaves the quantities unchanged
    a = np.array([0.3, -0.2, 0.1])
    f = lambda pts, t: np.stack([np.sin(pts[:, 1]), np.cos(pts[:, 0]), 0 * pts[:, 2]], axis=1) * (1 + t)
    src = FunctionSource(f, t_min=-5, t_max=5)
    moved = FunctionSource(lambda pts, t: f(pts - a, t - 0.5), t_min=-5, t_max=5)
    q0 = scale_quantities(src, (0.2, 0.4, 0.0, 0.0), 0.5, PLAN)
    q1 = scale_quantities(moved, (0.5, 0.2, 0.1, 0.5), 0.5, PLAN)
    assert q1.C_r == pytest.approx(q0.C_r, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.45), st.floats(0.2, 1.15), st.floats(0, 6.28))
def test_scale_quantity_invariants(r, t, x):
    tr = _small_tg()
    if t - r * r < 0:
        return
    q = scale_quantities(tr, (x, 1.0, 2.0, t), r, SamplingPlan(1000, 100, 0, 4))
    assert q.N_r == pytest.approx(r * q.C_r, rel=1e-12)
    assert min(q.C_r, q.N_r, q.E_r) >= 0 and np.isfinite([q.C_r, q.N_r, q.E_r]).all()


_CACHE = {}


def _small_tg():
    if "tg" not in _CACHE:
        _CACHE["tg"] = exact_tg(16, np.linspace(0, 1.2, 13))
    return _CACHE["tg"]


# --- decay profile -------------------------------------------------------------

def test_decay_constant_rows_zero():
    prof = decay_profile(constant_source([1.0, -2.0, 0.5], p=3.0), (0, 0, 0, 0), 0.5, 4, plan=PLAN)
    assert all(row.C == pytest.approx(0.0, abs=1e-13) for row in prof.rows)
    assert np.allclose(prof.rows[-1].V, [1.0, -2.0, 0.5])


def test_decay_affine_slope_one():
    B = np.array([[0.5, 1.0, 0.0], [0.0, -0.2, 0.3], [0.4, 0.0, -0.3]])
    a = np.array([1.0, 0.0, -1.0])
    src = FunctionSource(lambda p, t: a + p @ B.T, t_min=-10, t_max=10)
    prof = decay_profile(src, (0, 0, 0, 0), 0.5, 5, plan=PLAN)
    assert prof.holder_estimate == pytest.approx(1.0, abs=1e-9)
    assert len(prof.rows) == 6 and not prof.truncated


def tg_exact_source():
    def u(p, t):
        x, y, d = p[:, 0], p[:, 1], math.exp(-2 * t)
        return np.stack([np.sin(x) * np.cos(y) * d, -np.cos(x) * np.sin(y) * d, 0 * x], axis=1)

    def pr(p, t):
        return (np.cos(2 * p[:, 0]) + np.cos(2 * p[:, 1])) / 4 * math.exp(-4 * t)

    return FunctionSource(u, pr, t_min=0.0, t_max=1.2)


def test_decay_taylor_green_holder():
    prof = decay_profile(tg_exact_source(), (1.0, 2.0, 0.5, 1.1), 0.5, 4, r_base=0.4)
    assert len(prof.rows) == 5
    assert 0.8 <= prof.holder_estimate <= 1.2


def test_decay_taylor_green_grid_truncates(tg64):
    # at unit radius the time decay of the vortex dominates, so only check monotonicity
    prof = decay_profile(tg64, (1.0, 2.0, 0.5, 1.1), 0.5, 4)
    assert prof.truncated and len(prof.rows) == 3
    cs = [row.C for row in prof.rows]
    assert all(a > b > 0 for a, b in zip(cs, cs[1:]))


def test_decay_under_resolved(tg64):
    with pytest.raises(ScaleUnderResolved):
        decay_profile(tg64, (1.0, 2.0, 0.5, 1.1), 0.5, 4, r_base=0.1)
    with pytest.raises(ScaleUnderResolved):
        decay_profile(tg64, (1.0, 2.0, 0.5, 1.1), 0.5, 4, strict=True)


def test_decay_gauge_invariance(tg64):
    base = (1.0, 2.0, 0.5, 1.1)
    a = decay_profile(tg64, base, 0.5, 2)
    b = decay_profile(tg64.with_pressure_offset(lambda t: 5.0 * math.sin(3 * t) + 2.0), base, 0.5, 2)
    for x, y in zip(a.rows, b.rows):
        assert abs(x.C - y.C) <= 1e-10 and x.V == y.V


# --- pressure split ------------------------------------------------------------

def test_split_constant_velocity():
    g = Grid(32)
    X, _, _ = g.mesh()
    n = 32
    u = np.ones((3, 3, n, n, n))
    p = np.stack([X, X, X])  # x1 is harmonic inside a ball away from the wrap seam
    tr = Trajectory(g, [0.0, 0.3, 0.6], u, p)
    split = pressure_split(tr, (PI, PI, PI, 0.6))
    pts = np.array([[PI + 0.1, PI, PI - 0.2], [PI, PI + 0.3, PI]])
    for s in split.slices:
        assert np.allclose(s.R(pts), 0.0, atol=1e-14)
        assert np.allclose(s.H(pts), pts[:, 0], atol=1e-12)


def test_split_taylor_green_residual(tg_long):
    split = pressure_split(tg_long, (1.0, 2.0, 0.5, 1.0), r=0.75, inner=0.5)
    assert len(split.slices) == 57
    assert split.max_residual <= 1e-3


# --- iteration checks ----------------------------------------------------------

def test_key_iteration_constant_field():
    c = np.array([0.0, 0.0, 2.0])
    for lam, r in ((0.1, 0.4), (0.5, 0.2)):
        res = key_iteration_check(constant_source(c), (0, 0, 0, 0), r, lam, plan=PLAN)
        assert res.margin == pytest.approx((0.5 - lam) * r * 2.0, rel=1e-12)
        assert res.hypothesis_met


def test_key_iteration_zero_field():
    res = key_iteration_check(constant_source([0, 0, 0]), (0, 0, 0, 0), 0.4, plan=PLAN)
    assert res.margin == 0.0


def test_cascade_constant_and_zero():
    rep = cascade_check(constant_source([1.0, 0, 0]), (0, 0, 0, 0), 0.1, 3, plan=PLAN)
    assert rep.passed and rep.eps == 0.0
    assert [row.N for row in rep.rows] == pytest.approx([1.0, 0.1, 0.01, 0.001])
    rep = cascade_check(constant_source([0, 0, 0]), (0, 0, 0, 0), 0.1, 3, plan=PLAN)
    assert rep.passed and all(row.margin == 0 for row in rep.rows)


def test_cascade_detects_failure():
    # a field concentrated at the base point violates the bound at small scales
    f = lambda p, t: np.stack([1.0 / (np.sum(p**2, axis=1) + 1e-4), 0 * p[:, 0], 0 * p[:, 0]], axis=1)
    rep = cascade_check(FunctionSource(f, t_min=-5, t_max=5), (0, 0, 0, 0), 0.1, 3, eps=1e-12, plan=PLAN)
    assert not rep.passed and rep.first_failure >= 1


def test_lemma51_trivial_and_constant():
    rep = lemma51_check(constant_source([0, 0, 0]), (0, 0, 0, 0), plan=PLAN)
    assert rep.C_a == 0 and rep.C_b == 0 and rep.passed
    rep = lemma51_check(constant_source([1.0, 0, 0]), (0, 0, 0, 0), plan=PLAN)
    # E = 0, N_1 = 1: lhs r^3 vs structure r, so the fitted C is max r^2 = 1/4
    assert rep.C_a == pytest.approx(0.25, rel=1e-12)
    assert all(row.margin_a >= 0 for row in rep.rows)


def test_lemma51_taylor_green_finite(tg_long):
    a = lemma51_check(tg_long, (1.0, 2.0, 0.5, 1.0))
    assert a.passed and a.C_a > 0 and a.C_b > 0
    assert all(row.margin_a >= -1e-15 and row.margin_b >= -1e-15 for row in a.rows)
    with pytest.raises(ValueError):
        lemma51_check(tg_long, (1.0, 2.0, 0.5, 1.0), radii=(0.6,))
