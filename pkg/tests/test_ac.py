"""Reaction-diffusion stepper: stability, bounds, ordering, schemes."""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fattenlab.ac import (ACParams, NumericalAbort, double_well, evolve,
                          reaction, stable_dt, step, verify_solution_bounds)
from fattenlab.geometry import Circle, leaf_initial_data, signed_distance
from fattenlab.grid import Boundary, Grid, ScalarField


@settings(max_examples=50, deadline=None)
@given(u=st.floats(-1.5, 1.5))
def test_reaction_is_odd_with_unit_roots(u):
    arr = np.array([u])
    f = reaction(arr)
    f_neg = reaction(-arr)
    assert f_neg[0] == pytest.approx(-f[0], abs=1e-14)
    for root in (-1.0, 0.0, 1.0):
        assert reaction(np.array([root]))[0] == 0.0


def test_double_well_nonnegative_with_minima_at_phases():
    u = np.linspace(-1.5, 1.5, 401)
    w = double_well(u)
    assert np.min(w) >= 0.0
    assert double_well(np.array([1.0]))[0] == 0.0
    assert double_well(np.array([-1.0]))[0] == 0.0
    assert double_well(np.array([0.0]))[0] == pytest.approx(0.5)


def test_stable_dt_formula():
    g = Grid.square(64, -1.0, 1.0)
    eps = 0.1
    expected = min(g.h ** 2 / (4 * g.dim), eps ** 2 / 8.0)
    assert stable_dt(g, eps) == pytest.approx(expected, rel=1e-12)
    # diffusion-limited for fine grids, reaction-limited for small eps
    assert stable_dt(Grid.square(512, -1, 1), 0.5) == pytest.approx(
        (2.0 / 512) ** 2 / 8.0)
    assert stable_dt(Grid.square(16, -1, 1), 0.01) == pytest.approx(
        0.01 ** 2 / 8.0)


def test_phase_states_are_fixed_points():
    # each pure phase is stationary when the far field matches it
    for phase in (-1.0, 1.0):
        g = Grid.square(32, -1.0, 1.0, boundary=Boundary(value=phase))
        p = ACParams(epsilon=0.3)
        u = ScalarField(g, np.full(g.shape, phase), 0.0)
        out = step(u, p)
        assert np.array_equal(out.values, u.values)


def test_mismatched_far_field_disturbs_the_wall():
    # a +1 slab against the default -1 far field must move at the wall
    g = Grid.square(32, -1.0, 1.0)
    u = ScalarField(g, np.full(g.shape, 1.0), 0.0)
    out = step(u, ACParams(epsilon=0.3))
    assert np.max(np.abs(out.values - 1.0)) > 0.1
    assert np.max(np.abs(out.values[2:-2, 2:-2] - 1.0)) == 0.0


def test_explicit_step_respects_comparison(rng):
    # ordered initial data stays ordered under the monotone explicit scheme
    g = Grid.square(32, -1.0, 1.0)
    p = ACParams(epsilon=0.3)
    mask_hi = rng.random((32, 32)) < 0.5
    mask_lo = mask_hi & (rng.random((32, 32)) < 0.5)  # subset => lower data
    u_hi = ScalarField(g, np.where(mask_hi, 1.0, -1.0), 0.0)
    u_lo = ScalarField(g, np.where(mask_lo, 1.0, -1.0), 0.0)
    for _ in range(20):
        u_hi = step(u_hi, p)
        u_lo = step(u_lo, p)
    assert np.max(u_lo.values - u_hi.values) <= 1e-14


def test_evolve_records_requested_snapshots(small_circle_u0):
    p = ACParams(epsilon=0.1, snapshot_times=[1e-4, 5e-4], t_end=5e-4)
    sol = evolve(small_circle_u0, p)
    assert sol.requested_times == (1e-4, 5e-4)
    assert len(sol.snapshots) == 2
    for t_req, snap in zip(sol.requested_times, sol.snapshots):
        assert abs(snap.time - t_req) <= sol.dt
    assert sol.snapshot_at(1e-4) is sol.snapshots[0]


def test_evolve_keeps_sup_bound(small_circle_u0):
    p = ACParams(epsilon=0.1, snapshot_times=[2e-3], t_end=2e-3)
    sol = evolve(small_circle_u0, p)
    rep = verify_solution_bounds(sol)
    assert rep.ok
    for snap in sol.snapshots:
        assert np.max(np.abs(snap.values)) <= 1.0 + 1e-9


def test_gradient_cap_shape(small_circle_u0):
    # cap 3(1/sqrt(t) + sqrt(t)/eps^2) is loosest at t = eps^2
    eps = 0.1
    p = ACParams(epsilon=eps, snapshot_times=[eps ** 2], t_end=eps ** 2)
    sol = evolve(small_circle_u0, p)
    rep = verify_solution_bounds(sol)
    row = rep.rows[-1]
    t = sol.snapshot_at(eps ** 2).time
    assert row.grad_cap == pytest.approx(
        3.0 * (1.0 / math.sqrt(t) + math.sqrt(t) / eps ** 2))
    assert row.grad_max <= row.grad_cap


def test_blowup_data_aborts(small_circle_u0):
    # amplitude far outside the phase range makes the explicit reaction
    # overshoot and the run must refuse to continue, not return garbage
    g = small_circle_u0.grid
    u0 = ScalarField(g, 25.0 * small_circle_u0.values, 0.0)
    p = ACParams(epsilon=0.1, snapshot_times=[2e-4], t_end=2e-4)
    with pytest.raises(NumericalAbort):
        evolve(u0, p)


def test_oversized_custom_dt_rejected(small_circle_u0):
    # dt above the stability line must never return a silent wrong answer
    g = small_circle_u0.grid
    dt_bad = 40.0 * stable_dt(g, 0.1)
    p = ACParams(epsilon=0.1, dt=dt_bad, snapshot_times=[0.01], t_end=0.01)
    with pytest.raises(ValueError):
        evolve(small_circle_u0, p)


def test_under_resolved_interface_rejected(small_circle_u0):
    p = ACParams(epsilon=0.01, snapshot_times=[1e-4], t_end=1e-4)
    with pytest.raises(ValueError):
        evolve(small_circle_u0, p)


def test_schemes_agree_on_smooth_data():
    g = Grid.square(64, -1.0, 1.0)
    x, y = g.meshgrid()
    eps = 0.2
    u0 = ScalarField(g, np.tanh((0.4 - np.hypot(x, y)) / eps), 0.0)
    t_end = 4e-3
    explicit = evolve(u0, ACParams(epsilon=eps, snapshot_times=[t_end],
                                   t_end=t_end))
    imex = evolve(u0, ACParams(epsilon=eps, scheme="semi-implicit",
                               snapshot_times=[t_end], t_end=t_end))
    a = explicit.snapshot_at(t_end).values
    b = imex.snapshot_at(t_end).values
    assert np.max(np.abs(a - b)) < 0.05


