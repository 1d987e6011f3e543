"""Smoothed distance and comparison-profile checks at unit scale."""
from __future__ import annotations

import math

import numpy as np
import pytest

from fattenlab.ac import ACParams, evolve
from fattenlab.barriers import (CALORIC_REL_TOL, barrier_chain_gap,
                                eval_barrier_profiles, smoothed_distance,
                                smoothed_properties, verify_gradient_barrier,
                                verify_residual_signs, verify_solution_barrier)
from fattenlab.geometry import Circle, leaf_initial_data, signed_distance
from fattenlab.grid import Grid


@pytest.fixture(scope="module")
def sd(small_circle):
    return smoothed_distance(small_circle, [1e-2, 2e-2])


def test_smoothed_distance_slices(sd):
    assert sd.times() == [1e-2, 2e-2]
    for t in sd.times():
        sl = sd.slices[t]
        assert sl.values.shape == sd.grid.shape
        assert sl.ddt.shape == sd.grid.shape
        assert np.isfinite(sl.values).all()


def test_smoothed_properties_hold_when_resolved(sd):
    rep = smoothed_properties(sd)
    assert rep.ok
    for r in rep.rows:
        assert r.grad_max <= 1.0 + 3.0 * sd.grid.h
        assert r.dist_max <= math.sqrt(2.0 * sd.grid.dim * r.time)
        assert r.caloric_max <= r.caloric_budget
    # data on the smooth benchmark supports the tighter tracking constant
    assert rep.supported_constant() == "sqrt(dim t)"


def test_caloric_error_shrinks_with_time(small_circle):
    # second differences of the smoothing amplify grid error like
    # h^2 (2t)^{-3/2}: doubling t must cut the defect substantially
    sd2 = smoothed_distance(small_circle, [2.5e-3, 1e-2])
    rows = smoothed_properties(sd2).rows
    assert rows[1].caloric_max < 0.5 * rows[0].caloric_max


def test_residual_signs_zero_violations_on_enforced_rows(small_circle):
    sd2 = smoothed_distance(small_circle, [2.5e-3, 5e-3])
    reports = verify_residual_signs(sd2, 0.1)
    enforced = [r for r in reports if r.gated]
    informational = [r for r in reports if not r.gated]
    assert enforced and informational
    for r in enforced:
        assert r.violations == 0
    # the eps-profile regions are never vacuous on this benchmark
    eps_rows = [r for r in enforced if r.label.startswith("profile_eps")]
    assert all(r.region_nodes > 0 for r in eps_rows)


def test_barrier_profiles_shapes_and_shift(sd):
    prof = eval_barrier_profiles(sd, 0.1, 1e-2)
    assert prof.shift == pytest.approx(4.0 * math.sqrt(2.0))
    for f in (prof.tanh_eps, prof.tanh_selfsim, prof.gaussian_cap):
        assert f.values.shape == sd.grid.shape
    assert np.max(np.abs(prof.tanh_eps.values)) <= 1.0
    assert np.min(prof.gaussian_cap.values) >= 0.0


def test_chain_gap_is_nonpositive(sd):
    # tanh(d/rt - 5 c) must sit below tanh(dh/rt - 4 c) wherever both live
    for t in sd.times():
        assert barrier_chain_gap(sd, t) <= 1e-12


@pytest.fixture(scope="module")
def early_run(small_circle):
    u0 = leaf_initial_data(small_circle, 0.0)
    p = ACParams(epsilon=0.1, snapshot_times=[2.5e-4, 5e-4], t_end=5e-4)
    return evolve(u0, p)


def test_solution_barrier_zero_violations(early_run, small_circle):
    rep = verify_solution_barrier(early_run, small_circle)
    assert rep.ok
    assert all(r.violations == 0 for r in rep.rows)
    # both tail regions are populated at these early times
    assert all(r.region_nodes > 0 for r in rep.rows)
    labels = {r.label for r in rep.rows}
    assert labels == {"solution_lower", "solution_upper"}


def test_gradient_barrier_fitted_constant_below_reference(early_run,
                                                          small_circle):
    rep = verify_gradient_barrier(early_run, small_circle)
    assert rep.ok
    assert all(r.region_nodes > 0 for r in rep.rows)
    assert rep.fitted_constant < rep.reference_constant
    # reference follows the envelope constant 2 exp(25 dim / 2 - dim / 2)
    assert rep.reference_constant == pytest.approx(
        2.0 * math.exp(25.0 * 2.0 / 2.0 - 2.0 / 2.0), rel=1e-12)


def test_barrier_report_text_round(early_run, small_circle):
    rep = verify_solution_barrier(early_run, small_circle)
    text = rep.to_text()
    assert text.startswith("columns: label t nodes violations worst tol")
    assert text.rstrip().endswith("ok = 1")
