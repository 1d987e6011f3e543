"""Energy density, discrepancy, scaling fits, Gaussian density probe."""
from __future__ import annotations

import math

import numpy as np
import pytest

from fattenlab.ac import ACParams, ACSolution, evolve
from fattenlab.energy import (SIGMA, DensityProbe, energy_and_discrepancy,
                              energy_rows, gaussian_density,
                              interface_length_ratio, total_energy_series)
from fattenlab.geometry import Circle, leaf_initial_data, signed_distance
from fattenlab.grid import Grid, ScalarField, integrate


def test_surface_tension_oracle():
    # sigma = integral of the standing profile's energy density: the
    # profile tanh(z) gives sech^4(z) whose integral over the line is 4/3
    z = np.linspace(-20.0, 20.0, 400001)
    val = np.trapezoid(1.0 / np.cosh(z) ** 4, z)
    assert val == pytest.approx(4.0 / 3.0, abs=1e-10)
    assert SIGMA == 4.0 / 3.0


def _line_field(points: int, eps: float, time: float = 0.0):
    g = Grid.square(points, -1.0, 1.0)
    _, y = g.meshgrid()
    return g, ScalarField(g, np.tanh(y / eps), time)


def test_standing_line_energy_per_length():
    # interior energy of one straight interface = sigma * cut length;
    # the mismatched far-field wall rows are excluded
    eps = 0.05
    g, u = _line_field(256, eps)
    e, _ = energy_and_discrepancy(u, eps)
    trim = 4
    interior_sum = float(np.sum(e.values[trim:-trim, trim:-trim])) * g.h ** 2
    cut_length = g.box_length - 2 * trim * g.h
    assert interior_sum == pytest.approx(SIGMA * cut_length, rel=5e-3)


def test_standing_line_discrepancy_small_in_interior():
    # kinetic and potential parts of the exact profile agree pointwise;
    # only the mismatched far-field wall rows break the balance
    eps = 0.05
    g, u = _line_field(256, eps)
    _, xi = energy_and_discrepancy(u, eps)
    interior = xi.values[4:-4, 4:-4]
    assert np.max(np.abs(interior)) <= 1e-2 / eps


def test_energy_rows_and_series_on_circle(small_circle):
    u0 = leaf_initial_data(small_circle, 0.0)
    eps = 0.1
    snaps = [4e-4, 8e-4, 1.6e-3, 3.2e-3, 6.4e-3, 1e-2]
    sol = evolve(u0, ACParams(epsilon=eps, snapshot_times=snaps, t_end=1e-2))
    rows = energy_rows(sol)
    for r, t_req in zip(rows, snaps):
        assert abs(r.time - t_req) <= sol.dt
    for r in rows:
        assert r.total == pytest.approx(r.kinetic + r.potential, rel=1e-12)
        assert r.xi_plus >= 0.0
    rep = total_energy_series(sol)
    assert rep.monotone_ok
    assert rep.fit_count >= 4
    assert rep.fit_window[1] <= eps ** 2
    # sharp data relaxing toward the profile decays with a clear exponent
    assert -1.0 < rep.fit_exponent < -0.1
    assert rep.bounded_ratio < 2.0


def test_energy_series_needs_enough_snapshots(small_circle):
    u0 = leaf_initial_data(small_circle, 0.0)
    sol = evolve(u0, ACParams(epsilon=0.1, snapshot_times=[2e-3, 4e-3],
                              t_end=4e-3))
    with pytest.raises(ValueError):
        total_energy_series(sol)


def test_interface_length_ratio_circle(small_circle):
    u0 = leaf_initial_data(small_circle, 0.0)
    eps = 0.1
    sol = evolve(u0, ACParams(epsilon=eps, snapshot_times=[2 * eps ** 2],
                              t_end=2 * eps ** 2))
    ratio = interface_length_ratio(sol.snapshot_at(2 * eps ** 2), eps)
    assert ratio == pytest.approx(1.0, abs=0.05)


def _static_solution(u: ScalarField, eps: float) -> ACSolution:
    p = ACParams(epsilon=eps, snapshot_times=[u.time], t_end=u.time)
    return ACSolution(p, u.grid, 1e-5, 0, [u], (u.time,), 1.0)


def test_gaussian_density_single_line():
    eps = 0.02
    g, u = _line_field(512, eps, time=0.05)
    sol = _static_solution(u, eps)
    r = 0.2
    probe = gaussian_density(sol, (0.0, 0.0), 0.05 + r * r, r)
    assert isinstance(probe, DensityProbe)
    assert probe.theta == pytest.approx(1.0, abs=0.05)


def test_gaussian_density_distant_interface_is_invisible():
    eps = 0.02
    g = Grid.square(512, -1.0, 1.0)
    _, y = g.meshgrid()
    u = ScalarField(g, np.tanh((y - 0.8) / eps), 0.05)
    sol = _static_solution(u, eps)
    r = 0.08
    probe = gaussian_density(sol, (0.0, 0.0), 0.05 + r * r, r)
    assert probe.theta < 1e-6


def test_gaussian_density_requires_scale_below_time():
    eps = 0.02
    g, u = _line_field(512, eps, time=0.05)
    sol = _static_solution(u, eps)
    with pytest.raises(ValueError):
        gaussian_density(sol, (0.0, 0.0), 0.03, 0.2)  # r^2 > t0
    with pytest.raises(ValueError):
        gaussian_density(sol, (0.0, 0.0), 0.05, -0.1)
