"""Level-set curvature flow reference, fattening detection, envelopes.

Evolving Phi by  d/dt Phi = lap Phi - Phi_i Phi_j Phi_ij / (|grad Phi|^2 + beta)
moves every level set of Phi by its curvature at once, which is the
standard grid realization of the weak set flow.  Started from the signed
distance of a curve it provides the reference evolution that the
reaction-diffusion nodal sets are checked against: a nodal contour must
stay between the zero sets of two flows started from d + delta and
d - delta (the offset-leaf sandwich).

Fattening, the development of an open region where Phi is near zero, is
detected by area excess: the measure of {|Phi| < band} minus the
2 * band * perimeter a tubular shell of a simple curve would occupy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .grid import Grid, ScalarField, sample_many
from .geometry import SignedDistanceField, Contour, contour_extract
from .ac import NumericalAbort

BETA_RANGE = (1e-8, 1e-4)
# the centered cross-derivative stencil is not monotone; collapsing
# skeleton cones overshoot the sup norm by a few h^2, so the
# non-expansion check carries slack on that scale instead of
# rounding-only slack
SUP_SLACK_REL = 1e-3
SUP_SLACK_CELLS = 12.0


def lsf_stable_dt(grid: Grid) -> float:
    return grid.h ** 2 / (8.0 * grid.dim)


@dataclass
class LSFSolution:
    grid: Grid
    beta: float
    dt: float
    steps: int
    snapshots: list[ScalarField] = dc_field(default_factory=list)
    requested_times: tuple[float, ...] = ()
    initial_sup: float = 0.0
    band_grad_mean: list[float] = dc_field(default_factory=list)

    def snapshot_at(self, t: float) -> ScalarField:
        if not self.snapshots:
            raise ValueError("no snapshots recorded")
        k = int(np.argmin([abs(s.time - t) for s in self.snapshots]))
        return self.snapshots[k]


def _band_grad_mean(grid: Grid, phi: np.ndarray, band: float) -> float:
    h = grid.h
    pad = np.pad(phi, 1, mode="edge")
    px = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2.0 * h)
    py = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2.0 * h)
    mag = np.sqrt(px * px + py * py)
    mask = np.abs(phi) < band
    if not mask.any():
        return float("nan")
    return float(np.mean(mag[mask]))


def lsf_evolve(phi0: ScalarField, t_end: float, snapshot_times=(),
               beta: float = 1e-6, dt: float | None = None) -> LSFSolution:
    """Explicit curvature flow of all level sets of phi0 up to t_end.

    Ghost nodes copy the boundary value, so the clamped far-field
    plateau of a signed distance stays put.  The mean of |grad Phi| over
    the shell |Phi| < 6h is recorded per snapshot; values drifting out
    of [0.5, 2] mean the distance-like calibration of Phi is degrading
    and level-to-distance conversions are no longer trustworthy.
    """
    grid = phi0.grid
    if grid.dim != 2:
        raise ValueError("level-set reference flow is 2-D only")
    if not (BETA_RANGE[0] <= beta <= BETA_RANGE[1]):
        raise ValueError(f"beta must be in [{BETA_RANGE[0]:g}, "
                         f"{BETA_RANGE[1]:g}]")
    cap = lsf_stable_dt(grid)
    if dt is None:
        dt = cap
    elif dt <= 0 or dt > cap * (1.0 + 1e-12):
        raise ValueError(f"dt must be in (0, {cap:g}]")
    h = grid.h
    n_steps = max(1, int(round(t_end / dt)))
    wanted = sorted(set(float(t) for t in snapshot_times))
    by_step: dict[int, float] = {}
    for t in wanted:
        if t < 0 or t > t_end * (1.0 + 1e-9):
            raise ValueError(f"snapshot time {t:g} outside [0, t_end]")
        by_step.setdefault(min(n_steps, int(round(t / dt))), t)

    sol = LSFSolution(grid, beta, dt, n_steps,
                      requested_times=tuple(wanted),
                      initial_sup=float(np.max(np.abs(phi0.values))))
    band = 6.0 * h

    def capture(step: int, phi: np.ndarray):
        if not np.isfinite(phi).all():
            raise NumericalAbort(f"non-finite level-set field at step {step}")
        sup = float(np.max(np.abs(phi)))
        slack = max(SUP_SLACK_REL * sol.initial_sup,
                    SUP_SLACK_CELLS * h * h)
        if sup > sol.initial_sup + slack + 1e-12:
            raise NumericalAbort(
                f"level-set sup norm expanded at step {step}: "
                f"{sup!r} > {sol.initial_sup!r}")
        sol.snapshots.append(ScalarField(grid, phi.copy(), step * dt))
        sol.band_grad_mean.append(_band_grad_mean(grid, phi, band))

    phi = phi0.values.copy()
    if 0 in by_step:
        capture(0, phi)
    h2 = h * h
    for step in range(1, n_steps + 1):
        pad = np.pad(phi, 1, mode="edge")
        c = pad[1:-1, 1:-1]
        px = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / (2.0 * h)
        py = (pad[1:-1, 2:] - pad[1:-1, :-2]) / (2.0 * h)
        pxx = (pad[2:, 1:-1] - 2.0 * c + pad[:-2, 1:-1]) / h2
        pyy = (pad[1:-1, 2:] - 2.0 * c + pad[1:-1, :-2]) / h2
        pxy = (pad[2:, 2:] + pad[:-2, :-2] - pad[2:, :-2]
               - pad[:-2, 2:]) / (4.0 * h2)
        normal_part = (px * px * pxx + 2.0 * px * py * pxy
                       + py * py * pyy) / (px * px + py * py + beta)
        phi = phi + dt * (pxx + pyy - normal_part)
        if step in by_step:
            capture(step, phi)
    if not sol.snapshots:
        capture(n_steps, phi)
    return sol


@dataclass
class FatteningRow:
    time: float
    perimeter: float
    band_area: float
    expected_area: float
    excess: float
    threshold: float

    @property
    def fattened(self) -> bool:
        return self.excess > self.threshold


@dataclass
class FatteningReport:
    band: float
    rows: list[FatteningRow]
    t_fat: float | None

    def to_text(self) -> str:
        lines = ["band = " + format(self.band, ".17g"),
                 "columns: t perimeter band_area expected excess threshold "
                 "fattened"]
        for r in self.rows:
            lines.append(" ".join(format(x, ".17g") for x in
                                  [r.time, r.perimeter, r.band_area,
                                   r.expected_area, r.excess, r.threshold])
                         + f" {int(r.fattened)}")
        lines.append("t_fat = " + ("none" if self.t_fat is None
                                   else format(self.t_fat, ".17g")))
        return "\n".join(lines) + "\n"


def fattening_series(sol: LSFSolution, band: float) -> FatteningReport:
    """Band-excess fattening indicator over all snapshots.

    excess = area{|Phi| < band} - 2 * band * perimeter; a simple curve
    contributes only its tubular shell, a fattened region keeps the
    whole opening.  t_fat is the first snapshot with excess above
    4h * perimeter.
    """
    grid = sol.grid
    h = grid.h
    if band < h:
        raise ValueError("band must be at least one cell wide")
    rows = []
    t_fat = None
    for snap in sol.snapshots:
        contour = contour_extract(snap, 0.0)
        perim = contour.total_length()
        area = float(np.count_nonzero(np.abs(snap.values) < band)) * h * h
        expected = 2.0 * band * perim
        excess = area - expected
        threshold = 4.0 * h * perim
        rows.append(FatteningRow(snap.time, perim, area, expected, excess,
                                 threshold))
        if t_fat is None and perim > 0 and excess > threshold:
            t_fat = snap.time
    return FatteningReport(band, rows, t_fat)


@dataclass
class EnvelopePair:
    """Zero-set flows of d + delta and d - delta bracketing the nodal set.

    enlarged: run whose zero set starts on the outward offset {d = -delta}
    (the bigger enclosed region); shrunk: starts on the inward offset
    {d = +delta}.  By comparison the fields stay ordered, so the regions
    stay nested.
    """
    delta: float
    enlarged: LSFSolution
    shrunk: LSFSolution

    def ordering_violation(self) -> float:
        """Worst pointwise amount by which the fields cross; <= ~1e-10.

        The runs start 2 delta apart, so shrunk <= enlarged everywhere
        is the comparison-principle invariant; positive means crossed.
        """
        worst = -math.inf
        for a, b in zip(self.enlarged.snapshots, self.shrunk.snapshots):
            worst = max(worst, float(np.max(b.values - a.values)))
        return worst

    def contours(self, t: float) -> tuple[Contour, Contour]:
        return (contour_extract(self.enlarged.snapshot_at(t), 0.0),
                contour_extract(self.shrunk.snapshot_at(t), 0.0))


def inner_outer_envelopes(sdf: SignedDistanceField, delta: float, t_list,
                          beta: float = 1e-6) -> EnvelopePair:
    if delta <= 0 or delta >= sdf.d_max:
        raise ValueError("offset delta must be in (0, d_max)")
    t_end = max(float(t) for t in t_list)
    grid = sdf.grid
    runs = []
    for sign in (+1.0, -1.0):
        phi0 = ScalarField(grid, sdf.values + sign * delta, 0.0)
        runs.append(lsf_evolve(phi0, t_end, t_list, beta=beta))
    return EnvelopePair(delta, runs[0], runs[1])


@dataclass
class SandwichRow:
    label: str
    time: float
    points: int
    outside_enlarged: float     # worst distance past the enlarged zero set
    inside_shrunk: float        # worst distance past the shrunk zero set
    tolerance: float

    @property
    def ok(self) -> bool:
        return (self.outside_enlarged <= self.tolerance
                and self.inside_shrunk <= self.tolerance)


@dataclass
class SandwichReport:
    rows: list[SandwichRow]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_text(self) -> str:
        lines = ["columns: label t points outside_enlarged inside_shrunk "
                 "tol ok"]
        for r in self.rows:
            lines.append(" ".join([
                r.label, format(r.time, ".17g"), str(r.points),
                format(r.outside_enlarged, ".17g"),
                format(r.inside_shrunk, ".17g"),
                format(r.tolerance, ".17g"), str(int(r.ok))]))
        lines.append("ok = " + ("1" if self.ok else "0"))
        return "\n".join(lines) + "\n"


def sandwich_check(nodal: Contour, env: EnvelopePair, t: float,
                   tolerance: float, label: str = "nodal") -> SandwichRow:
    """One-sided containment of a nodal contour between the envelopes.

    A nodal point sampling negative in the enlarged-region field has
    left the outer bracket; one sampling positive in the shrunk-region
    field has entered the inner bracket.  Either way the overshoot is
    measured as distance to that envelope's zero contour and must stay
    within the tolerance (2h of the nodal contour's grid).
    """
    pts = nodal.all_points(step=tolerance / 4.0)
    if pts.size == 0:
        raise ValueError("empty nodal contour")
    phi_enl = env.enlarged.snapshot_at(t)
    phi_shr = env.shrunk.snapshot_at(t)
    c_enl, c_shr = env.contours(t)
    worst_out = 0.0
    worst_in = 0.0
    v_enl = sample_many(phi_enl, pts)
    v_shr = sample_many(phi_shr, pts)
    out_pts = pts[v_enl < 0.0]
    if out_pts.size:
        ref = c_enl.all_points(step=tolerance / 4.0)
        if ref.size:
            d, _ = cKDTree(ref).query(out_pts)
            worst_out = float(np.max(d))
        else:
            worst_out = math.inf
    in_pts = pts[v_shr > 0.0]
    if in_pts.size:
        ref = c_shr.all_points(step=tolerance / 4.0)
        if ref.size:
            d, _ = cKDTree(ref).query(in_pts)
            worst_in = float(np.max(d))
        else:
            # the inner bracket has vanished entirely; nothing to cross
            worst_in = 0.0
    return SandwichRow(label, t, int(pts.shape[0]), worst_out, worst_in,
                       tolerance)
