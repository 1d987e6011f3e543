"""Leaf shooting: bisection over the foliation of a tubular neighborhood.

The offset leaves {d = s}, s in [-eta, +eta], foliate a tube around the
base curve.  Evolving indicator data for each leaf gives a family of
solutions that is pointwise non-increasing in s (comparison principle,
exact for the explicit monotone scheme).  The value u_s(x0, t0) at a
fixed probe point therefore decreases from near +1 (leaf far inside,
probe engulfed by the +1 phase) to near -1, and bisection finds the
leaf whose solution vanishes at the probe: an interface conditioned to
pass through a chosen spacetime point, the seed of the interior-flow
construction.

Because the leaf data is a node-wise indicator, value(s) is a fine
monotone staircase, not a continuum; the bisection treats a bracket
whose endpoint values both sit inside the tolerance as a genuine
interval of solutions (the non-uniqueness the construction allows) and
reports it instead of grinding the bracket down.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid, ScalarField, sample
from .geometry import (SignedDistanceField, signed_distance, leaf_initial_data,
                       Contour, contour_extract, hausdorff_distance)
from .ac import ACParams, evolve
from .energy import energy_and_discrepancy, SIGMA

ENDPOINT_MARGIN = 0.25          # endpoint values must clear 1 - this
MAX_TURN_RAD = 2.5


@dataclass(frozen=True)
class FoliationSpec:
    shape: object
    eta: float
    kappa: float = ENDPOINT_MARGIN

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0 < self.kappa < 0.5:
            raise ValueError("kappa must be in (0, 1/2)")


def _spaced_vertices(pts: np.ndarray, closed: bool,
                     spacing: float) -> np.ndarray:
    """Vertices picked at arclength multiples of spacing along a polyline."""
    if closed and len(pts) > 1:
        pts = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    if total <= spacing:
        return pts[:1]
    n = int(total / spacing)
    targets = np.arange(n + 1) * spacing
    out = np.empty((len(targets), pts.shape[1]))
    for ax in range(pts.shape[1]):
        out[:, ax] = np.interp(targets, arc, pts[:, ax])
    return out


def leaf_turning(sdf: SignedDistanceField, s: float) -> float:
    """Largest bend angle along the contour of {d = s}, at 2h spacing.

    A smoothness proxy for the end leaves: offsets of a tangent-circle
    pair stay below ~1.7 rad at their convex corners, while a leaf
    grazing the clamp plateau or pinching off turns by nearly pi.
    """
    contour = contour_extract(sdf.field, s)
    h = sdf.grid.h
    worst = 0.0
    for line in contour.lines:
        pts = _spaced_vertices(line.points, line.closed, 2.0 * h)
        if pts.shape[0] < 3:
            continue
        seg = np.diff(pts, axis=0)
        if line.closed:
            seg = np.vstack([seg, pts[1] - pts[0]])
        norms = np.linalg.norm(seg, axis=1)
        keep = norms > 1e-12
        seg = seg[keep] / norms[keep][:, None]
        dots = np.clip(np.sum(seg[:-1] * seg[1:], axis=1), -1.0, 1.0)
        if dots.size:
            worst = max(worst, float(np.max(np.arccos(dots))))
    return worst


class LeafCache:
    """Thread-safe store of evolved leaf snapshots keyed by parameters.

    Distance fields are keyed by object identity and pinned by a strong
    reference, so the key stays valid for the cache's lifetime.  Two
    threads racing on one key both compute the same deterministic field;
    last write wins harmlessly.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}
        self._pins: dict[int, SignedDistanceField] = {}

    def get_or_run(self, sdf: SignedDistanceField, s: float, eps: float,
                   t0: float) -> ScalarField:
        with self._lock:
            self._pins.setdefault(id(sdf), sdf)
            key = (float(s), float(eps), float(t0), sdf.grid.key(), id(sdf))
            hit = self._data.get(key)
        if hit is not None:
            return hit
        u0 = leaf_initial_data(sdf, s)
        p = ACParams(epsilon=eps, scheme="explicit", snapshot_times=[t0],
                     t_end=t0)
        snap = evolve(u0, p).snapshot_at(t0)
        with self._lock:
            self._data.setdefault(key, snap)
        return snap


def family_value_at(sdf: SignedDistanceField, spec: FoliationSpec, s: float,
                    eps: float, x0, t0: float,
                    cache: LeafCache | None = None) -> float:
    """u_s at (x0, t0) for the leaf {d = s}; |s| <= eta."""
    if abs(s) > spec.eta + 1e-12:
        raise ValueError("leaf parameter outside the foliation range")
    cache = cache if cache is not None else LeafCache()
    return sample(cache.get_or_run(sdf, s, eps, t0), x0)


@dataclass
class MonotonePair:
    s_low: float
    s_high: float
    time: float
    worst: float                # max of u_high - u_low; <= tol when ordered


@dataclass
class MonotoneReport:
    tolerance: float
    pairs: list[MonotonePair]

    @property
    def worst(self) -> float:
        return max((p.worst for p in self.pairs), default=-math.inf)

    @property
    def ok(self) -> bool:
        return self.worst <= self.tolerance

    def to_text(self) -> str:
        lines = ["columns: s_low s_high t worst"]
        for p in self.pairs:
            lines.append(" ".join(format(x, ".17g") for x in
                                  [p.s_low, p.s_high, p.time, p.worst]))
        lines.append("tolerance = " + format(self.tolerance, ".17g"))
        lines.append("ok = " + ("1" if self.ok else "0"))
        return "\n".join(lines) + "\n"


def check_monotone_in_s(sdf: SignedDistanceField, spec: FoliationSpec,
                        eps: float, s_list, t_list,
                        tolerance: float = 1e-12) -> MonotoneReport:
    """Pointwise ordering of full snapshots for consecutive leaf pairs.

    Larger s means a leaf deeper inside, a smaller +1 region, and so a
    pointwise smaller solution; violations beyond rounding would break
    the discrete comparison principle the whole construction rests on.
    """
    ss = [float(s) for s in s_list]
    if ss != sorted(ss):
        raise ValueError("s_list must be sorted ascending")
    ts = sorted(float(t) for t in t_list)
    fields: dict[float, list[ScalarField]] = {}
    for s in ss:
        u0 = leaf_initial_data(sdf, s)
        p = ACParams(epsilon=eps, scheme="explicit", snapshot_times=ts,
                     t_end=max(ts))
        sol = evolve(u0, p)
        fields[s] = [sol.snapshot_at(t) for t in ts]
    pairs = []
    for lo, hi in zip(ss[:-1], ss[1:]):
        for a, b in zip(fields[lo], fields[hi]):
            pairs.append(MonotonePair(
                lo, hi, a.time, float(np.max(b.values - a.values))))
    return MonotoneReport(tolerance, pairs)


@dataclass
class ShootingResult:
    epsilon: float
    x0: tuple[float, ...]
    t0: float
    s_star: float
    residual: float
    shoot_tol: float
    iterations: int
    bracket: list[tuple[float, float]] = dc_field(default_factory=list)
    flat_interval: tuple[float, float] | None = None

    def to_text(self) -> str:
        lines = ["epsilon = " + format(self.epsilon, ".17g"),
                 "x0 = " + " ".join(format(c, ".17g") for c in self.x0),
                 "t0 = " + format(self.t0, ".17g"),
                 "s_star = " + format(self.s_star, ".17g"),
                 "residual = " + format(self.residual, ".17g"),
                 "shoot_tol = " + format(self.shoot_tol, ".17g"),
                 "iterations = " + str(self.iterations),
                 "flat_interval = " + (
                     "none" if self.flat_interval is None else
                     format(self.flat_interval[0], ".17g") + " "
                     + format(self.flat_interval[1], ".17g")),
                 "columns: s value"]
        for s, v in self.bracket:
            lines.append(format(s, ".17g") + " " + format(v, ".17g"))
        return "\n".join(lines) + "\n"


def bisect_leaf(sdf: SignedDistanceField, spec: FoliationSpec, eps: float,
                x0, t0: float, shoot_tol: float = 1e-3,
                cache: LeafCache | None = None) -> ShootingResult:
    """Find the leaf whose solution vanishes at (x0, t0).

    Precondition: the end leaves bracket the probe decisively, value at
    -eta above 1 - kappa and at +eta below kappa - 1.  Bisection then
    rides the monotone staircase until the value is inside shoot_tol or
    the bracket is below h/4, recording every evaluation.  On a hit the
    neighborhood is scanned in h/4 steps: if adjacent leaves also sit
    inside shoot_tol, the whole near-zero stretch is reported as a flat
    interval (an interval of admissible leaves, not a point) and its
    midpoint returned.
    """
    cache = cache if cache is not None else LeafCache()
    eta, kappa = spec.eta, spec.kappa
    h = sdf.grid.h

    def value(s: float) -> float:
        return family_value_at(sdf, spec, s, eps, x0, t0, cache)

    history: list[tuple[float, float]] = []
    a, b = -eta, eta
    va = value(a)
    history.append((a, va))
    vb = value(b)
    history.append((b, vb))
    if va < 1.0 - kappa or vb > kappa - 1.0:
        raise ValueError("eps too large or t0 outside fattening window")

    flat = None
    while True:
        mid = 0.5 * (a + b)
        v = value(mid)
        history.append((mid, v))
        if abs(v) <= shoot_tol:
            s_star, residual = mid, abs(v)
            lo = hi = mid
            step = 0.25 * h
            for _ in range(32):
                if lo - step < a:
                    break
                vv = value(lo - step)
                history.append((lo - step, vv))
                if abs(vv) > shoot_tol:
                    break
                lo -= step
            for _ in range(32):
                if hi + step > b:
                    break
                vv = value(hi + step)
                history.append((hi + step, vv))
                if abs(vv) > shoot_tol:
                    break
                hi += step
            if hi > lo:
                flat = (lo, hi)
                s_star = 0.5 * (lo + hi)
                v_mid = value(s_star)
                history.append((s_star, v_mid))
                residual = abs(v_mid)
            break
        if b - a <= 0.25 * h:
            s_star, residual = mid, abs(v)
            break
        if v > 0.0:
            a, va = mid, v
        else:
            b, vb = mid, v
    return ShootingResult(eps, tuple(float(c) for c in x0), float(t0),
                          float(s_star), float(residual), shoot_tol,
                          len(history), history, flat)


@dataclass
class StudyEntry:
    epsilon: float
    grid: Grid
    result: ShootingResult
    nodal: Contour
    nodal_origin_distance: float
    local_mass: float
    local_mass_floor: float
    field: ScalarField
    symmetry_dev: float | None = None
    multiplicity: "MultiplicityReport | None" = None


@dataclass
class DiagonalStudy:
    x0: tuple[float, ...]
    t0: float
    rho_loc: float
    entries: list[StudyEntry] = dc_field(default_factory=list)
    hausdorff: list[float] = dc_field(default_factory=list)
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None and all(
            e.result.residual <= e.result.shoot_tol
            and e.nodal_origin_distance <= 2.0 * e.grid.h
            and e.local_mass >= e.local_mass_floor
            for e in self.entries)


def _contour_point_distance(contour: Contour, p, step: float) -> float:
    pts = contour.all_points(step=step)
    if pts.size == 0:
        return math.inf
    return float(np.min(np.linalg.norm(pts - np.asarray(p), axis=1)))


def _study_one(spec: FoliationSpec, eps: float, grid: Grid, x0, t0: float,
               shoot_tol: float, rho: float, symmetry_group: str | None,
               transversal, eikonal_gate: float | None = None):
    sdf = (signed_distance(spec.shape, grid) if eikonal_gate is None
           else signed_distance(spec.shape, grid,
                                min_eikonal_fraction=eikonal_gate))
    cache = LeafCache()
    res = bisect_leaf(sdf, spec, eps, x0, t0, shoot_tol, cache)
    u_star = cache.get_or_run(sdf, res.s_star, eps, t0)
    nodal = contour_extract(u_star, 0.0)
    dist0 = _contour_point_distance(nodal, x0, step=grid.h)
    e, _ = energy_and_discrepancy(u_star, eps)
    r2 = np.zeros(grid.shape)
    for ax, xs in enumerate(grid.meshgrid()):
        r2 += (xs - x0[ax]) ** 2
    mass = float(np.sum(e.values[r2 <= rho * rho])) * grid.h ** grid.dim
    sym = (symmetry_deviation(u_star, symmetry_group)
           if symmetry_group else None)
    mult = (multiplicity_probe(u_star, eps, transversal[:2], transversal[2:])
            if transversal is not None else None)
    return StudyEntry(eps, grid, res, nodal, dist0, mass, SIGMA * rho,
                      u_star, sym, mult)


def diagonal_study(spec: FoliationSpec, grids: list[tuple[float, Grid]],
                   x0, t0: float, shoot_tol: float = 1e-3,
                   threads: int = 1, symmetry_group: str | None = None,
                   transversal=None,
                   eikonal_gate: float | None = None) -> DiagonalStudy:
    """Shoot at (x0, t0) along decreasing eps, each on its own grid.

    Per eps: bisection, the nodal contour of the selected solution, its
    distance to the probe point, and the energy mass in the ball of
    radius rho_loc = 10 * min(eps) around the probe (a clearing-out
    proxy: an interface through the ball carries at least sigma * rho
    of energy).  Consecutive nodal contours are compared by symmetric
    Hausdorff distance.  A bisection failure stops the sweep; entries
    gathered so far stay in the study.

    threads > 1 runs the per-eps pipelines concurrently; results are
    assembled in eps order and a failure discards the later entries, so
    the study is identical to the sequential one.

    symmetry_group adds a per-eps deviation check of the selected field;
    transversal (x0, y0, x1, y1) adds a per-eps multiplicity probe.
    eikonal_gate relaxes the unit-gradient check of the per-eps signed
    distance (needed for fractal boundaries).
    """
    eps_list = [e for e, _ in grids]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    for eps, grid in grids:
        if eps < 4.0 * grid.h - 1e-12:
            raise ValueError(f"grid too coarse for eps={eps:g} "
                             f"(need eps >= 4h, h={grid.h:g})")
    if transversal is not None:
        transversal = [float(c) for c in transversal]
        if len(transversal) != 4:
            raise ValueError("transversal needs 4 numbers: x0 y0 x1 y1")
    rho = 10.0 * min(eps_list)
    study = DiagonalStudy(tuple(float(c) for c in x0), float(t0), rho)
    outcomes: list = []
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [pool.submit(_study_one, spec, eps, grid, x0, t0,
                                shoot_tol, rho, symmetry_group, transversal,
                                eikonal_gate)
                    for eps, grid in grids]
            for (eps, _), fut in zip(grids, futs):
                try:
                    outcomes.append(fut.result())
                except ValueError as err:
                    outcomes.append((eps, err))
    else:
        for eps, grid in grids:
            try:
                outcomes.append(_study_one(spec, eps, grid, x0, t0,
                                           shoot_tol, rho, symmetry_group,
                                           transversal, eikonal_gate))
            except ValueError as err:
                outcomes.append((eps, err))
                break
    for item in outcomes:
        if isinstance(item, StudyEntry):
            study.entries.append(item)
        else:
            study.failure = f"eps={item[0]:g}: {item[1]}"
            break
    for prev, cur in zip(study.entries[:-1], study.entries[1:]):
        step = min(prev.grid.h, cur.grid.h)
        if prev.nodal.lines and cur.nodal.lines:
            study.hausdorff.append(hausdorff_distance(prev.nodal, cur.nodal,
                                                      step))
        else:
            study.hausdorff.append(math.inf)
    return study


# ---------------------------------------------------------------------------
# symmetry and multiplicity diagnostics

_GROUP_OPS = {
    "reflection-x": [lambda v: v[::-1, :]],
    "reflection-y": [lambda v: v[:, ::-1]],
    "D2": [lambda v: v[::-1, :], lambda v: v[:, ::-1],
           lambda v: v[::-1, ::-1]],
    "D4": [lambda v: v[::-1, :], lambda v: v[:, ::-1],
           lambda v: v[::-1, ::-1], lambda v: v.T,
           lambda v: v.T[::-1, :], lambda v: v.T[:, ::-1],
           lambda v: v.T[::-1, ::-1]],
}


def symmetry_deviation(u: ScalarField, group: str) -> float:
    """Max nodewise |u - u o g| over the group's reflections/rotations.

    Requires a grid symmetric about the origin (cell-centered nodes map
    to nodes under the flips; D4 additionally swaps the axes).
    """
    if group not in _GROUP_OPS:
        raise ValueError(f"unknown symmetry group {group!r}")
    grid = u.grid
    if grid.dim != 2:
        raise ValueError("symmetry check is 2-D only")
    for ax in range(2):
        if abs(grid.extent_lo[ax] + grid.extent_hi[ax]) > 1e-12:
            raise ValueError("grid must be centered on the origin")
    if group == "D4" and abs(grid.extent_hi[0] - grid.extent_hi[1]) > 1e-12:
        raise ValueError("D4 needs a square extent")
    worst = 0.0
    for op in _GROUP_OPS[group]:
        worst = max(worst, float(np.max(np.abs(u.values - op(u.values)))))
    return worst


@dataclass
class WallCrossing:
    position: float             # arclength along the transversal
    sign_change: bool
    mass_over_sigma: float      # integrated excess energy / sigma

    @property
    def multiplicity(self) -> str:
        return "odd" if self.sign_change else "even"


@dataclass
class MultiplicityReport:
    walls: list[WallCrossing]
    sign_changes: int

    def to_text(self) -> str:
        lines = ["columns: position sign_change mass_over_sigma kind"]
        for w in self.walls:
            lines.append(" ".join([
                format(w.position, ".17g"), str(int(w.sign_change)),
                format(w.mass_over_sigma, ".17g"), w.multiplicity]))
        lines.append(f"walls = {len(self.walls)}")
        lines.append(f"sign_changes = {self.sign_changes}")
        return "\n".join(lines) + "\n"


def multiplicity_probe(u: ScalarField, eps: float, p0, p1,
                       samples: int = 400) -> MultiplicityReport:
    """Walls crossed by the segment p0 -> p1, with per-wall parity.

    A wall is a contiguous stretch where the energy density along the
    segment exceeds 0.15 / eps (the standing profile peaks at 1 / eps).
    A wall the phase changes sign across is an odd-multiplicity
    interface; an energy wall without a sign change can only be an even
    stack of layers.  mass_over_sigma integrates e along the segment
    over sigma: about the layer count of the wall.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0:
        raise ValueError("degenerate transversal")
    ts = np.linspace(0.0, 1.0, samples)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    e, _ = energy_and_discrepancy(u, eps)
    from .grid import sample_many
    e_line = sample_many(e, pts)
    u_line = sample_many(u, pts)
    ds = length / (samples - 1)
    thresh = 0.15 / eps
    above = e_line > thresh
    walls = []
    i = 0
    while i < samples:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < samples and above[j + 1]:
            j += 1
        lo = max(0, i - 1)
        hi = min(samples - 1, j + 1)
        sign_change = u_line[lo] * u_line[hi] < 0
        mass = float(np.sum(e_line[i:j + 1])) * ds / SIGMA
        walls.append(WallCrossing(0.5 * (ts[i] + ts[j]) * length,
                                  sign_change, mass))
        i = j + 1
    crossings = int(np.count_nonzero(np.sign(u_line[:-1] * u_line[1:]) < 0))
    return MultiplicityReport(walls, crossings)
