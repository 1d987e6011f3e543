"""Shapes, signed distances, contours, and geometric measurements.

Sign convention: the signed distance is positive INSIDE the enclosed
region, so 2*chi - 1 = sgn(d) and phase +1 is the interior phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial import cKDTree

from .grid import Grid, ScalarField


# ---------------------------------------------------------------------------
# shape specifications

@dataclass(frozen=True)
class Circle:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 0.4

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.radius - np.hypot(x - self.center[0], y - self.center[1])


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.4

    def distance(self, x, y, z) -> np.ndarray:
        r = np.sqrt((x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
                    + (z - self.center[2]) ** 2)
        return self.radius - r


@dataclass(frozen=True)
class FigureEight:
    """Two circles of equal radius tangent at the origin, centers (+-R, 0).

    The distance formula min_i || |x - c_i| - R || is exact here because
    the two disk interiors are disjoint.
    """

    radius: float = 0.3

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        r = self.radius
        d1 = np.hypot(x - r, y)
        d2 = np.hypot(x + r, y)
        inside = (d1 < r) | (d2 < r)
        val = np.minimum(np.abs(d1 - r), np.abs(d2 - r))
        return np.where(inside, val, -val)


@dataclass(frozen=True)
class PolylineShape:
    """Closed polyline boundary; exact segment distance, parity sign."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("closed polyline needs at least 3 vertices")

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        verts = np.asarray(self.vertices)
        px = x.ravel()
        py = y.ravel()
        best = np.full(px.shape, np.inf)
        crossings = np.zeros(px.shape, dtype=np.int64)
        n = len(verts)
        for k in range(n):
            ax, ay = verts[k]
            bx, by = verts[(k + 1) % n]
            ex, ey = bx - ax, by - ay
            ee = ex * ex + ey * ey
            dx = px - ax
            dy = py - ay
            tt = np.clip((dx * ex + dy * ey) / ee, 0.0, 1.0)
            qx = dx - tt * ex
            qy = dy - tt * ey
            np.minimum(best, qx * qx + qy * qy, out=best)
            # even-odd rule with the half-open convention on edge endpoints
            straddle = (ay > py) != (by > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = ax + (py - ay) * ex / ey
            crossings += straddle & (px < xcross)
        sign = np.where(crossings % 2 == 1, 1.0, -1.0)
        return (sign * np.sqrt(best)).reshape(x.shape)


def koch_flake_vertices(iterations: int, side: float,
                        center: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Closed triadic-flake polyline with 3 * 4^k segments, bumps outward."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    rc = side / math.sqrt(3.0)
    angles = [math.pi / 2, math.pi * 7 / 6, math.pi * 11 / 6]  # CCW
    pts = [complex(center[0] + rc * math.cos(a), center[1] + rc * math.sin(a))
           for a in angles]
    rot = complex(math.cos(-math.pi / 3), math.sin(-math.pi / 3))
    for _ in range(iterations):
        new: list[complex] = []
        m = len(pts)
        for k in range(m):
            a = pts[k]
            b = pts[(k + 1) % m]
            e = (b - a) / 3.0
            new.extend([a, a + e, a + e + e * rot, a + 2 * e])
        pts = new
    return np.array([(p.real, p.imag) for p in pts])


@dataclass(frozen=True)
class KochFlake:
    """Triadic flake boundary at a finite iteration depth."""

    iterations: int = 4
    side: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    def polyline(self) -> PolylineShape:
        verts = koch_flake_vertices(self.iterations, self.side, self.center)
        return PolylineShape(tuple(map(tuple, verts)))

    def distance(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.polyline().distance(x, y)


ShapeSpec = Circle | Sphere | FigureEight | PolylineShape | KochFlake


# ---------------------------------------------------------------------------
# signed distance fields

@dataclass
class SignedDistanceField:
    """Clamped signed distance samples of a shape on a grid."""

    field: ScalarField
    d_max: float
    shape: object = None
    eikonal_fraction: float = float("nan")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def _raw_distance(shape, grid: Grid) -> np.ndarray:
    mesh = grid.meshgrid()
    if grid.dim == 2:
        if isinstance(shape, Sphere):
            raise ValueError("Sphere needs a 3-D grid")
        return shape.distance(mesh[0], mesh[1])
    if not isinstance(shape, Sphere):
        raise ValueError(f"{type(shape).__name__} needs a 2-D grid")
    return shape.distance(*mesh)


def _boundary_ring_min_abs(values: np.ndarray) -> float:
    faces = []
    for axis in range(values.ndim):
        faces.append(np.take(values, 0, axis=axis))
        faces.append(np.take(values, -1, axis=axis))
    return min(float(np.min(np.abs(f))) for f in faces)


def eikonal_fraction(values: np.ndarray, grid: Grid, d_max: float) -> float:
    """Share of unclamped nodes whose central gradient magnitude is near 1.

    Nodes within 2h of the clamp plateau are skipped; the remaining
    misses sit on the medial skeleton, which has near-zero area.
    """
    f = ScalarField(grid, values)
    from .grid import grad_norm_sq
    gm = np.sqrt(grad_norm_sq(f))
    h = grid.h
    interior = np.abs(values) < d_max - 2.0 * h
    # the outermost node layer sees ghost values, not distances
    core = np.zeros(values.shape, dtype=bool)
    core[(slice(1, -1),) * grid.dim] = True
    mask = interior & core
    if not mask.any():
        return float("nan")
    ok = (gm[mask] >= 1.0 - 3.0 * h) & (gm[mask] <= 1.0 + 3.0 * h)
    return float(np.count_nonzero(ok)) / float(np.count_nonzero(mask))


def signed_distance(shape, grid: Grid, d_max: float | None = None,
                    check_eikonal: bool = True,
                    min_eikonal_fraction: float = 0.97
                    ) -> SignedDistanceField:
    """Sample the shape's signed distance, clamped to [-d_max, d_max].

    d_max defaults to 40% of the margin between the interface and the
    box boundary; a request exceeding the margin is rejected.  The
    unit-gradient gate tolerates the 1-D medial skeleton of smooth
    shapes at its default; pass a lower min_eikonal_fraction for
    fractal boundaries, whose skeleton occupies a real area share.
    """
    raw = _raw_distance(shape, grid)
    margin = _boundary_ring_min_abs(raw)
    if d_max is None:
        d_max = 0.4 * margin
    if d_max <= 0:
        raise ValueError("d_max must be positive")
    if d_max > margin + 1e-12:
        raise ValueError(
            f"shape must fit inside the box with margin >= d_max "
            f"(margin {margin:.6g}, d_max {d_max:.6g})")
    clamped = np.clip(raw, -d_max, d_max)
    frac = eikonal_fraction(clamped, grid, d_max)
    sdf = SignedDistanceField(ScalarField(grid, clamped), d_max, shape, frac)
    if check_eikonal and not (math.isnan(frac)
                              or frac >= min_eikonal_fraction):
        raise ValueError(
            f"signed distance failed the unit-gradient check "
            f"({frac:.4f} of unclamped nodes in range)")
    return sdf


def leaf_initial_data(sdf: SignedDistanceField, s: float) -> ScalarField:
    """Indicator data 2*chi - 1 for the leaf {d = s}; ties d == s go to +1."""
    if abs(s) >= sdf.d_max:
        raise ValueError(f"leaf parameter {s} outside clamp range "
                         f"(+-{sdf.d_max:.6g})")
    u = np.where(sdf.values >= s, 1.0, -1.0)
    return ScalarField(sdf.grid, u, 0.0)


def leaf_signed_distance(sdf: SignedDistanceField, s: float) -> SignedDistanceField:
    """Shifted field d - s, the 1-Lipschitz distance proxy for leaf {d = s}."""
    if abs(s) >= sdf.d_max:
        raise ValueError("leaf parameter outside clamp range")
    cap = sdf.d_max - abs(s)
    vals = np.clip(sdf.values - s, -cap, cap)
    frac = eikonal_fraction(vals, sdf.grid, cap)
    return SignedDistanceField(ScalarField(sdf.grid, vals), cap, None, frac)


# ---------------------------------------------------------------------------
# marching squares (2-D only)

@dataclass
class ContourLine:
    points: np.ndarray          # (M, 2) physical coordinates
    closed: bool

    def length(self) -> float:
        pts = self.points
        if len(pts) < 2:
            return 0.0
        seg = np.diff(pts, axis=0)
        total = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
        if self.closed:
            total += float(np.hypot(*(pts[0] - pts[-1])))
        return total


@dataclass
class Contour:
    level: float
    time: float
    lines: list[ContourLine] = dc_field(default_factory=list)

    def total_length(self) -> float:
        return float(math.fsum(ln.length() for ln in self.lines))

    def all_points(self, step: float | None = None) -> np.ndarray:
        """Concatenated vertices, optionally densified to the given step."""
        parts = []
        for ln in self.lines:
            pts = ln.points
            if ln.closed and len(pts) > 1:
                pts = np.vstack([pts, pts[:1]])
            if step is None or len(pts) < 2:
                parts.append(pts)
                continue
            parts.append(_densify(pts, step))
        if not parts:
            return np.empty((0, 2))
        return np.vstack(parts)


def _densify(pts: np.ndarray, step: float) -> np.ndarray:
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        d = float(np.hypot(*(b - a)))
        k = max(int(math.ceil(d / step)), 1)
        tt = np.linspace(0.0, 1.0, k + 1)[1:]
        out.append(a + tt[:, None] * (b - a))
    return np.vstack(out)


# case -> list of (edge, edge) segments; edges B, R, T, L of one cell.
# Ambiguous cases 5 and 10 are resolved by the cell-average rule: the
# cell is split so the side containing the cell average stays connected.
_B, _R, _T, _L = 0, 1, 2, 3
_CASES: dict[int, list[tuple[int, int]]] = {
    1: [(_L, _B)], 2: [(_B, _R)], 3: [(_L, _R)], 4: [(_T, _R)],
    6: [(_B, _T)], 7: [(_L, _T)], 8: [(_L, _T)], 9: [(_B, _T)],
    11: [(_T, _R)], 12: [(_L, _R)], 13: [(_B, _R)], 14: [(_L, _B)],
}


def contour_extract(f: ScalarField, level: float) -> Contour:
    """Marching squares at the given level.

    Node classification uses v >= level, matching the tie rule of
    leaf_initial_data.  Saddle cells are disambiguated by the average of
    the four corner values.  Output is deterministic: cells and chains
    are visited in lexicographic order.
    """
    g = f.grid
    if g.dim != 2:
        raise NotImplementedError("contour extraction is 2-D only")
    v = f.values
    inside = v >= level
    c00 = inside[:-1, :-1]
    c10 = inside[1:, :-1]
    c11 = inside[1:, 1:]
    c01 = inside[:-1, 1:]
    case = (c00.astype(np.int8) + 2 * c10.astype(np.int8)
            + 4 * c11.astype(np.int8) + 8 * c01.astype(np.int8))
    hot = np.argwhere((case != 0) & (case != 15))

    xs = g.axis_coords(0)
    ys = g.axis_coords(1)

    def edge_point(edge_id):
        orient, i, j = edge_id
        if orient == 0:     # between nodes (i, j) and (i+1, j)
            va, vb = v[i, j], v[i + 1, j]
            t = (level - va) / (vb - va)
            return (xs[i] + t * g.h, ys[j])
        va, vb = v[i, j], v[i, j + 1]
        t = (level - va) / (vb - va)
        return (xs[i], ys[j] + t * g.h)

    segments: list[tuple[tuple, tuple]] = []
    for i, j in hot:
        c = int(case[i, j])
        if c in (5, 10):
            avg = 0.25 * (v[i, j] + v[i + 1, j] + v[i, j + 1] + v[i + 1, j + 1])
            center_in = avg >= level
            if c == 5:
                pairs = [(_B, _R), (_T, _L)] if center_in else [(_L, _B), (_T, _R)]
            else:
                pairs = [(_L, _B), (_T, _R)] if center_in else [(_B, _R), (_T, _L)]
        else:
            pairs = _CASES[c]
        names = {
            _B: (0, i, j), _T: (0, i, j + 1),
            _L: (1, i, j), _R: (1, i + 1, j),
        }
        for a, b in pairs:
            segments.append((names[a], names[b]))

    lines = _stitch(segments, edge_point)
    return Contour(level, f.time, lines)


def _stitch(segments, edge_point) -> list[ContourLine]:
    adj: dict[tuple, list[tuple]] = {}
    for a, b in segments:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    used: set[frozenset] = set()
    lines: list[ContourLine] = []

    def walk(start, first_next):
        chain = [start, first_next]
        used.add(frozenset((start, first_next)))
        while True:
            cur = chain[-1]
            ext = None
            for nb in sorted(adj[cur]):
                if frozenset((cur, nb)) not in used:
                    ext = nb
                    break
            if ext is None:
                break
            used.add(frozenset((cur, ext)))
            chain.append(ext)
        return chain

    # open chains first (endpoints of degree 1), then cycles
    for start in sorted(k for k, vs in adj.items() if len(vs) == 1):
        for nb in sorted(adj[start]):
            if frozenset((start, nb)) not in used:
                chain = walk(start, nb)
                pts = np.array([edge_point(e) for e in chain])
                lines.append(ContourLine(pts, closed=False))
    for a, b in segments:
        if frozenset((a, b)) in used:
            continue
        chain = walk(a, b)
        closed = chain[0] == chain[-1]
        if closed:
            chain = chain[:-1]
        pts = np.array([edge_point(e) for e in chain])
        lines.append(ContourLine(pts, closed=closed))
    return lines


def level_set_measure(sdf: SignedDistanceField, r: float) -> float:
    """Total contour length of the level set {d = r} (signed r, 2-D)."""
    if abs(r) >= sdf.d_max:
        raise ValueError("level outside clamp range")
    return contour_extract(sdf.field, r).total_length()


def measure_scaling_fit(sdf: SignedDistanceField,
                        r_values) -> tuple[float, float, list[float]]:
    """Least-squares slope of log(measure) vs log(r) over a positive sweep."""
    rs = list(r_values)
    if any(r <= 0 for r in rs):
        raise ValueError("scaling sweep needs positive levels")
    ms = [level_set_measure(sdf, r) for r in rs]
    slope, intercept = np.polyfit(np.log(rs), np.log(ms), 1)
    return float(slope), float(intercept), ms


def hausdorff_distance(a: Contour, b: Contour, step: float) -> float:
    """Symmetric Hausdorff distance between two contours.

    Polylines are densified to the given step first, so the value is a
    point-sample estimate accurate to about step/2.
    """
    pa = a.all_points(step)
    pb = b.all_points(step)
    if len(pa) == 0 or len(pb) == 0:
        raise ValueError("hausdorff_distance needs non-empty contours")
    da = cKDTree(pb).query(pa)[0]
    db = cKDTree(pa).query(pb)[0]
    return float(max(da.max(), db.max()))


# ---------------------------------------------------------------------------
# contour text files: "x,y" per vertex, one header line per polyline

def write_contours(contour: Contour, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("level = " + format(contour.level, ".17g") + "\n")
        fh.write("time = " + format(contour.time, ".17g") + "\n")
        for ln in contour.lines:
            fh.write(f"# polyline closed={int(ln.closed)} n={len(ln.points)}\n")
            for x, y in ln.points:
                fh.write(format(x, ".17g") + "," + format(y, ".17g") + "\n")


def read_contours(path: str) -> Contour:
    level = 0.0
    time = 0.0
    lines: list[ContourLine] = []
    cur: list[list[float]] = []
    closed = False

    def flush():
        nonlocal cur
        if cur:
            lines.append(ContourLine(np.array(cur), closed))
            cur = []

    with open(path) as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            if raw.startswith("level ="):
                level = float(raw.split("=")[1])
            elif raw.startswith("time ="):
                time = float(raw.split("=")[1])
            elif raw.startswith("#"):
                flush()
                closed = "closed=1" in raw
            else:
                x, y = raw.split(",")
                cur.append([float(x), float(y)])
    flush()
    return Contour(level, time, lines)
