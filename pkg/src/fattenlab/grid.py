"""Uniform Cartesian grids with deterministic field operations.

Nodes are cell centers: along each axis the i-th node sits at
lo + (i + 1/2) * h.  This keeps every reflection of a symmetric box an
exact node-to-node map, which the symmetry diagnostics rely on.

All reductions run in a fixed order with compensated summation, so a
result never depends on thread count or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import convolve1d


@dataclass(frozen=True)
class Boundary:
    """Boundary policy for a grid.

    kind "farfield": outside-box values are a constant (the far phase,
    -1 or +1).  kind "periodic": the box wraps.
    """

    kind: str = "farfield"
    value: float = -1.0

    def __post_init__(self):
        if self.kind not in ("farfield", "periodic"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "farfield" and self.value not in (-1.0, 1.0):
            raise ValueError("far-field value must be -1 or +1")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a box, dimension 2 or 3.

    Spacing is identical along every axis, so the per-axis extents must
    all have the same length.
    """

    dim: int
    extent_lo: tuple[float, ...]
    extent_hi: tuple[float, ...]
    points_per_axis: int
    boundary: Boundary = field(default_factory=Boundary)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if len(self.extent_lo) != self.dim or len(self.extent_hi) != self.dim:
            raise ValueError("extents must have one entry per axis")
        if self.points_per_axis < 16:
            raise ValueError("points_per_axis must be >= 16")
        lengths = [hi - lo for lo, hi in zip(self.extent_lo, self.extent_hi)]
        if any(L <= 0 for L in lengths):
            raise ValueError("extent_hi must exceed extent_lo on every axis")
        if any(abs(L - lengths[0]) > 1e-12 * lengths[0] for L in lengths):
            raise ValueError("axis lengths must agree (uniform spacing)")

    @staticmethod
    def square(points: int, lo: float, hi: float, dim: int = 2,
               boundary: Boundary | None = None) -> "Grid":
        b = boundary if boundary is not None else Boundary()
        return Grid(dim, (lo,) * dim, (hi,) * dim, points, b)

    @property
    def h(self) -> float:
        return (self.extent_hi[0] - self.extent_lo[0]) / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def box_length(self) -> float:
        return self.extent_hi[0] - self.extent_lo[0]

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.points_per_axis
        return self.extent_lo[axis] + (np.arange(n) + 0.5) * self.h

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        axes = [self.axis_coords(a) for a in range(self.dim)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def node_points(self) -> np.ndarray:
        """All node positions as an (N^dim, dim) array in C order."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, p) -> bool:
        return all(self.extent_lo[a] <= p[a] <= self.extent_hi[a]
                   for a in range(self.dim))

    def key(self) -> tuple:
        """Hashable identity used by result caches."""
        return (self.dim, self.extent_lo, self.extent_hi,
                self.points_per_axis, self.boundary.kind, self.boundary.value)


@dataclass
class ScalarField:
    """Node values of a scalar quantity at one instant."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"shape {self.grid.shape}")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy(), self.time)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "ScalarField":
        return ScalarField(self.grid, values,
                           self.time if time is None else time)


def _pad_ghost(values: np.ndarray, grid: Grid, width: int = 1) -> np.ndarray:
    """Return values extended by ghost layers per the boundary policy."""
    b = grid.boundary
    if b.kind == "periodic":
        return np.pad(values, width, mode="wrap")
    return np.pad(values, width, mode="constant", constant_values=b.value)


def laplacian(f: ScalarField) -> ScalarField:
    """Second-order 5-point (7-point in 3-D) Laplacian.

    Exact for quadratics at interior nodes; boundary nodes see the
    grid's ghost policy.
    """
    g = f.grid
    p = _pad_ghost(f.values, g)
    inv_h2 = 1.0 / (g.h * g.h)
    out = np.empty_like(f.values)
    if g.dim == 2:
        core = p[1:-1, 1:-1]
        np.add(p[:-2, 1:-1], p[2:, 1:-1], out=out)
        out += p[1:-1, :-2]
        out += p[1:-1, 2:]
        out -= 4.0 * core
    else:
        core = p[1:-1, 1:-1, 1:-1]
        np.add(p[:-2, 1:-1, 1:-1], p[2:, 1:-1, 1:-1], out=out)
        out += p[1:-1, :-2, 1:-1]
        out += p[1:-1, 2:, 1:-1]
        out += p[1:-1, 1:-1, :-2]
        out += p[1:-1, 1:-1, 2:]
        out -= 6.0 * core
    out *= inv_h2
    return f.with_values(out)


def gradient(f: ScalarField) -> list[np.ndarray]:
    """Central-difference gradient components, ghosts per boundary policy."""
    g = f.grid
    p = _pad_ghost(f.values, g)
    inv_2h = 0.5 / g.h
    comps = []
    if g.dim == 2:
        comps.append((p[2:, 1:-1] - p[:-2, 1:-1]) * inv_2h)
        comps.append((p[1:-1, 2:] - p[1:-1, :-2]) * inv_2h)
    else:
        comps.append((p[2:, 1:-1, 1:-1] - p[:-2, 1:-1, 1:-1]) * inv_2h)
        comps.append((p[1:-1, 2:, 1:-1] - p[1:-1, :-2, 1:-1]) * inv_2h)
        comps.append((p[1:-1, 1:-1, 2:] - p[1:-1, 1:-1, :-2]) * inv_2h)
    return comps


def grad_norm_sq(f: ScalarField) -> np.ndarray:
    comps = gradient(f)
    out = comps[0] * comps[0]
    for c in comps[1:]:
        out += c * c
    return out


def _heat_kernel_1d(t: float, h: float) -> np.ndarray:
    """Normalized discrete Gaussian, truncated where the tail is < 1e-8."""
    radius = int(math.ceil(6.0 * math.sqrt(2.0 * t) / h))
    j = np.arange(-radius, radius + 1)
    w = np.exp(-(j * h) ** 2 / (4.0 * t))
    return w / math.fsum(w)


def heat_convolve(f: ScalarField, t: float, extension: str | None = None) -> ScalarField:
    """Convolve with the heat kernel at time t, one separable pass per axis.

    extension chooses how outside-box samples are produced:
      "constant"  far-field constant from the grid boundary policy
      "periodic"  wrap
      "linear"    per-axis linear extrapolation from the two edge nodes
                  (the right choice for signed-distance inputs)
    Default follows the grid boundary policy.
    """
    if t <= 0:
        raise ValueError("heat_convolve needs t > 0")
    g = f.grid
    if extension is None:
        extension = "periodic" if g.boundary.kind == "periodic" else "constant"
    if extension not in ("constant", "periodic", "linear"):
        raise ValueError(f"unknown extension {extension!r}")
    if 6.0 * math.sqrt(2.0 * t) > g.box_length:
        raise ValueError("kernel radius exceeds box size; time too large for domain")
    w = _heat_kernel_1d(t, g.h)
    radius = (len(w) - 1) // 2
    out = f.values
    for axis in range(g.dim):
        out = _convolve_axis(out, w, radius, axis, g, extension)
    return ScalarField(g, out, t)


def _convolve_axis(values: np.ndarray, w: np.ndarray, radius: int, axis: int,
                   grid: Grid, extension: str) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    n = v.shape[0]
    width = ((radius, radius),) + ((0, 0),) * (v.ndim - 1)
    if extension == "periodic":
        pad = np.pad(v, width, mode="wrap")
    elif extension == "constant":
        pad = np.pad(v, width, mode="constant",
                     constant_values=grid.boundary.value)
    else:  # linear extrapolation from the edge pair
        pad = np.empty((n + 2 * radius,) + v.shape[1:], dtype=np.float64)
        pad[radius:radius + n] = v
        steps = np.arange(radius, 0, -1).reshape((radius,) + (1,) * (v.ndim - 1))
        pad[:radius] = v[0] + steps * (v[0] - v[1])
        pad[radius + n:] = v[-1] + steps[::-1] * (v[-1] - v[-2])
    full = convolve1d(pad, w, axis=0, mode="constant", cval=0.0)
    return np.moveaxis(full[radius:radius + n], 0, axis)


def integrate(f: ScalarField) -> float:
    """h^dim-weighted sum, fixed order, compensated.  Thread-count independent."""
    total = math.fsum(f.values.ravel(order="C"))
    return total * f.grid.h ** f.grid.dim


def sample(f: ScalarField, p) -> float:
    """Multilinear interpolation at a point inside the box."""
    g = f.grid
    if not g.contains(p):
        raise ValueError(f"point {p} outside grid box")
    pad = _pad_ghost(f.values, g)
    n = g.points_per_axis
    idx = []
    frac = []
    for a in range(g.dim):
        # continuous node coordinate; node i sits at lo + (i + 1/2) h
        s = (p[a] - g.extent_lo[a]) / g.h - 0.5
        i0 = int(math.floor(s))
        i0 = min(max(i0, -1), n - 1)
        idx.append(i0 + 1)          # shift into padded array
        frac.append(s - i0)
    val = 0.0
    for corner in range(1 << g.dim):
        wgt = 1.0
        pos = []
        for a in range(g.dim):
            bit = (corner >> a) & 1
            wgt *= frac[a] if bit else (1.0 - frac[a])
            pos.append(idx[a] + bit)
        val += wgt * float(pad[tuple(pos)])
    return val


def sample_many(f: ScalarField, points: np.ndarray) -> np.ndarray:
    """Vectorized multilinear interpolation for an (M, dim) point array."""
    g = f.grid
    pts = np.asarray(points, dtype=np.float64)
    pad = _pad_ghost(f.values, g)
    n = g.points_per_axis
    idxs = []
    fracs = []
    for a in range(g.dim):
        s = (pts[:, a] - g.extent_lo[a]) / g.h - 0.5
        i0 = np.clip(np.floor(s).astype(np.int64), -1, n - 1)
        idxs.append(i0 + 1)
        fracs.append(s - i0)
    out = np.zeros(len(pts))
    for corner in range(1 << g.dim):
        wgt = np.ones(len(pts))
        pos = []
        for a in range(g.dim):
            bit = (corner >> a) & 1
            wgt = wgt * (fracs[a] if bit else (1.0 - fracs[a]))
            pos.append(idxs[a] + bit)
        out += wgt * pad[tuple(pos)]
    return out


# ---------------------------------------------------------------------------
# snapshot files: raw little-endian float64 in C order, plus a text sidecar

def write_field(f: ScalarField, basepath: str) -> tuple[str, str]:
    """Write basepath.f64 (raw values) and basepath.meta (text header)."""
    datapath = basepath + ".f64"
    metapath = basepath + ".meta"
    f.values.astype("<f8").tofile(datapath)
    g = f.grid
    lines = [
        f"dim = {g.dim}",
        f"points_per_axis = {g.points_per_axis}",
        "extent_lo = " + ",".join(format(x, ".17g") for x in g.extent_lo),
        "extent_hi = " + ",".join(format(x, ".17g") for x in g.extent_hi),
        f"boundary = {g.boundary.kind}",
        "boundary_value = " + format(g.boundary.value, ".17g"),
        "time = " + format(f.time, ".17g"),
        "order = C",
        "dtype = little-endian float64",
    ]
    with open(metapath, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return datapath, metapath


def read_field(basepath: str) -> ScalarField:
    meta: dict[str, str] = {}
    with open(basepath + ".meta") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            k, _, v = line.partition("=")
            meta[k.strip()] = v.strip()
    dim = int(meta["dim"])
    n = int(meta["points_per_axis"])
    lo = tuple(float(x) for x in meta["extent_lo"].split(","))
    hi = tuple(float(x) for x in meta["extent_hi"].split(","))
    boundary = Boundary(meta["boundary"], float(meta.get("boundary_value", -1.0)))
    grid = Grid(dim, lo, hi, n, boundary)
    values = np.fromfile(basepath + ".f64", dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, values, float(meta["time"]))


def write_pgm(f: ScalarField, path: str) -> None:
    """8-bit grayscale image of a 2-D field, [-1, 1] mapped to [0, 255]."""
    if f.grid.dim != 2:
        raise ValueError("image export is 2-D only")
    scaled = np.clip((f.values + 1.0) * 0.5, 0.0, 1.0) * 255.0
    img = np.rint(scaled).astype(np.uint8)
    # transpose so x runs along image columns, y along rows, top row = max y
    img = img.T[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())
