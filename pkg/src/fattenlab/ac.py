"""Explicit and semi-implicit integration of the scaled reaction-diffusion flow.

    du/dt = lap(u) - f(u)/eps^2,   f(u) = 2 u (u^2 - 1)

The explicit scheme with dt = min(h^2/(4 dim), eps^2/8) is monotone:
ordered initial data stay ordered step by step, which the shooting
construction depends on.  The semi-implicit variant treats diffusion
implicitly for longer steps; it trades the ordering guarantee for speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import Grid, ScalarField, gradient

SUP_SLACK = 1e-9
GRAD_SLACK = 3.0


class NumericalAbort(RuntimeError):
    """Raised when an evolution leaves the trusted regime."""


def reaction(u: np.ndarray) -> np.ndarray:
    """f(u) = 2 u (u^2 - 1), the derivative of the double-well potential."""
    r = u * u
    r -= 1.0
    r *= u
    r *= 2.0
    return r


def double_well(u: np.ndarray) -> np.ndarray:
    """F(u) = (1 - u^2)^2 / 2."""
    w = 1.0 - u * u
    return 0.5 * w * w


def stable_dt(grid: Grid, eps: float) -> float:
    return min(grid.h ** 2 / (4.0 * grid.dim), eps * eps / 8.0)


@dataclass
class ACParams:
    epsilon: float
    scheme: str = "explicit"            # "explicit" | "semi-implicit"
    dt: float | None = None             # None -> scheme default
    snapshot_times: tuple[float, ...] = ()
    t_end: float | None = None

    def __post_init__(self):
        if self.scheme not in ("explicit", "semi-implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if any(t < 0 for t in self.snapshot_times):
            raise ValueError("snapshot times must be >= 0")

    def resolve_dt(self, grid: Grid) -> float:
        if self.epsilon < 4.0 * grid.h - 1e-12:
            raise ValueError(
                f"interface width eps = {self.epsilon} under-resolved: "
                f"need eps >= 4 h = {4.0 * grid.h:.6g}")
        cap = (stable_dt(grid, self.epsilon) if self.scheme == "explicit"
               else self.epsilon ** 2 / 8.0)
        if self.dt is None:
            return cap
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > cap * (1.0 + 1e-12):
            raise ValueError(
                f"dt = {self.dt} exceeds the stability cap {cap:.6g} "
                f"for scheme {self.scheme}")
        return self.dt

    def end_time(self) -> float:
        if self.t_end is not None:
            return self.t_end
        if self.snapshot_times:
            return max(self.snapshot_times)
        raise ValueError("need t_end or snapshot_times")


@dataclass
class ACSolution:
    params: ACParams
    grid: Grid
    dt: float
    steps: int
    snapshots: list[ScalarField] = dc_field(default_factory=list)
    requested_times: tuple[float, ...] = ()
    initial_sup: float = 1.0

    def snapshot_at(self, t: float) -> ScalarField:
        """Snapshot whose recorded time is nearest to t."""
        if not self.snapshots:
            raise ValueError("no snapshots recorded")
        k = int(np.argmin([abs(s.time - t) for s in self.snapshots]))
        return self.snapshots[k]


# ---------------------------------------------------------------------------
# explicit scheme

def _fill_ghosts(pad: np.ndarray, grid: Grid) -> None:
    b = grid.boundary
    if grid.dim == 2:
        if b.kind == "farfield":
            pad[0, :] = b.value
            pad[-1, :] = b.value
            pad[:, 0] = b.value
            pad[:, -1] = b.value
        else:
            pad[0, 1:-1] = pad[-2, 1:-1]
            pad[-1, 1:-1] = pad[1, 1:-1]
            pad[1:-1, 0] = pad[1:-1, -2]
            pad[1:-1, -1] = pad[1:-1, 1]
    else:
        if b.kind == "farfield":
            pad[0, :, :] = b.value
            pad[-1, :, :] = b.value
            pad[:, 0, :] = b.value
            pad[:, -1, :] = b.value
            pad[:, :, 0] = b.value
            pad[:, :, -1] = b.value
        else:
            pad[0, 1:-1, 1:-1] = pad[-2, 1:-1, 1:-1]
            pad[-1, 1:-1, 1:-1] = pad[1, 1:-1, 1:-1]
            pad[1:-1, 0, 1:-1] = pad[1:-1, -2, 1:-1]
            pad[1:-1, -1, 1:-1] = pad[1:-1, 1, 1:-1]
            pad[1:-1, 1:-1, 0] = pad[1:-1, 1:-1, -2]
            pad[1:-1, 1:-1, -1] = pad[1:-1, 1:-1, 1]


def _explicit_step(pad: np.ndarray, out: np.ndarray, tmp: np.ndarray,
                   grid: Grid, dt: float, eps: float) -> None:
    """One explicit step from the padded state into out (same op order always)."""
    _fill_ghosts(pad, grid)
    if grid.dim == 2:
        core = pad[1:-1, 1:-1]
        np.add(pad[:-2, 1:-1], pad[2:, 1:-1], out=out)
        out += pad[1:-1, :-2]
        out += pad[1:-1, 2:]
        out -= 4.0 * core
    else:
        core = pad[1:-1, 1:-1, 1:-1]
        np.add(pad[:-2, 1:-1, 1:-1], pad[2:, 1:-1, 1:-1], out=out)
        out += pad[1:-1, :-2, 1:-1]
        out += pad[1:-1, 2:, 1:-1]
        out += pad[1:-1, 1:-1, :-2]
        out += pad[1:-1, 1:-1, 2:]
        out -= 6.0 * core
    out *= dt / (grid.h * grid.h)
    out += core
    # reaction, explicit in both schemes
    np.multiply(core, core, out=tmp)
    tmp -= 1.0
    tmp *= core
    tmp *= 2.0 * dt / (eps * eps)
    out -= tmp


# ---------------------------------------------------------------------------
# semi-implicit scheme: (I - dt lap) u+ = u - dt f(u)/eps^2

def _periodic_symbol(grid: Grid, dt: float) -> np.ndarray:
    n = grid.points_per_axis
    h2 = grid.h * grid.h
    eig1 = 4.0 / h2 * np.sin(np.pi * np.arange(n) / n) ** 2
    if grid.dim == 2:
        lam = eig1[:, None] + eig1[None, :n // 2 + 1]
    else:
        lam = (eig1[:, None, None] + eig1[None, :, None]
               + eig1[None, None, :n // 2 + 1])
    return 1.0 / (1.0 + dt * lam)


def _semi_implicit_step(u: np.ndarray, grid: Grid, dt: float, eps: float,
                        symbol: np.ndarray | None) -> np.ndarray:
    rhs = u - (dt / (eps * eps)) * reaction(u)
    if grid.boundary.kind == "periodic":
        return np.fft.irfftn(np.fft.rfftn(rhs) * symbol, s=u.shape)
    # far-field grid: conjugate gradients on the SPD operator I - dt lap0,
    # with the constant ghost contribution moved to the right-hand side
    c = grid.boundary.value
    h2 = grid.h * grid.h
    b = np.zeros_like(u)
    for axis in range(grid.dim):
        sl0 = [slice(None)] * grid.dim
        sl1 = [slice(None)] * grid.dim
        sl0[axis] = 0
        sl1[axis] = -1
        b[tuple(sl0)] += c / h2
        b[tuple(sl1)] += c / h2
    rhs = rhs + dt * b

    def apply_op(x: np.ndarray) -> np.ndarray:
        p = np.pad(x, 1, mode="constant", constant_values=0.0)
        if grid.dim == 2:
            lap = (p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]
                   - 4.0 * x)
        else:
            lap = (p[:-2, 1:-1, 1:-1] + p[2:, 1:-1, 1:-1]
                   + p[1:-1, :-2, 1:-1] + p[1:-1, 2:, 1:-1]
                   + p[1:-1, 1:-1, :-2] + p[1:-1, 1:-1, 2:] - 6.0 * x)
        return x - (dt / h2) * lap

    x = u.copy()
    r = rhs - apply_op(x)
    p = r.copy()
    rs = float(np.dot(r.ravel(), r.ravel()))
    tol = 1e-10 * max(1.0, float(np.linalg.norm(rhs.ravel())))
    for _ in range(10 * grid.points_per_axis * grid.dim):
        if math.sqrt(rs) <= tol:
            break
        ap = apply_op(p)
        alpha = rs / float(np.dot(p.ravel(), ap.ravel()))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(r.ravel(), r.ravel()))
        p = r + (rs_new / rs) * p
        rs = rs_new
    else:
        raise NumericalAbort("conjugate gradient solve did not converge")
    return x


# ---------------------------------------------------------------------------
# public stepping API

def step(u: ScalarField, params: ACParams) -> ScalarField:
    """Advance one time step."""
    dt = params.resolve_dt(u.grid)
    if params.scheme == "explicit":
        pad = np.empty(tuple(n + 2 for n in u.values.shape))
        pad[(slice(1, -1),) * u.grid.dim] = u.values
        out = np.empty_like(u.values)
        tmp = np.empty_like(u.values)
        _explicit_step(pad, out, tmp, u.grid, dt, params.epsilon)
        return ScalarField(u.grid, out, u.time + dt)
    symbol = (_periodic_symbol(u.grid, dt)
              if u.grid.boundary.kind == "periodic" else None)
    out = _semi_implicit_step(u.values, u.grid, dt, params.epsilon, symbol)
    return ScalarField(u.grid, out, u.time + dt)


def evolve(u0: ScalarField, params: ACParams) -> ACSolution:
    """March to the end time, capturing snapshots at nearest step boundaries."""
    grid = u0.grid
    dt = params.resolve_dt(grid)
    t_end = params.end_time()
    n_steps = int(round(t_end / dt))
    snap_times = tuple(params.snapshot_times) or (t_end,)
    snap_steps = [min(int(round(t / dt)), n_steps) for t in snap_times]
    if max(snap_steps) > n_steps:
        raise ValueError("snapshot time beyond t_end")
    initial_sup = float(np.max(np.abs(u0.values)))
    sup_cap = max(initial_sup, 1.0) + SUP_SLACK

    sol = ACSolution(params, grid, dt, n_steps,
                     requested_times=snap_times, initial_sup=initial_sup)
    by_step: dict[int, list[int]] = {}
    for i, k in enumerate(snap_steps):
        by_step.setdefault(k, []).append(i)
    pending: dict[int, ScalarField] = {}

    def capture(k: int, values: np.ndarray):
        if k in by_step:
            f = ScalarField(grid, values.copy(), k * dt)
            if not np.isfinite(f.values).all():
                raise NumericalAbort(f"non-finite values at t = {f.time}")
            sup = float(np.max(np.abs(f.values)))
            if sup > sup_cap:
                raise NumericalAbort(
                    f"maximum principle violated at t = {f.time}: "
                    f"sup |u| = {sup:.6g} > {sup_cap:.6g}")
            for i in by_step[k]:
                pending[i] = f

    capture(0, u0.values)
    if params.scheme == "explicit":
        pad = np.empty(tuple(n + 2 for n in grid.shape))
        out = np.empty_like(u0.values)
        tmp = np.empty_like(u0.values)
        cur = u0.values.copy()
        for k in range(1, n_steps + 1):
            pad[(slice(1, -1),) * grid.dim] = cur
            _explicit_step(pad, out, tmp, grid, dt, params.epsilon)
            cur, out = out, cur
            capture(k, cur)
    else:
        symbol = (_periodic_symbol(grid, dt)
                  if grid.boundary.kind == "periodic" else None)
        cur = u0.values.copy()
        for k in range(1, n_steps + 1):
            cur = _semi_implicit_step(cur, grid, dt, params.epsilon, symbol)
            capture(k, cur)
    sol.snapshots = [pending[i] for i in range(len(snap_times))]
    return sol


# ---------------------------------------------------------------------------
# bound verification

@dataclass
class BoundsRow:
    time: float
    sup: float
    sup_cap: float
    grad_max: float
    grad_cap: float

    @property
    def ok(self) -> bool:
        return self.sup <= self.sup_cap and self.grad_max <= self.grad_cap


@dataclass
class BoundsReport:
    epsilon: float
    rows: list[BoundsRow]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    def to_text(self) -> str:
        lines = ["solution bounds",
                 "epsilon = " + format(self.epsilon, ".17g"),
                 "columns: t sup sup_cap grad_max grad_cap ok"]
        for r in self.rows:
            lines.append(" ".join([
                format(r.time, ".17g"), format(r.sup, ".17g"),
                format(r.sup_cap, ".17g"), format(r.grad_max, ".17g"),
                format(r.grad_cap, ".17g"), "1" if r.ok else "0"]))
        lines.append("ok = " + ("1" if self.ok else "0"))
        return "\n".join(lines) + "\n"


def verify_solution_bounds(sol: ACSolution, slack: float = GRAD_SLACK) -> BoundsReport:
    """Check sup |u| <= max(sup |u0|, 1) and the 1/sqrt(t) + sqrt(t)/eps^2
    gradient envelope (with the stated slack) at every positive-time snapshot.
    """
    eps = sol.params.epsilon
    sup_cap = max(sol.initial_sup, 1.0) + SUP_SLACK
    rows = []
    for snap in sol.snapshots:
        if snap.time <= 0:
            continue
        comps = gradient(snap)
        gm = np.zeros_like(comps[0])
        for c in comps:
            gm += c * c
        gmax = float(np.sqrt(np.max(gm)))
        t = snap.time
        cap = slack * (1.0 / math.sqrt(t) + math.sqrt(t) / (eps * eps))
        rows.append(BoundsRow(t, float(np.max(np.abs(snap.values))), sup_cap,
                              gmax, cap))
    if not rows:
        raise ValueError("no positive-time snapshots to verify")
    return BoundsReport(eps, rows)
