"""Line-oriented run configuration: [section] headers, key = value lines.

The format is deliberately flat so experiment configs diff cleanly.
Parsing reports the offending line number for every complaint; unknown
sections and keys are rejected rather than ignored, so a typo cannot
silently drop a setting.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .grid import Grid, Boundary
from .geometry import Circle, FigureEight, KochFlake

COMMANDS = ("simulate", "shoot", "study", "verify", "energy", "lsf")

# section -> key -> parser kind
_SCHEMA = {
    "run": {"command": "str", "output": "str", "threads": "int",
            "strict": "bool"},
    "shape": {"kind": "str", "center": "floats", "radius": "float",
              "iterations": "int", "side": "float",
              "eikonal_gate": "float"},
    "grid": {"dim": "int", "points": "int", "lo": "float", "hi": "float",
             "boundary": "str", "boundary_value": "float"},
    "ac": {"epsilon": "float", "scheme": "str", "dt": "float",
           "t_end": "float", "snapshots": "floats"},
    "shooting": {"x0": "floats", "t0": "float", "eta": "float",
                 "kappa": "float", "shoot_tol": "float",
                 "eps_list": "floats", "points_list": "ints",
                 "symmetry": "str", "transversal": "floats"},
    "lsf": {"beta": "float", "delta": "float", "band": "float",
            "t_end": "float", "snapshots": "floats"},
    "energy": {"probe_x0": "floats", "probe_t0": "float",
               "probe_r": "float"},
}

_REQUIRED = {
    "simulate": {"shape": (), "grid": ("points",), "ac": ("epsilon", "t_end")},
    "shoot": {"shape": (), "grid": ("points",), "ac": ("epsilon",),
              "shooting": ("x0", "t0", "eta")},
    "study": {"shape": (), "grid": (),
              "shooting": ("x0", "t0", "eta", "eps_list")},
    "verify": {"shape": (), "grid": ("points",), "ac": ("epsilon", "t_end")},
    "energy": {"shape": (), "grid": ("points",), "ac": ("epsilon", "t_end")},
    "lsf": {"shape": (), "grid": ("points",), "lsf": ("t_end",)},
}


class ConfigError(ValueError):
    """Validation failure; line carries the 1-based source line if known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None
                         else f"line {line}: {message}")


@dataclass
class RunConfig:
    command: str
    output: str
    threads: int = 1
    strict: bool = False
    shape: object = None
    eikonal_gate: float | None = None
    grid_dim: int = 2
    grid_points: int | None = None
    grid_lo: float = -1.0
    grid_hi: float = 1.0
    boundary: Boundary = dc_field(default_factory=Boundary)
    epsilon: float | None = None
    scheme: str = "explicit"
    dt: float | None = None
    t_end: float | None = None
    snapshots: tuple[float, ...] = ()
    x0: tuple[float, ...] | None = None
    t0: float | None = None
    eta: float | None = None
    kappa: float = 0.25
    shoot_tol: float = 1e-3
    eps_list: tuple[float, ...] = ()
    points_list: tuple[int, ...] = ()
    symmetry: str | None = None
    transversal: tuple[float, ...] | None = None
    lsf_beta: float = 1e-6
    lsf_delta: float | None = None
    lsf_band: float | None = None
    lsf_t_end: float | None = None
    lsf_snapshots: tuple[float, ...] = ()
    probe_x0: tuple[float, ...] | None = None
    probe_t0: float | None = None
    probe_r: float | None = None

    def build_grid(self, points: int | None = None) -> Grid:
        n = points if points is not None else self.grid_points
        if n is None:
            raise ConfigError("grid points not set")
        return Grid.square(n, self.grid_lo, self.grid_hi, self.grid_dim,
                           self.boundary)


def _parse_scalar(kind: str, raw: str, key: str, line: int):
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind == "floats":
            return tuple(float(p) for p in raw.split(",") if p.strip())
        if kind == "ints":
            return tuple(int(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {key} value {raw!r} as {kind}",
                          line) from None
    raise ConfigError(f"internal: unknown kind {kind}", line)


def _read_sections(text: str) -> dict[str, dict[str, tuple[object, int]]]:
    sections: dict[str, dict[str, tuple[object, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise ConfigError(f"unknown section [{name}]", lineno)
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", lineno)
        if current is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[current]:
            raise ConfigError(f"unknown key {key!r} in [{current}]", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", lineno)
        sections[current][key] = (
            _parse_scalar(_SCHEMA[current][key], value, key, lineno), lineno)
    return sections


def _build_shape(sec: dict[str, tuple[object, int]]):
    kind, kline = sec.get("kind", (None, None))
    if kind is None:
        raise ConfigError("missing required key 'kind' in [shape]")

    def val(key, default=None):
        return sec.get(key, (default, None))[0]

    def at(key):
        return sec.get(key, (None, None))[1]

    if kind == "circle":
        radius = val("radius", 0.4)
        if radius <= 0:
            raise ConfigError("radius must be positive", at("radius"))
        center = val("center", (0.0, 0.0))
        if len(center) != 2:
            raise ConfigError("center needs 2 coordinates", at("center"))
        return Circle(tuple(center), radius)
    if kind == "figure_eight":
        radius = val("radius", 0.3)
        if radius <= 0:
            raise ConfigError("radius must be positive", at("radius"))
        return FigureEight(radius)
    if kind == "koch_flake":
        iters = val("iterations", 4)
        side = val("side", 1.0)
        if iters < 0:
            raise ConfigError("iterations must be >= 0", at("iterations"))
        if side <= 0:
            raise ConfigError("side must be positive", at("side"))
        center = val("center", (0.0, 0.0))
        if len(center) != 2:
            raise ConfigError("center needs 2 coordinates", at("center"))
        return KochFlake(iters, side, tuple(center))
    raise ConfigError(f"unknown shape kind {kind!r}", kline)


def _check_epsilon(eps: float, line: int | None):
    if not 0.0 < eps < 1.0:
        raise ConfigError("epsilon must be in (0,1)", line)


def parse_config(text: str) -> RunConfig:
    """Parse and validate; raises ConfigError with a line number."""
    sections = _read_sections(text)

    run = sections.get("run")
    if run is None or "command" not in run:
        raise ConfigError("missing [run] section with a command key")
    command, cmd_line = run["command"]
    if command not in COMMANDS:
        raise ConfigError(
            f"unknown command {command!r} (one of {', '.join(COMMANDS)})",
            cmd_line)
    if "output" not in run:
        raise ConfigError("missing required key 'output' in [run]")

    for sec_name, keys in _REQUIRED[command].items():
        if sec_name not in sections:
            raise ConfigError(f"command {command!r} needs section "
                              f"[{sec_name}]")
        for key in keys:
            if key not in sections[sec_name]:
                raise ConfigError(f"missing required key {key!r} in "
                                  f"[{sec_name}]")

    cfg = RunConfig(command=command, output=run["output"][0])

    def take(sec: str, key: str, default=None):
        entry = sections.get(sec, {}).get(key)
        return (entry[0], entry[1]) if entry else (default, None)

    cfg.threads, tline = take("run", "threads", 1)
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1", tline)
    cfg.strict, _ = take("run", "strict", False)

    if "shape" in sections:
        cfg.shape = _build_shape(sections["shape"])
    cfg.eikonal_gate, gline = take("shape", "eikonal_gate", None)
    if cfg.eikonal_gate is not None and not 0.0 < cfg.eikonal_gate <= 1.0:
        raise ConfigError("eikonal_gate must be in (0,1]", gline)

    cfg.grid_dim, dline = take("grid", "dim", 2)
    if cfg.grid_dim not in (2, 3):
        raise ConfigError("dim must be 2 or 3", dline)
    cfg.grid_points, pline = take("grid", "points", None)
    if cfg.grid_points is not None and cfg.grid_points < 16:
        raise ConfigError("points must be >= 16", pline)
    cfg.grid_lo, _ = take("grid", "lo", -1.0)
    cfg.grid_hi, hline = take("grid", "hi", 1.0)
    if cfg.grid_hi <= cfg.grid_lo:
        raise ConfigError("hi must exceed lo", hline)
    bkind, bline = take("grid", "boundary", "farfield")
    bval, bvline = take("grid", "boundary_value", -1.0)
    try:
        cfg.boundary = Boundary(bkind, bval)
    except ValueError as err:
        raise ConfigError(str(err), bvline if bkind == "farfield" else bline)

    eps, eline = take("ac", "epsilon", None)
    if eps is not None:
        _check_epsilon(eps, eline)
    cfg.epsilon = eps
    cfg.scheme, sline = take("ac", "scheme", "explicit")
    if cfg.scheme not in ("explicit", "semi-implicit"):
        raise ConfigError("scheme must be explicit or semi-implicit", sline)
    cfg.dt, dtline = take("ac", "dt", None)
    if cfg.dt is not None and cfg.dt <= 0:
        raise ConfigError("dt must be positive", dtline)
    cfg.t_end, teline = take("ac", "t_end", None)
    if cfg.t_end is not None and cfg.t_end <= 0:
        raise ConfigError("t_end must be positive", teline)
    snaps, snline = take("ac", "snapshots", ())
    if list(snaps) != sorted(snaps) or any(t <= 0 for t in snaps):
        raise ConfigError("snapshots must be positive and ascending", snline)
    cfg.snapshots = tuple(snaps)

    cfg.x0, xline = take("shooting", "x0", None)
    if cfg.x0 is not None and len(cfg.x0) != cfg.grid_dim:
        raise ConfigError("x0 dimension does not match grid dim", xline)
    cfg.t0, tline = take("shooting", "t0", None)
    if cfg.t0 is not None and cfg.t0 <= 0:
        raise ConfigError("t0 must be positive", tline)
    cfg.eta, etline = take("shooting", "eta", None)
    if cfg.eta is not None and cfg.eta <= 0:
        raise ConfigError("eta must be positive", etline)
    cfg.kappa, kline = take("shooting", "kappa", 0.25)
    if not 0.0 < cfg.kappa < 0.5:
        raise ConfigError("kappa must be in (0, 1/2)", kline)
    cfg.shoot_tol, stline = take("shooting", "shoot_tol", 1e-3)
    if cfg.shoot_tol <= 0:
        raise ConfigError("shoot_tol must be positive", stline)
    elist, elline = take("shooting", "eps_list", ())
    for e in elist:
        _check_epsilon(e, elline)
    if any(b >= a for a, b in zip(elist, elist[1:])):
        raise ConfigError("eps_list must be strictly decreasing", elline)
    cfg.eps_list = tuple(elist)
    plist, plline = take("shooting", "points_list", ())
    if plist and len(plist) != len(elist):
        raise ConfigError("points_list length must match eps_list", plline)
    if any(p < 16 for p in plist):
        raise ConfigError("points_list entries must be >= 16", plline)
    cfg.points_list = tuple(plist)
    cfg.symmetry, symline = take("shooting", "symmetry", None)
    if cfg.symmetry is not None and cfg.symmetry not in (
            "D2", "D4", "reflection-x", "reflection-y"):
        raise ConfigError("symmetry must be one of D2, D4, reflection-x, "
                          "reflection-y", symline)
    cfg.transversal, trline = take("shooting", "transversal", None)
    if cfg.transversal is not None and len(cfg.transversal) != 4:
        raise ConfigError("transversal needs 4 numbers: x0 y0 x1 y1", trline)
    if command == "study" and not plist and cfg.grid_points is None:
        raise ConfigError("study needs points_list or grid points")

    cfg.lsf_beta, bline = take("lsf", "beta", 1e-6)
    if not 1e-8 <= cfg.lsf_beta <= 1e-4:
        raise ConfigError("beta must be in [1e-8, 1e-4]", bline)
    cfg.lsf_delta, dline = take("lsf", "delta", None)
    if cfg.lsf_delta is not None and cfg.lsf_delta <= 0:
        raise ConfigError("delta must be positive", dline)
    cfg.lsf_band, _ = take("lsf", "band", None)
    cfg.lsf_t_end, ltline = take("lsf", "t_end", None)
    if cfg.lsf_t_end is not None and cfg.lsf_t_end <= 0:
        raise ConfigError("t_end must be positive", ltline)
    lsnaps, lsline = take("lsf", "snapshots", ())
    if list(lsnaps) != sorted(lsnaps) or any(t <= 0 for t in lsnaps):
        raise ConfigError("snapshots must be positive and ascending", lsline)
    cfg.lsf_snapshots = tuple(lsnaps)

    cfg.probe_x0, pxline = take("energy", "probe_x0", None)
    if cfg.probe_x0 is not None and len(cfg.probe_x0) != cfg.grid_dim:
        raise ConfigError("probe_x0 dimension does not match grid dim",
                          pxline)
    cfg.probe_t0, _ = take("energy", "probe_t0", None)
    cfg.probe_r, prline = take("energy", "probe_r", None)
    if cfg.probe_r is not None and cfg.probe_r <= 0:
        raise ConfigError("probe_r must be positive", prline)

    if command in ("simulate", "verify", "energy") and cfg.epsilon is None:
        raise ConfigError("missing required key 'epsilon' in [ac]")
    if command == "study" and not cfg.eps_list:
        raise ConfigError("missing required key 'eps_list' in [shooting]")
    if command == "energy" and (cfg.probe_x0 is None) != (cfg.probe_r is None):
        raise ConfigError("probe_x0 and probe_r must be given together")
    return cfg
