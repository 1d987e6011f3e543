"""Batch front door: run a config file, write plain-text artifacts.

Every artifact is deterministic text: floats at full precision, no
timestamps, no machine names, files written in a fixed order by the
main thread.  Identical configs give byte-identical output directories
at any thread count, so runs can be diffed and cached by content.

Exit codes: 0 success, 1 invalid config or violated precondition,
2 numerical abort (non-finite values or bound blowup), 3 a verification
report shows violations and --strict was requested.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from . import __version__
from .grid import write_field
from .geometry import (signed_distance, leaf_initial_data, contour_extract,
                       write_contours)
from .ac import ACParams, ACSolution, evolve, NumericalAbort, verify_solution_bounds
from .barriers import (smoothed_distance, smoothed_properties,
                       verify_residual_signs, verify_solution_barrier,
                       verify_gradient_barrier)
from .energy import total_energy_series, energy_rows, gaussian_density
from .lsf import (lsf_evolve, fattening_series, inner_outer_envelopes,
                  sandwich_check, SandwichReport)
from .shooting import FoliationSpec, bisect_leaf, diagonal_study, LeafCache
from .config import RunConfig, ConfigError, parse_config


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


class _Artifacts:
    """Collects files under one directory for the closing manifest."""

    def __init__(self, root: Path, config_text: str):
        self.root = root
        self.config_text = config_text
        self.names: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.names.append(name)
        return path

    def add_existing(self, name: str):
        self.names.append(name)

    def close(self):
        digest = hashlib.sha256(self.config_text.encode()).hexdigest()
        lines = [f"config_sha256 = {digest}",
                 f"package = fattenlab {__version__}",
                 "files:"]
        lines += [f"  {n}" for n in sorted(self.names)]
        (self.root / "manifest.txt").write_text("\n".join(lines) + "\n")


def _config_sdf(cfg: RunConfig, grid):
    if cfg.eikonal_gate is not None:
        return signed_distance(cfg.shape, grid,
                               min_eikonal_fraction=cfg.eikonal_gate)
    return signed_distance(cfg.shape, grid)


def _evolve_from_config(cfg: RunConfig) -> tuple[ACSolution, object]:
    grid = cfg.build_grid()
    sdf = _config_sdf(cfg, grid)
    u0 = leaf_initial_data(sdf, 0.0)
    params = ACParams(epsilon=cfg.epsilon, scheme=cfg.scheme, dt=cfg.dt,
                      snapshot_times=cfg.snapshots, t_end=cfg.t_end)
    return evolve(u0, params), sdf


def _energy_text(sol: ACSolution) -> str:
    try:
        return total_energy_series(sol).to_text()
    except ValueError as err:
        lines = ["columns: t total kinetic potential xi_plus"]
        for row in energy_rows(sol):
            lines.append(" ".join(_fmt(v) for v in
                                  [row.time, row.total, row.kinetic,
                                   row.potential, row.xi_plus]))
        lines.append(f"fit = unavailable ({err})")
        return "\n".join(lines) + "\n"


def _cmd_simulate(cfg: RunConfig, art: _Artifacts) -> int:
    sol, _ = _evolve_from_config(cfg)
    for k, snap in enumerate(sol.snapshots):
        base = f"u_{k:03d}"
        write_field(snap, str(art.root / base))
        art.add_existing(base + ".f64")
        art.add_existing(base + ".meta")
    art.write("energy.txt", _energy_text(sol))
    return 0


def _cmd_energy(cfg: RunConfig, art: _Artifacts) -> int:
    sol, _ = _evolve_from_config(cfg)
    art.write("energy.txt", _energy_text(sol))
    if cfg.probe_x0 is not None:
        t0 = cfg.probe_t0 if cfg.probe_t0 is not None else cfg.t_end
        probe = gaussian_density(sol, cfg.probe_x0, t0, cfg.probe_r)
        art.write("density.txt", "\n".join([
            "x0 = " + " ".join(_fmt(c) for c in probe.x0),
            "t0 = " + _fmt(probe.t0),
            "r = " + _fmt(probe.r),
            "snapshot_time = " + _fmt(probe.snapshot_time),
            "theta = " + _fmt(probe.theta)]) + "\n")
    return 0


def _cmd_verify(cfg: RunConfig, art: _Artifacts) -> int:
    sol, sdf = _evolve_from_config(cfg)
    bounds = verify_solution_bounds(sol)
    art.write("bounds.txt", bounds.to_text())
    times = [t for t in sol.requested_times if t > 0]
    bad = False
    if times:
        sd = smoothed_distance(sdf, times)
        props = smoothed_properties(sd)
        art.write("dtilde.txt", props.to_text())
        reports = verify_residual_signs(sd, cfg.epsilon)
        art.write("residuals.txt",
                  "\n".join(r.line() for r in reports) + "\n")
        bad |= not props.ok
        bad |= any(r.gated and r.violations for r in reports)
    ubar = verify_solution_barrier(sol, sdf)
    art.write("ubarrier.txt", ubar.to_text())
    gbar = verify_gradient_barrier(sol, sdf)
    art.write("gradbarrier.txt", gbar.to_text())
    bad |= (not bounds.ok) or (not ubar.ok) or (not gbar.ok)
    return 3 if (bad and cfg.strict) else 0


def _cmd_lsf(cfg: RunConfig, art: _Artifacts) -> int:
    grid = cfg.build_grid()
    sdf = _config_sdf(cfg, grid)
    sol = lsf_evolve(sdf.field, cfg.lsf_t_end, cfg.lsf_snapshots,
                     beta=cfg.lsf_beta)
    for k, snap in enumerate(sol.snapshots):
        contour = contour_extract(snap, 0.0)
        name = f"contour_{k:03d}.txt"
        write_contours(contour, str(art.root / name))
        art.add_existing(name)
    band = cfg.lsf_band if cfg.lsf_band is not None else 6.0 * grid.h
    fat = fattening_series(sol, band)
    art.write("fattening.txt", fat.to_text())
    if cfg.lsf_delta is not None:
        t_list = list(cfg.lsf_snapshots) or [cfg.lsf_t_end]
        env = inner_outer_envelopes(sdf, cfg.lsf_delta, t_list,
                                    beta=cfg.lsf_beta)
        art.write("envelopes.txt", "\n".join([
            "delta = " + _fmt(env.delta),
            "ordering_violation = " + _fmt(env.ordering_violation())]) + "\n")
    return 0


def _cmd_shoot(cfg: RunConfig, art: _Artifacts) -> int:
    grid = cfg.build_grid()
    sdf = _config_sdf(cfg, grid)
    spec = FoliationSpec(cfg.shape, cfg.eta, cfg.kappa)
    t0 = cfg.t0
    cache = LeafCache()
    res = bisect_leaf(sdf, spec, cfg.epsilon, cfg.x0, t0, cfg.shoot_tol,
                      cache)
    art.write("shooting.txt", res.to_text())
    u_star = cache.get_or_run(sdf, res.s_star, cfg.epsilon, t0)
    nodal = contour_extract(u_star, 0.0)
    write_contours(nodal, str(art.root / "nodal.txt"))
    art.add_existing("nodal.txt")
    bad = res.residual > cfg.shoot_tol
    return 3 if (bad and cfg.strict) else 0


def _study_grid_points(cfg: RunConfig) -> list[int]:
    if cfg.points_list:
        return list(cfg.points_list)
    return [cfg.grid_points] * len(cfg.eps_list)


def _cmd_study(cfg: RunConfig, art: _Artifacts) -> int:
    points = _study_grid_points(cfg)
    grids = [(eps, cfg.build_grid(n))
             for eps, n in zip(cfg.eps_list, points)]
    spec = FoliationSpec(cfg.shape, cfg.eta, cfg.kappa)
    study = diagonal_study(spec, grids, cfg.x0, cfg.t0, cfg.shoot_tol,
                           threads=cfg.threads,
                           symmetry_group=cfg.symmetry,
                           transversal=cfg.transversal,
                           eikonal_gate=cfg.eikonal_gate)

    lines = ["columns: eps s_star residual iters nodal_dist two_h "
             "local_mass mass_floor symmetry_dev"]
    for e in study.entries:
        r = e.result
        lines.append(" ".join(_fmt(v) for v in
                              [e.epsilon, r.s_star, r.residual])
                     + f" {r.iterations} "
                     + " ".join(_fmt(v) for v in
                                [e.nodal_origin_distance, 2.0 * e.grid.h,
                                 e.local_mass, e.local_mass_floor])
                     + " " + (_fmt(e.symmetry_dev)
                              if e.symmetry_dev is not None else "none"))
    lines.append("hausdorff = " + (" ".join(_fmt(d) for d in study.hausdorff)
                                   if study.hausdorff else "none"))
    lines.append("failure = " + (study.failure or "none"))
    art.write("study.txt", "\n".join(lines) + "\n")

    for e in study.entries:
        sub = f"eps_{e.epsilon:g}"
        art.write(f"{sub}/shooting.txt", e.result.to_text())
        name = f"{sub}/nodal.txt"
        (art.root / sub).mkdir(parents=True, exist_ok=True)
        write_contours(e.nodal, str(art.root / name))
        art.add_existing(name)
        if e.multiplicity is not None:
            art.write(f"{sub}/multiplicity.txt", e.multiplicity.to_text())

    bad = study.failure is not None or not study.ok

    if study.entries:
        delta = (cfg.lsf_delta if cfg.lsf_delta is not None
                 else 0.5 * cfg.eta)
        env_grid = study.entries[-1].grid
        env_sdf = _config_sdf(cfg, env_grid)
        env = inner_outer_envelopes(env_sdf, delta, [cfg.t0],
                                    beta=cfg.lsf_beta)
        report = SandwichReport([
            sandwich_check(e.nodal, env, cfg.t0, tolerance=2.0 * e.grid.h,
                           label=f"eps={e.epsilon:g}")
            for e in study.entries])
        art.write("sandwich.txt",
                  "delta = " + _fmt(delta) + "\n" + report.to_text())
        bad |= not report.ok
    return 3 if (bad and cfg.strict) else 0


_DISPATCH = {
    "simulate": _cmd_simulate,
    "shoot": _cmd_shoot,
    "study": _cmd_study,
    "verify": _cmd_verify,
    "energy": _cmd_energy,
    "lsf": _cmd_lsf,
}


def run(cfg: RunConfig, config_text: str, out_root: Path) -> int:
    """Dispatch one validated config; returns the process exit code."""
    art = _Artifacts(out_root, config_text)
    out_root.mkdir(parents=True, exist_ok=True)
    try:
        code = _DISPATCH[cfg.command](cfg, art)
    except NumericalAbort as err:
        art.write("abort.txt", f"numerical abort: {err}\n")
        art.close()
        print(f"numerical abort: {err}", file=sys.stderr)
        return 2
    except (ValueError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    art.close()
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fattenlab",
        description="Phase-field interface laboratory batch runner.")
    parser.add_argument("command", choices=sorted(_DISPATCH),
                        help="which pipeline to run (must match the config)")
    parser.add_argument("--config", required=True,
                        help="path to the run configuration file")
    parser.add_argument("--strict", action="store_true",
                        help="exit 3 when a verification report has "
                             "violations")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallel workers for independent sub-runs")
    parser.add_argument("--output", default=None,
                        help="override the configured output directory")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(text)
        if cfg.command != args.command:
            raise ConfigError(
                f"config declares command {cfg.command!r}, "
                f"invoked as {args.command!r}")
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg.threads = args.threads
        if args.strict:
            cfg.strict = True
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    out_root = Path(args.output if args.output is not None else cfg.output)
    return run(cfg, text, out_root)


if __name__ == "__main__":
    sys.exit(main())
