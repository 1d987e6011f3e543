"""Config parsing/validation and the batch command-line front door."""

import hashlib

import pytest
from hypothesis import given, settings, strategies as st

from fattenlab import cli
from fattenlab.ac import NumericalAbort
from fattenlab.config import ConfigError, RunConfig, parse_config
from fattenlab.geometry import Circle, FigureEight, KochFlake

MINIMAL_SIMULATE = """\
[run]
command = simulate
output = out

[shape]
kind = circle

[grid]
points = 64

[ac]
epsilon = 0.3
t_end = 0.001
"""


def err_text(text: str) -> str:
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    return str(exc.value)


def test_parse_minimal_simulate():
    cfg = parse_config(MINIMAL_SIMULATE)
    assert cfg.command == "simulate"
    assert cfg.output == "out"
    assert isinstance(cfg.shape, Circle)
    assert cfg.shape.radius == 0.4  # default
    assert cfg.grid_points == 64
    assert cfg.epsilon == 0.3
    assert cfg.t_end == 0.001
    assert cfg.threads == 1 and not cfg.strict
    assert cfg.scheme == "explicit"
    grid = cfg.build_grid()
    assert grid.points_per_axis == 64
    assert grid.boundary.kind == "farfield"


def test_comments_and_blank_lines_ignored():
    text = MINIMAL_SIMULATE.replace("epsilon = 0.3",
                                    "# full-width comment\n"
                                    "epsilon = 0.3  # trailing comment\n")
    assert parse_config(text).epsilon == 0.3


def test_epsilon_range_reports_line_number():
    text = MINIMAL_SIMULATE.replace("epsilon = 0.3", "epsilon = 1.5")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "epsilon must be in (0,1)" in str(exc.value)
    assert exc.value.line == 12  # the epsilon line of the template
    assert str(exc.value).startswith("line 12:")


def test_low_level_format_errors_carry_line_numbers():
    assert "line 1: unknown section [nope]" in err_text("[nope]\n")
    assert "line 1: key outside any [section]" in err_text("a = b\n")
    assert "line 2: expected key = value" in err_text("[run]\nbare\n")
    assert "unknown key 'radius' in [run]" in err_text(
        "[run]\nradius = 1\n")
    assert "duplicate section [run]" in err_text("[run]\n[run]\n")
    assert "duplicate key 'command' in [run]" in err_text(
        "[run]\ncommand = shoot\ncommand = shoot\n")
    assert "cannot parse epsilon value 'abc' as float" in err_text(
        MINIMAL_SIMULATE.replace("epsilon = 0.3", "epsilon = abc"))
    assert "cannot parse strict value 'maybe' as bool" in err_text(
        MINIMAL_SIMULATE.replace("command = simulate",
                                 "command = simulate\nstrict = maybe"))


def test_command_level_requirements():
    assert "missing [run] section with a command key" in err_text("")
    assert "unknown command 'explode'" in err_text(
        MINIMAL_SIMULATE.replace("command = simulate", "command = explode"))
    assert "missing required key 'output' in [run]" in err_text(
        MINIMAL_SIMULATE.replace("output = out\n", ""))
    assert "command 'shoot' needs section [shooting]" in err_text(
        MINIMAL_SIMULATE.replace("command = simulate", "command = shoot"))
    shoot = MINIMAL_SIMULATE.replace("command = simulate", "command = shoot")
    shoot += "\n[shooting]\nx0 = 0.4, 0.0\nt0 = 0.002\n"
    assert "missing required key 'eta' in [shooting]" in err_text(shoot)
    assert "missing required key 'epsilon' in [ac]" in err_text(
        MINIMAL_SIMULATE.replace("epsilon = 0.3\n", ""))


def test_value_validation():
    def swap(old, new, base=MINIMAL_SIMULATE):
        return base.replace(old, new)

    assert "threads must be >= 1" in err_text(
        swap("command = simulate", "command = simulate\nthreads = 0"))
    assert "scheme must be explicit or semi-implicit" in err_text(
        swap("epsilon = 0.3", "epsilon = 0.3\nscheme = magic"))
    assert "dim must be 2 or 3" in err_text(
        swap("points = 64", "points = 64\ndim = 4"))
    assert "points must be >= 16" in err_text(swap("points = 64",
                                                   "points = 8"))
    assert "hi must exceed lo" in err_text(
        swap("points = 64", "points = 64\nlo = 1.0\nhi = -1.0"))
    assert "snapshots must be positive and ascending" in err_text(
        swap("t_end = 0.001", "t_end = 0.001\nsnapshots = 0.002, 0.001"))
    assert "dt must be positive" in err_text(
        swap("t_end = 0.001", "t_end = 0.001\ndt = -1"))
    assert "radius must be positive" in err_text(
        swap("kind = circle", "kind = circle\nradius = -0.1"))
    assert "unknown shape kind 'blob'" in err_text(swap("kind = circle",
                                                        "kind = blob"))
    assert "center needs 2 coordinates" in err_text(
        swap("kind = circle", "kind = circle\ncenter = 0.0, 0.0, 0.0"))


def test_shooting_and_probe_validation():
    base = MINIMAL_SIMULATE.replace("command = simulate", "command = shoot")
    base += "\n[shooting]\nx0 = 0.4, 0.0\nt0 = 0.002\neta = 0.15\n"
    assert parse_config(base).eta == 0.15

    assert "kappa must be in (0, 1/2)" in err_text(base + "kappa = 0.7\n")
    assert "shoot_tol must be positive" in err_text(
        base + "shoot_tol = 0\n")
    assert "x0 dimension does not match grid dim" in err_text(
        base.replace("x0 = 0.4, 0.0", "x0 = 0.4, 0.0, 0.0"))
    assert "eps_list must be strictly decreasing" in err_text(
        base + "eps_list = 0.1, 0.2\n")
    assert "epsilon must be in (0,1)" in err_text(base + "eps_list = 2.0\n")
    assert "points_list length must match eps_list" in err_text(
        base + "eps_list = 0.2, 0.1\npoints_list = 64\n")
    assert "symmetry must be one of" in err_text(base + "symmetry = D3\n")
    assert "transversal needs 4 numbers" in err_text(
        base + "transversal = 0, 0\n")

    study = base.replace("command = shoot", "command = study")
    study = study.replace("points = 64\n", "")
    assert "missing required key 'eps_list' in [shooting]" in err_text(study)
    assert "study needs points_list or grid points" in err_text(
        study + "eps_list = 0.2, 0.1\n")

    energy = MINIMAL_SIMULATE.replace("command = simulate",
                                      "command = energy")
    assert "probe_x0 and probe_r must be given together" in err_text(
        energy + "\n[energy]\nprobe_x0 = 0.0, 0.0\n")
    assert "probe_r must be positive" in err_text(
        energy + "\n[energy]\nprobe_x0 = 0.0, 0.0\nprobe_r = -1\n")


def test_lsf_and_boundary_validation():
    lsf = MINIMAL_SIMULATE.replace("command = simulate", "command = lsf")
    lsf += "\n[lsf]\nt_end = 0.002\n"
    cfg = parse_config(lsf)
    assert cfg.lsf_t_end == 0.002 and cfg.lsf_beta == 1e-6
    assert "beta must be in [1e-8, 1e-4]" in err_text(lsf + "beta = 1.0\n")
    assert "delta must be positive" in err_text(lsf + "delta = 0\n")
    assert "must be positive and ascending" in err_text(
        lsf + "snapshots = -0.001\n")
    bad_val = MINIMAL_SIMULATE.replace(
        "points = 64", "points = 64\nboundary_value = 0.5")
    with pytest.raises(ConfigError):
        parse_config(bad_val)
    per = MINIMAL_SIMULATE.replace("points = 64",
                                   "points = 64\nboundary = periodic")
    assert parse_config(per).boundary.kind == "periodic"


def test_shape_kinds():
    f8 = MINIMAL_SIMULATE.replace("kind = circle",
                                  "kind = figure_eight\nradius = 0.25")
    shape = parse_config(f8).shape
    assert isinstance(shape, FigureEight) and shape.radius == 0.25
    koch = MINIMAL_SIMULATE.replace(
        "kind = circle", "kind = koch_flake\niterations = 3\nside = 0.2")
    shape = parse_config(koch).shape
    assert isinstance(shape, KochFlake)
    assert shape.iterations == 3 and shape.side == 0.2


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="[]ru n=comadsimulte.013\n#", max_size=200))
def test_fuzzed_text_parses_or_complains(text):
    # arbitrary text must either parse to a config or raise ConfigError;
    # no other exception type may escape
    try:
        cfg = parse_config(text)
    except ConfigError:
        return
    assert isinstance(cfg, RunConfig)


# ---------------------------------------------------------------------------
# command line

SHOOT_CFG = """\
[run]
command = shoot
output = {out}

[shape]
kind = circle
radius = 0.4

[grid]
points = 128

[ac]
epsilon = 0.08

[shooting]
x0 = 0.4, 0.0
t0 = 0.002
eta = 0.15
shoot_tol = 0.001
"""

SIMULATE_CFG = """\
[run]
command = simulate
output = {out}

[shape]
kind = circle
radius = 0.4

[grid]
points = 64

[ac]
epsilon = 0.3
t_end = 0.002
snapshots = 0.001, 0.002
"""


def write_cfg(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def artifact_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in root.rglob("*") if p.is_file()}


def test_cli_invalid_config_exits_1(tmp_path, capsys):
    out = tmp_path / "out"
    bad = SIMULATE_CFG.format(out=out).replace("epsilon = 0.3",
                                               "epsilon = 1.5")
    path = write_cfg(tmp_path, "bad.cfg", bad)
    assert cli.main(["simulate", "--config", str(path)]) == 1
    assert not out.exists()  # nothing written for a rejected config
    assert "epsilon must be in (0,1)" in capsys.readouterr().err


def test_cli_command_mismatch_exits_1(tmp_path, capsys):
    path = write_cfg(tmp_path, "sim.cfg",
                     SIMULATE_CFG.format(out=tmp_path / "out"))
    assert cli.main(["verify", "--config", str(path)]) == 1
    assert "config declares command 'simulate'" in capsys.readouterr().err


def test_cli_unreadable_config_exits_1(tmp_path, capsys):
    missing = tmp_path / "absent.cfg"
    assert cli.main(["simulate", "--config", str(missing)]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_cli_bad_thread_override_exits_1(tmp_path):
    path = write_cfg(tmp_path, "sim.cfg",
                     SIMULATE_CFG.format(out=tmp_path / "out"))
    assert cli.main(["simulate", "--config", str(path), "--threads", "0"]) == 1


def test_cli_simulate_writes_manifest_and_fields(tmp_path):
    out = tmp_path / "out"
    text = SIMULATE_CFG.format(out=out)
    path = write_cfg(tmp_path, "sim.cfg", text)
    assert cli.main(["simulate", "--config", str(path)]) == 0
    files = artifact_bytes(out)
    assert set(files) == {"energy.txt", "manifest.txt", "u_000.f64",
                          "u_000.meta", "u_001.f64", "u_001.meta"}
    manifest = files["manifest.txt"].decode()
    digest = hashlib.sha256(text.encode()).hexdigest()
    assert manifest.splitlines()[0] == f"config_sha256 = {digest}"
    listed = [l.strip() for l in manifest.splitlines()
              if l.startswith("  ")]
    assert listed == sorted(listed)
    assert "manifest.txt" not in listed
    # two snapshots cannot support the four-point decay fit
    assert "fit = unavailable" in files["energy.txt"].decode()


def test_cli_simulate_byte_identical_reruns(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    path = write_cfg(tmp_path, "sim.cfg", SIMULATE_CFG.format(out=out_a))
    assert cli.main(["simulate", "--config", str(path)]) == 0
    # same config rerun into a second directory via the override
    assert cli.main(["simulate", "--config", str(path),
                     "--output", str(out_b)]) == 0
    assert artifact_bytes(out_a) == artifact_bytes(out_b)


def test_cli_shoot_exit_codes_and_artifacts(tmp_path):
    out = tmp_path / "out"
    path = write_cfg(tmp_path, "shoot.cfg", SHOOT_CFG.format(out=out))
    assert cli.main(["shoot", "--config", str(path)]) == 0
    files = artifact_bytes(out)
    assert set(files) == {"manifest.txt", "nodal.txt", "shooting.txt"}
    shooting = files["shooting.txt"].decode()
    residual = float([l for l in shooting.splitlines()
                      if l.startswith("residual = ")][0].split("=")[1])
    # the staircase floor on this grid leaves the residual above the
    # requested tolerance, so the strict rerun must signal it
    assert residual > 1e-3
    assert cli.main(["shoot", "--config", str(path), "--strict"]) == 3


def test_cli_verify_strict_signals_violations(tmp_path):
    out = tmp_path / "out"
    text = """\
[run]
command = verify
output = {out}

[shape]
kind = circle
radius = 0.4

[grid]
points = 64

[ac]
epsilon = 0.3
t_end = 0.001
snapshots = 0.0005, 0.001
""".format(out=out)
    path = write_cfg(tmp_path, "verify.cfg", text)
    assert cli.main(["verify", "--config", str(path)]) == 0
    files = artifact_bytes(out)
    assert {"bounds.txt", "dtilde.txt", "residuals.txt", "ubarrier.txt",
            "gradbarrier.txt", "manifest.txt"} == set(files)
    # this grid is too coarse for the smoothed-distance caloric budget,
    # which only the strict rerun escalates into the exit code
    assert cli.main(["verify", "--config", str(path), "--strict"]) == 3


def test_cli_energy_probe_artifact(tmp_path):
    out = tmp_path / "out"
    text = """\
[run]
command = energy
output = {out}

[shape]
kind = circle
radius = 0.4

[grid]
points = 64

[ac]
epsilon = 0.3
t_end = 0.002
snapshots = 0.0004, 0.002

[energy]
probe_x0 = 0.0, 0.0
probe_t0 = 0.002
probe_r = 0.04
""".format(out=out)
    path = write_cfg(tmp_path, "energy.cfg", text)
    assert cli.main(["energy", "--config", str(path)]) == 0
    density = (out / "density.txt").read_text()
    theta = float([l for l in density.splitlines()
                   if l.startswith("theta = ")][0].split("=")[1])
    # the probe ball sits far from the interface: negligible density
    assert theta < 1e-6


def test_cli_lsf_artifacts(tmp_path):
    out = tmp_path / "out"
    text = """\
[run]
command = lsf
output = {out}

[shape]
kind = circle
radius = 0.4

[grid]
points = 64

[lsf]
t_end = 0.002
snapshots = 0.001, 0.002
delta = 0.05
""".format(out=out)
    path = write_cfg(tmp_path, "lsf.cfg", text)
    assert cli.main(["lsf", "--config", str(path)]) == 0
    files = artifact_bytes(out)
    assert {"contour_000.txt", "contour_001.txt", "envelopes.txt",
            "fattening.txt", "manifest.txt"} == set(files)
    assert "ordering_violation = " in files["envelopes.txt"].decode()


def test_cli_numerical_abort_exits_2(tmp_path, capsys, monkeypatch):
    # the dispatch wrapper maps a numerical abort to exit 2 and records
    # the reason as an artifact next to the manifest
    out = tmp_path / "out"
    path = write_cfg(tmp_path, "sim.cfg", SIMULATE_CFG.format(out=out))

    def blow_up(cfg, art):
        raise NumericalAbort("sup 25 exceeds bound 2 at t = 0.001")

    monkeypatch.setitem(cli._DISPATCH, "simulate", blow_up)
    assert cli.main(["simulate", "--config", str(path)]) == 2
    assert "numerical abort" in capsys.readouterr().err
    assert (out / "abort.txt").read_text().startswith("numerical abort:")
    assert (out / "manifest.txt").exists()
