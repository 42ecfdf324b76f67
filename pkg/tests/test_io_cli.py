from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ferroflow import cli
from ferroflow import io as fio
from ferroflow.config import ConfigError, parse_config, serialize_config
from ferroflow.model import DiagnosticsSample, Grid, State

MINIMAL = """\
# minimal run
mode = full
nx = 16
ny = 16
t_end = 0.05
dt = 0.01
tau = 0.1
"""


def test_minimal_config_gets_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid == Grid(16, 16)
    assert cfg.params.nu == 1e-2 and cfg.params.tau == 0.1
    assert cfg.stepper.cfl_number == 0.4 and cfg.snapshot_every >= 1


@pytest.mark.parametrize("text,needle", [
    (MINIMAL.replace("tau = 0.1", "tau = -1"), "tau"),
    (MINIMAL + "bogus = 3\n", "bogus"),
    (MINIMAL.replace("nx = 16", "nx = sixteen"), "nx"),
    (MINIMAL.replace("dt = 0.01\n", ""), "dt"),
    (MINIMAL.replace("tau = 0.1\n", ""), "tau"),
    (MINIMAL + "nu = 0.1\nnu = 0.2\n", "nu"),
])
def test_config_errors_name_the_key(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_unknown_key_error_names_line():
    with pytest.raises(ConfigError, match="line 8"):
        parse_config(MINIMAL + "colour = red\n")


def test_limit_mode_needs_no_tau():
    cfg = parse_config(MINIMAL.replace("mode = full", "mode = limit").replace("tau = 0.1\n", ""))
    assert cfg.params.tau is None


finite = st.floats(1e-6, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(nu=finite, tau=finite, dt=finite, c=st.complex_numbers(max_magnitude=10, allow_nan=False,
                                                                 allow_infinity=False),
       ramp=st.one_of(st.none(), finite), n=st.integers(8, 200), seed=st.integers(0, 2**31),
       adv=st.sampled_from(["upwind", "centered"]),
       frozen=st.sets(st.sampled_from(["u", "w", "kelvin"])))
def test_config_round_trip(nu, tau, dt, c, ramp, n, seed, adv, frozen):
    text = MINIMAL.replace("nx = 16", f"nx = {n}") + f"nu = {nu!r}\n"
    text = text.replace("tau = 0.1", f"tau = {tau!r}").replace("dt = 0.01", f"dt = {dt!r}")
    text += f"field_coeffs = {complex(c)!r}\nseed = {seed}\nadvection = {adv}\n"
    if ramp is not None:
        text += f"field_ramp_time = {ramp!r}\n"
    if frozen:
        text += "frozen_fields = " + ", ".join(sorted(frozen)) + "\n"
    cfg = parse_config(text)
    again = parse_config(serialize_config(cfg))
    assert again == cfg


def test_diagnostics_csv_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    fio.write_diagnostics([], path)
    assert path.read_text() == ",".join(fio.DIAGNOSTICS_COLUMNS) + "\n"
    samples = [DiagnosticsSample(0.0, 1 / 3, math.pi, 0.0, 1e-300, None, None),
               DiagnosticsSample(0.1, 2 / 7, math.e, -1e-17, 0.5, 0.25, 0.125)]
    fio.write_diagnostics(samples[:1], path)
    assert len(path.read_text().splitlines()) == 2
    assert path.read_text().splitlines()[1].endswith(",,")
    fio.write_diagnostics(samples, path)
    assert fio.read_diagnostics(path) == samples


def test_snapshot_round_trip_is_bit_exact(tmp_path):
    from ferroflow import grid_ops
    g = Grid(12, 9, lx=1.5, ly=0.75)
    r = np.random.default_rng(2)
    phi = r.standard_normal(g.shape)
    s = State(u=r.standard_normal((2,) + g.shape), w=r.standard_normal(g.shape),
              m=r.standard_normal((2,) + g.shape), h=grid_ops.grad(phi, g), phi=phi,
              p=r.standard_normal(g.shape), time=0.123456789)
    fio.write_snapshot(s, g, tmp_path / "s.bin")
    back, g2 = fio.read_snapshot(tmp_path / "s.bin")
    assert g2 == g and back.time == s.time
    for name in ("u", "w", "m", "h", "phi", "p"):
        assert np.array_equal(getattr(back, name), getattr(s, name))
    raw = (tmp_path / "s.bin").read_bytes()
    assert raw[:4] == b"FFLW" and len(raw) == 40 + 7 * 12 * 9 * 8
    # x runs fastest within a row
    first = np.frombuffer(raw, "<f8", count=2, offset=40)
    assert np.array_equal(first, s.u[0][:2, 0])


def test_snapshot_rejects_garbage(tmp_path):
    (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(60))
    with pytest.raises(ValueError):
        fio.read_snapshot(tmp_path / "x.bin")


def _write_config(tmp_path, extra=""):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL + f"output_dir = {tmp_path / 'out'}\nsnapshot_every = 2\n" + extra)
    return path


def test_cli_run_creates_outputs(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert cli.main(["run", str(path)]) == 0
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert "diagnostics.csv" in names and "config.txt" in names
    assert "snapshot_000000.bin" in names and "snapshot_000005.bin" in names
    rows = fio.read_diagnostics(out / "diagnostics.csv")
    assert len(rows) == 6 and rows[0].energy_residual == 0


def test_cli_sweep_needs_four_taus(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert cli.main(["sweep", str(path), "--taus", "0.1"]) == 2
    assert "need ≥ 4 taus" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 2
    assert cli.main(["run", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text(MINIMAL.replace("tau = 0.1", "tau = -1"))
    assert cli.main(["run", str(bad)]) == 2
    assert "tau" in capsys.readouterr().err


def test_cli_sweep_writes_report(tmp_path, capsys):
    path = _write_config(tmp_path)
    assert cli.main(["sweep", str(path), "--taus", "0.1,0.03,0.01,0.001"]) == 0
    assert (tmp_path / "out" / "sweep.csv").exists()
    assert "slope" in capsys.readouterr().out


def test_cli_check_passes_on_default_config(capsys):
    assert cli.main(["check"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5 and all(line.startswith("PASS") for line in lines)
