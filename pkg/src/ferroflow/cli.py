"""Command-line entry point: ``ferroflow run|sweep|check``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .checks import run_checks
from .config import ConfigError, default_config, parse_config, serialize_config
from .diagnostics import DiagnosticsRecorder
from .dynamics import SimulationError, run
from .experiments import initial_state, relaxation_sweep

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _output_dir(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    config = _load(args.config)
    out = _output_dir(config)
    (out / "config.txt").write_text(serialize_config(config))
    recorder = DiagnosticsRecorder(config.params, config.grid, every=config.diagnostics_every)
    grid = config.grid

    def snapshot(step, state):
        if step % config.snapshot_every == 0:
            io.write_snapshot(state, grid, out / f"snapshot_{step:06d}.bin")

    traj = run(initial_state(config), config.params, grid, config.stepper,
               callbacks=[recorder, snapshot], sample_every=None)
    last = traj.steps[-1]
    if last % config.snapshot_every:
        io.write_snapshot(traj.final, grid, out / f"snapshot_{last:06d}.bin")
    io.write_diagnostics(recorder.close(), out / "diagnostics.csv")
    print(f"{last} steps to t={traj.final.time:.6g}; output in {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        taus = [float(t) for t in args.taus.split(",") if t.strip()]
    except ValueError:
        raise UsageError("--taus must be a comma-separated list of numbers") from None
    if len(taus) < 4:
        raise UsageError("need ≥ 4 taus")
    config = _load(args.config)
    if config.mode == "limit":
        raise UsageError("sweep needs a full-system config")
    try:
        report = relaxation_sweep(config, taus)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _output_dir(config)
    report.write_csv(out / "sweep.csv")
    for e in report.entries:
        print(f"tau={e.tau:.3e}  sup sqrt(E)={e.sup_sqrt_entropy:.4e}  "
              f"final sqrt(E)={e.final_sqrt_entropy:.4e}  int D~={e.int_rel_dissipation:.4e}")
    print(f"slope {report.fitted_slope:.4f}  r^2 {report.fit_r_squared:.4f}")
    return EXIT_OK


def cmd_check(args) -> int:
    config = _load(args.config) if args.config else default_config()
    results = run_checks(config)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ferroflow", description="2D ferrofluid flow solver")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="relaxation-limit sweep over tau")
    p.add_argument("config")
    p.add_argument("--taus", required=True, help="comma-separated relaxation times")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("check", help="run the verification battery")
    p.add_argument("config", nargs="?")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ferroflow: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"ferroflow: simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
