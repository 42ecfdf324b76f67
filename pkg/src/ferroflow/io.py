"""Diagnostics CSV and binary snapshot files."""

from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from . import grid_ops
from .model import DiagnosticsSample, Grid, LimitState, State

DIAGNOSTICS_COLUMNS = ("time", "energy", "dissipation", "energy_residual",
                       "m_l2_residual", "rel_entropy", "rel_dissipation")

SNAPSHOT_MAGIC = b"FFLW"
SNAPSHOT_VERSION = 1
# magic, version, nx, ny, lx, ly, time
_HEADER = struct.Struct("<4sIIIddd")


def _fmt(value) -> str:
    return "" if value is None else f"{value:.17g}"


def write_diagnostics(samples: Iterable[DiagnosticsSample], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTICS_COLUMNS)
        for s in samples:
            writer.writerow([_fmt(getattr(s, name)) for name in DIAGNOSTICS_COLUMNS])


def read_diagnostics(path) -> list[DiagnosticsSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != DIAGNOSTICS_COLUMNS:
            raise ValueError(f"unexpected diagnostics header {header}")
        return [DiagnosticsSample(**{name: (float(v) if v != "" else None)
                                     for name, v in zip(DIAGNOSTICS_COLUMNS, row)})
                for row in reader]


def write_snapshot(state, grid: Grid, path) -> None:
    """Write a state as little-endian float64 fields.

    Each field is stored row-major with one row per y level (x fastest), in
    the order u_x, u_y, w, m_x, m_y, phi, p.  A limit state is written with
    m = kappa0 H.
    """
    if isinstance(state, LimitState):
        state = state.as_state()
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.nx, grid.ny,
                          grid.lx, grid.ly, state.time)
    fields = (state.u[0], state.u[1], state.w, state.m[0], state.m[1], state.phi, state.p)
    with open(path, "wb") as fh:
        fh.write(header)
        for f in fields:
            fh.write(np.ascontiguousarray(f.T, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[State, Grid]:
    """Read a snapshot; ``h`` is rebuilt as the gradient of ``phi``."""
    data = Path(path).read_bytes()
    magic, version, nx, ny, lx, ly, time = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError("not a snapshot file")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    grid = Grid(nx, ny, lx, ly)
    n = nx * ny
    expected = _HEADER.size + 7 * n * 8
    if len(data) != expected:
        raise ValueError(f"snapshot has {len(data)} bytes, expected {expected}")
    raw = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    ux, uy, w, mx, my, phi, p = (raw[k * n:(k + 1) * n].reshape(ny, nx).T.copy() for k in range(7))
    state = State(u=np.stack([ux, uy]), w=w, m=np.stack([mx, my]),
                  h=grid_ops.grad(phi, grid), phi=phi, p=p, time=time)
    return state, grid
