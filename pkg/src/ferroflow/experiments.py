"""Initial data, the relaxation-limit sweep, rate fitting and self-convergence."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import diagnostics as dg
from .config import RunConfig
from .dynamics import SimulationError, project, run
from .magnetostatics import solve_limit_potential, solve_potential
from .model import Grid, LimitState, State


# --- initial data --------------------------------------------------------------


def vortex_pair(grid: Grid, amplitude: float) -> np.ndarray:
    """Counter-rotating vortex pair, projected so it is discretely divergence-free.

    Built from the stream function sin^2(pi x) sin^2(pi y) sin(2 pi y), which
    vanishes with its gradient on the walls; ``amplitude`` is the largest
    speed before projection.
    """
    X, Y = grid.mesh()
    a, b = np.pi / grid.lx, np.pi / grid.ly
    sx, cx = np.sin(a * X), np.cos(a * X)
    sy, cy = np.sin(b * Y), np.cos(b * Y)
    gy = sy**2 * np.sin(2 * b * Y)
    dgy = 2 * b * sy * cy * np.sin(2 * b * Y) + 2 * b * sy**2 * np.cos(2 * b * Y)
    u = np.stack([sx**2 * dgy, -2 * a * sx * cx * gy])
    peak = np.max(np.hypot(u[0], u[1]))
    u, _ = project(amplitude * u / peak, grid)
    return u


def spin_bump(grid: Grid, amplitude: float) -> np.ndarray:
    X, Y = grid.mesh()
    w = amplitude * np.sin(np.pi * X / grid.lx) ** 2 * np.sin(np.pi * Y / grid.ly) ** 2
    return w * grid.interior_mask()


def smooth_perturbation(grid: Grid, seed: int, modes: int = 3) -> np.ndarray:
    """Seeded smooth vector field with unit L2 norm (low cosine modes)."""
    rng = np.random.default_rng(seed)
    X, Y = grid.mesh()
    xi = np.zeros((2,) + grid.shape)
    for c in range(2):
        for k in range(modes + 1):
            for l in range(modes + 1):
                amp = rng.standard_normal() / (1 + k * k + l * l)
                xi[c] += amp * np.cos(k * np.pi * X / grid.lx) * np.cos(l * np.pi * Y / grid.ly)
    return xi / math.sqrt(dg.integral(xi * xi, grid))


def matched_initial_data(config: RunConfig, tau: float | None = None):
    """Full-system and limit-system initial states for the same flow.

    The limit state has H0 = P h_a / (1 + kappa0).  The full state has the
    same velocity and spin and m0 = kappa0 H0 + m_perturbation sqrt(tau) xi
    with a fixed unit-norm ``xi``, so the relative entropy at t = 0 is O(tau).
    Returns ``(state, limit_state)``; ``state`` is None in limit mode.
    """
    grid, p = config.grid, config.params
    tau = p.tau if tau is None else tau
    u = vortex_pair(grid, config.u_amplitude)
    w = spin_bump(grid, config.w_amplitude)
    h_a = p.applied_field.on_grid(grid, 0.0)
    method, tol = config.stepper.poisson_method, config.stepper.poisson_tol
    Phi, H, _ = solve_limit_potential(h_a, p.kappa0, grid, tol=tol, method=method)
    zero = np.zeros(grid.shape)
    limit = LimitState(U=u, W=w, H=H, Phi=Phi, P=zero, kappa0=p.kappa0)
    if tau is None:
        return None, limit
    m = p.kappa0 * H + config.m_perturbation * math.sqrt(tau) * smooth_perturbation(grid, config.seed)
    phi, h, _ = solve_potential(m, h_a, grid, tol=tol, method=method)
    return State(u=u, w=w, m=m, h=h, phi=phi, p=zero), limit


def initial_state(config: RunConfig):
    state, limit = matched_initial_data(config)
    return limit if config.mode == "limit" else state


# --- rate fitting ---------------------------------------------------------------


def fit_rate(points: Sequence[tuple[float, float]], log_log: bool = True):
    """Least-squares line through ``points``; returns (slope, intercept, r^2)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if log_log:
        if np.any(x <= 0) or np.any(y <= 0):
            raise ValueError("log-log fit needs positive coordinates")
        x, y = np.log(x), np.log(y)
    if len(np.unique(x)) < 2:
        raise ValueError("fewer than 2 distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


# --- relaxation sweep -----------------------------------------------------------


@dataclass(frozen=True)
class SweepEntry:
    tau: float
    sup_sqrt_entropy: float
    final_sqrt_entropy: float
    int_rel_dissipation: float


@dataclass(frozen=True)
class SweepReport:
    entries: list[SweepEntry] = field(default_factory=list)
    fitted_slope: float = math.nan
    intercept: float = math.nan
    fit_r_squared: float = math.nan

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["tau", "sup_sqrt_E", "final_sqrt_E", "int_Dtilde"])
            for e in self.entries:
                writer.writerow([f"{v:.17g}" for v in (e.tau, e.sup_sqrt_entropy,
                                                        e.final_sqrt_entropy, e.int_rel_dissipation)])
            writer.writerow(["# slope", f"{self.fitted_slope:.17g}",
                             "r_squared", f"{self.fit_r_squared:.17g}"])


def worker_count() -> int:
    """Worker processes allowed by ``FERROFLOW_THREADS`` (0 or unset = all cores)."""
    try:
        n = int(os.environ.get("FERROFLOW_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def limit_trajectory(config: RunConfig):
    _, limit = matched_initial_data(config, tau=None)
    params = config.params.with_(tau=None)
    return run(limit, params, config.grid, config.stepper, sample_every=1)


def compare_to_limit(config: RunConfig, tau: float, limit_states) -> SweepEntry:
    """Run the full system at ``tau`` against a stored limit trajectory."""
    params = config.params.with_(tau=tau)
    state, _ = matched_initial_data(config, tau)
    grid = config.grid
    rel, rel_d, times = [], [], []

    def compare(step, s):
        ref = limit_states[step]
        rel.append(dg.relative_entropy(s, ref, params, grid))
        rel_d.append(dg.relative_dissipation(s, ref, params, grid))
        times.append(s.time)

    run(state, params, grid, config.stepper, callbacks=[compare], sample_every=None)
    rel = np.sqrt(np.asarray(rel))
    int_d = float(np.sum(0.5 * (np.array(rel_d[1:]) + rel_d[:-1]) * np.diff(times)))
    return SweepEntry(tau=tau, sup_sqrt_entropy=float(rel.max()),
                      final_sqrt_entropy=float(rel[-1]), int_rel_dissipation=int_d)


def _sweep_one(args):
    config, tau, limit_states = args
    try:
        return compare_to_limit(config, tau, limit_states)
    except SimulationError as exc:
        raise SimulationError(f"tau={tau!r}: {exc}") from exc


def relaxation_sweep(base_config: RunConfig, taus: Sequence[float],
                     workers: int | None = None) -> SweepReport:
    """Distance between full-system and limit solutions as tau decreases.

    Every run shares the grid, time step and initial flow of ``base_config``.
    The error metric is the largest square root of the relative entropy over
    all time steps; its log-log slope against tau is fitted.
    """
    taus = sorted((float(t) for t in taus), reverse=True)
    if len(taus) < 4:
        raise ValueError("need >= 4 taus")
    if any(not t > 0 for t in taus):
        raise ValueError("taus must be > 0")
    if taus[0] / taus[-1] < 100 * (1 - 1e-12):
        raise ValueError("taus must span at least two decades")
    limit_states = limit_trajectory(base_config).states
    jobs = [(base_config, t, limit_states) for t in taus]
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            entries = list(pool.map(_sweep_one, jobs))
    else:
        entries = [_sweep_one(job) for job in jobs]
    slope, intercept, r2 = fit_rate([(e.tau, e.sup_sqrt_entropy) for e in entries])
    return SweepReport(entries=entries, fitted_slope=slope, intercept=intercept, fit_r_squared=r2)


# --- self-convergence ----------------------------------------------------------


def _restrict(f, factor):
    """Average ``factor x factor`` blocks of the last two axes."""
    *lead, nx, ny = f.shape
    return f.reshape(*lead, nx // factor, factor, ny // factor, factor).mean(axis=(-3, -1))


def self_convergence(config: RunConfig, levels: int = 3, fields=("u", "w", "m")):
    """Observed order from runs on successively halved (h, dt).

    Each level halves both the cell size and the time step.  Finer solutions
    are block-averaged onto the coarsest grid, and the order is
    ``log2(|q1 - q0| / |q2 - q1|)`` for consecutive differences in L2.
    Returns ``(orders, differences)``.
    """
    if levels < 3:
        raise ValueError("levels must be >= 3")
    finals = []
    for k in range(levels):
        f = 2**k
        cfg = config.replace(grid=Grid(config.grid.nx * f, config.grid.ny * f,
                                       config.grid.lx, config.grid.ly),
                             params=config.params.with_(dt=config.params.dt / f))
        state = initial_state(cfg)
        traj = run(state, cfg.params, cfg.grid, cfg.stepper, sample_every=None)
        fin = traj.final
        if isinstance(fin, LimitState):
            fin = fin.as_state()
        finals.append(np.concatenate([np.atleast_3d(_restrict(getattr(fin, name), f)).reshape(
            -1, config.grid.nx, config.grid.ny) for name in fields]))
    coarse = config.grid
    diffs = [math.sqrt(dg.integral((finals[k + 1] - finals[k]) ** 2, coarse))
             for k in range(levels - 1)]
    orders = [math.log2(diffs[k] / diffs[k + 1]) if diffs[k + 1] > 0 else math.inf
              for k in range(levels - 2)]
    return orders, diffs
