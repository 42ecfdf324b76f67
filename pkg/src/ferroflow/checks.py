"""Built-in verification battery behind ``ferroflow check``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import diagnostics as dg
from . import forces, grid_ops
from .config import RunConfig
from .dynamics import StepperConfig, run
from .experiments import initial_state
from .magnetostatics import solve_potential
from .model import Grid, Params, State


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def observed_orders(errors) -> list[float]:
    return [math.log2(a / b) for a, b in zip(errors[:-1], errors[1:])]


def _l2(f, grid):
    return math.sqrt(dg.integral(np.square(f), grid))


def _test_field(grid):
    X, Y = grid.mesh()
    s = np.sin(2 * X + 0.5) * np.cos(3 * Y - 0.2) + X * Y**2
    sx = 2 * np.cos(2 * X + 0.5) * np.cos(3 * Y - 0.2) + Y**2
    sy = -3 * np.sin(2 * X + 0.5) * np.sin(3 * Y - 0.2) + 2 * X * Y
    return s, np.stack([sx, sy])


def operator_errors(sizes=(32, 64, 128)) -> dict[str, list[float]]:
    """Max-norm errors of the discrete operators on manufactured fields."""
    errs: dict[str, list[float]] = {"grad": [], "div": [], "curl": [], "laplacian": []}
    for n in sizes:
        g = Grid(n, n)
        X, Y = g.mesh()
        s, gs = _test_field(g)
        errs["grad"].append(np.max(np.abs(grid_ops.grad(s, g) - gs)))
        v = np.stack([np.sin(X) * np.cos(2 * Y), np.exp(X) * Y])
        div_exact = np.cos(X) * np.cos(2 * Y) + np.exp(X)
        curl_exact = np.exp(X) * Y + 2 * np.sin(X) * np.sin(2 * Y)
        errs["div"].append(np.max(np.abs(grid_ops.div(v, g) - div_exact)))
        errs["curl"].append(np.max(np.abs(grid_ops.curl_vec(v, g) - curl_exact)))
        q = np.cos(np.pi * X) * np.cos(2 * np.pi * Y)
        lap_exact = -5 * np.pi**2 * q
        errs["laplacian"].append(np.max(np.abs(grid_ops.laplacian(q, g, "neumann") - lap_exact)))
    return errs


def check_operators() -> CheckResult:
    errs = operator_errors()
    orders = {k: min(observed_orders(v)) for k, v in errs.items()}
    ok = all(o >= 1.8 for o in orders.values())
    return CheckResult("operator orders", ok,
                       ", ".join(f"{k} {o:.2f}" for k, o in orders.items()))


def poisson_errors(sizes=(32, 64, 128)) -> list[float]:
    """L2 potential error for m = grad psi, psi = cos(pi x) cos(pi y), h_a = 0."""
    errs = []
    for n in sizes:
        g = Grid(n, n)
        X, Y = g.mesh()
        psi = np.cos(np.pi * X) * np.cos(np.pi * Y)
        m = np.stack([-np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y),
                      -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)])
        phi, _, _ = solve_potential(m, np.zeros_like(m), g, method="exact")
        exact = -(psi - psi.mean())
        errs.append(_l2(phi - exact, g))
    return errs


def check_poisson() -> CheckResult:
    order = min(observed_orders(poisson_errors()))
    return CheckResult("Poisson manufactured solution", order >= 1.8, f"order {order:.2f}")


def kelvin_differences(sizes=(32, 64, 128)) -> list[float]:
    """L2 gap between direct and conservative Kelvin forms on compatible fields.

    h = grad(x^2 y - y^3/3) is harmonic and m = b - h with a divergence-free
    b, so curl h = 0 and div(m + h) = 0 and the two forms agree exactly.
    """
    diffs = []
    for n in sizes:
        g = Grid(n, n)
        X, Y = g.mesh()
        h = np.stack([2 * X * Y, X**2 - Y**2])
        b = np.stack([np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y),
                      -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)])
        m = b - h
        gap = forces.kelvin_direct(m, h, 1.0, g) - forces.kelvin_conservative(m, h, 1.0, g)
        diffs.append(_l2(gap, g))
    return diffs


def check_kelvin() -> CheckResult:
    diffs = kelvin_differences()
    if diffs[-1] < 1e-12:
        return CheckResult("Kelvin force equivalence", True, f"gap {diffs[-1]:.2e}")
    order = min(observed_orders(diffs))
    return CheckResult("Kelvin force equivalence", order >= 1.0, f"order {order:.2f}")


def relaxation_ode_error(tau: float, dt: float, t_end: float = 1.0, kappa0: float = 1.0):
    """Max error of the stepper against the exact relaxation ODE solution.

    With u = w = 0 and h frozen, m(t) = kappa0 h + (m0 - kappa0 h) exp(-t/tau).
    Returns ``(error, bound)`` with the bound max|m0 - kappa0 h| dt / (2 tau).
    """
    g = Grid(8, 8)
    h = np.stack([np.full(g.shape, 0.7), np.full(g.shape, -0.2)])
    m0 = np.stack([np.full(g.shape, -0.5), np.full(g.shape, 1.1)])
    zero = np.zeros(g.shape)
    s = State(u=np.zeros_like(h), w=zero, m=m0, h=h, phi=zero, p=zero)
    params = Params(tau=tau, dt=dt, t_end=t_end, kappa0=kappa0)
    cfg = StepperConfig(frozen_fields={"u", "w", "h"})
    traj = run(s, params, g, cfg)
    err = 0.0
    for st in traj.states:
        exact = kappa0 * h + (m0 - kappa0 * h) * math.exp(-st.time / tau)
        err = max(err, float(np.max(np.abs(st.m - exact))))
    bound = float(np.max(np.abs(m0 - kappa0 * h))) * dt / (2 * tau)
    return err, bound


def check_relaxation_ode() -> CheckResult:
    dt = 0.01
    worst = []
    ok = True
    for ratio in (10.0, 1.0, 0.01):
        err, bound = relaxation_ode_error(ratio * dt, dt)
        ok &= err <= bound
        worst.append(f"tau/dt={ratio:g} err {err:.2e} <= {bound:.2e}")
    return CheckResult("relaxation ODE oracle", ok, "; ".join(worst))


def energy_residual_peak(config: RunConfig, dt: float, t_end: float) -> tuple[float, float]:
    cfg = config.replace(params=config.params.with_(dt=dt, t_end=t_end))
    state = initial_state(cfg)
    traj = run(state, cfg.params, cfg.grid, cfg.stepper)
    res = dg.energy_residual(traj, cfg.params, cfg.grid)
    return float(np.max(np.abs(res))), dg.energy(state, cfg.params, cfg.grid)


def check_energy(config: RunConfig) -> CheckResult:
    """The energy residual shrinks at first order when dt is halved."""
    cfg = config.replace(stepper=StepperConfig(advection="centered",
                                               kelvin_form=config.stepper.kelvin_form))
    dt = config.params.dt
    t_end = min(config.params.t_end, 50 * dt)
    r1, e0 = energy_residual_peak(cfg, dt, t_end)
    r2, _ = energy_residual_peak(cfg, dt / 2, t_end)
    ratio = r1 / r2 if r2 > 0 else math.inf
    ok = ratio >= 1.6 or r1 <= 1e-12 * max(e0, 1.0)
    return CheckResult("energy residual", ok,
                       f"max |residual| {r1:.3e} -> {r2:.3e} (ratio {ratio:.2f}), E(0) {e0:.3e}")


def run_checks(config: RunConfig) -> list[CheckResult]:
    return [check_operators(), check_poisson(), check_kelvin(), check_relaxation_ode(),
            check_energy(config)]
