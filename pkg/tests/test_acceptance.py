"""Acceptance criteria.  Each test reports one PASS/FAIL line in the summary."""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from ferroflow import cli
from ferroflow import diagnostics as dg
from ferroflow import dynamics as dy
from ferroflow import experiments as ex
from ferroflow import forces, grid_ops
from ferroflow.config import RunConfig
from ferroflow.magnetostatics import solve_potential
from ferroflow.model import AppliedField, Grid, LimitState, Params, State

SIZES = (32, 64, 128)


def _orders(errs):
    return [math.log2(a / b) for a, b in zip(errs[:-1], errs[1:])]


def _l2(f, grid):
    return math.sqrt(dg.integral(np.square(f), grid))


@pytest.mark.acceptance(1, "operator convergence orders")
def test_operator_orders(detail):
    start = time.perf_counter()
    errs = {"grad": [], "div": [], "curl_vec": [], "curl_scalar": [], "lap_dirichlet": [],
            "lap_neumann": []}
    for n in SIZES:
        g = Grid(n, n)
        X, Y = g.mesh()
        s = np.exp(0.5 * X) * np.sin(2 * Y + 0.3)
        sx, sy = 0.5 * s, 2 * np.exp(0.5 * X) * np.cos(2 * Y + 0.3)
        errs["grad"].append(np.max(np.abs(grid_ops.grad(s, g) - np.stack([sx, sy]))))
        v = np.stack([np.sin(X) * np.cos(2 * Y), np.exp(X) * Y])
        errs["div"].append(np.max(np.abs(grid_ops.div(v, g) - (np.cos(X) * np.cos(2 * Y) + np.exp(X)))))
        errs["curl_vec"].append(np.max(np.abs(
            grid_ops.curl_vec(v, g) - (np.exp(X) * Y + 2 * np.sin(X) * np.sin(2 * Y)))))
        errs["curl_scalar"].append(np.max(np.abs(grid_ops.curl_scalar(s, g) - np.stack([sy, -sx]))))
        fd = np.sin(np.pi * X) * np.sin(2 * np.pi * Y)
        errs["lap_dirichlet"].append(np.max(np.abs(
            grid_ops.laplacian(fd, g, "dirichlet") + 5 * np.pi**2 * fd)))
        fn = np.cos(np.pi * X) * np.cos(2 * np.pi * Y)
        errs["lap_neumann"].append(np.max(np.abs(
            grid_ops.laplacian(fn, g, "neumann") + 5 * np.pi**2 * fn)))
    orders = {k: min(_orders(v)) for k, v in errs.items()}

    # stencil exactness: gradients of quadratics, interior Laplacian of quadratics
    g = Grid(16, 16, lx=1.3, ly=0.9)
    X, Y = g.mesh()
    q = 2 * X**2 - X * Y + 0.5 * Y**2 + X - 3
    exact_grad = np.max(np.abs(grid_ops.grad(q, g) - np.stack([4 * X - Y + 1, -X + Y])))
    exact_div = np.max(np.abs(grid_ops.div(np.stack([X**2, X * Y]), g) - 3 * X))
    exact_lap = np.max(np.abs(grid_ops.laplacian(q, g, "natural")[1:-1, 1:-1] - 5.0))
    elapsed = time.perf_counter() - start
    detail(", ".join(f"{k} {o:.2f}" for k, o in orders.items())
           + f"; quadratic exactness {max(exact_grad, exact_div, exact_lap):.1e}; {elapsed:.1f}s")
    assert all(o >= 1.8 for o in orders.values())
    assert max(exact_grad, exact_div) < 1e-11 and exact_lap < 1e-9
    assert elapsed < 10


@pytest.mark.acceptance(2, "structure identities curl grad = 0, div curl = 0")
def test_structure_identities(detail):
    g = Grid(64, 64)
    rng = np.random.default_rng(2024)
    worst_abs = worst_rel = 0.0
    for _ in range(100):
        s = rng.standard_normal(g.shape)
        # magnitude of the mixed second differences that cancel
        scale = np.max(np.abs(grid_ops.ddx(grid_ops.ddy(s, g), g)))
        for r in (grid_ops.curl_vec(grid_ops.grad(s, g), g),
                  grid_ops.div(grid_ops.curl_scalar(s, g), g)):
            e = float(np.max(np.abs(r)))
            worst_abs, worst_rel = max(worst_abs, e), max(worst_rel, e / scale)
    detail(f"max residual {worst_abs:.2e} absolute, {worst_rel:.2e} relative to the cancelled terms")
    assert worst_rel <= 1e-13


@pytest.mark.acceptance(3, "Neumann potential solve")
def test_magnetostatics(detail):
    start = time.perf_counter()
    errs = []
    for n in SIZES:
        g = Grid(n, n)
        X, Y = g.mesh()
        psi = np.cos(np.pi * X) * np.cos(np.pi * Y)
        m = np.stack([-np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y),
                      -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)])
        phi, h, _ = solve_potential(m, np.zeros_like(m), g)
        errs.append(_l2(phi + (psi - psi.mean()), g))
    order = min(_orders(errs))

    defect = 0.0
    rng = np.random.default_rng(5)
    g = Grid(48, 40, lx=1.2, ly=1.0)
    X, Y = g.mesh()
    for coeffs in [(1 - 0.5j,), (0.3j, 0.7), (0.2, -0.1 + 0.4j, 0.05j)]:
        h_a = AppliedField(coeffs=coeffs).on_grid(g)
        m = rng.standard_normal((2,) + g.shape)
        defect = max(defect, solve_potential(m, h_a, g)[2].compatibility_defect)
    elapsed = time.perf_counter() - start
    detail(f"potential error order {order:.2f} ({errs[-1]:.1e} at 128); "
           f"compatibility defect {defect:.1e}; {elapsed:.1f}s")
    assert order >= 1.8
    assert defect < 1e-12
    assert elapsed < 10


@pytest.mark.acceptance(4, "Kelvin force identity")
def test_kelvin_identity(detail):
    gaps, cons = [], []
    for n in SIZES:
        g = Grid(n, n)
        X, Y = g.mesh()
        x, y = X - 0.5, Y - 0.5
        # curl h = 0 and div(m + h) = 0 with m + h divergence-free
        h = np.stack([2 * x * y + 1, x**2 - y**2])
        b = np.stack([np.sin(np.pi * X) * np.cos(np.pi * Y), -np.cos(np.pi * X) * np.sin(np.pi * Y)])
        m = b - h
        gap = forces.kelvin_direct(m, h, 1.0, g) - forces.kelvin_conservative(m, h, 1.0, g)
        gaps.append(_l2(gap, g))
        hh = np.stack([3 * (x**2 - y**2), -6 * x * y])
        cons.append(_l2(forces.kelvin_conservative(np.zeros_like(hh), hh, 1.0, g), g))
    order = min(_orders(gaps))
    C = 20.0
    ratios = [c / Grid(n, n).hx ** 2 for c, n in zip(cons, SIZES)]
    detail(f"direct-conservative gap order {order:.2f}; m=0 conservative norm / h^2 = "
           + ", ".join(f"{r:.1f}" for r in ratios) + f" (C = {C:g})")
    assert order >= 1.0
    assert all(r <= C for r in ratios)


def _energy_config(dt):
    p = Params(tau=0.5, dt=dt, t_end=1.0, applied_field=AppliedField(coeffs=(1 - 0.5j, 0.3j)))
    return RunConfig(params=p, grid=Grid(64, 64), stepper=dy.StepperConfig(advection="centered"))


@pytest.mark.acceptance(5, "energy inequality")
def test_energy_inequality(detail):
    start = time.perf_counter()
    peaks, worst = [], -np.inf
    for dt in (0.005, 0.0025):
        cfg = _energy_config(dt)
        state, _ = ex.matched_initial_data(cfg)
        traj = dy.run(state, cfg.params, cfg.grid, cfg.stepper)
        res = dg.energy_residual(traj, cfg.params, cfg.grid)
        e0 = dg.energy(state, cfg.params, cfg.grid)
        worst = max(worst, float(res.max()) / e0)
        peaks.append(float(np.max(np.abs(res))))
    ratio = peaks[0] / peaks[1]
    elapsed = time.perf_counter() - start
    detail(f"max residual / E(0) = {worst:.2e}; peak |residual| {peaks[0]:.2e} -> {peaks[1]:.2e} "
           f"(ratio {ratio:.2f}); {elapsed:.1f}s")
    assert worst <= 1e-2
    assert 1.6 <= ratio <= 2.4
    assert elapsed < 120


@pytest.mark.acceptance(6, "relaxation ODE oracle")
def test_relaxation_ode(detail):
    g = Grid(8, 8)
    kappa0 = 1.5
    h = np.stack([np.full(g.shape, 0.4), np.full(g.shape, -0.9)])
    m0 = np.stack([np.full(g.shape, -1.0), np.full(g.shape, 0.6)])
    zero = np.zeros(g.shape)
    s = State(u=np.zeros_like(h), w=zero, m=m0, h=h, phi=zero, p=zero)
    cfg = dy.StepperConfig(frozen_fields={"u", "w", "h"})
    amp = float(np.max(np.abs(m0 - kappa0 * h)))
    dt, lines, ok = 0.01, [], True
    for ratio in (10.0, 1.0, 0.01):
        tau = ratio * dt
        traj = dy.run(s, Params(tau=tau, dt=dt, t_end=1.0, kappa0=kappa0), g, cfg)
        dev = [float(np.max(np.abs(st.m - kappa0 * h))) for st in traj.states]
        err = max(float(np.max(np.abs(st.m - kappa0 * h - (m0 - kappa0 * h) * math.exp(-st.time / tau))))
                  for st in traj.states)
        bound = amp * dt / (2 * tau)  # sup over n of |(1+r)^-n - e^-rn| is below r/2
        ok &= err <= bound
        # non-increasing up to one rounding unit once the equilibrium is reached
        ok &= all(b <= a + 4 * np.finfo(float).eps * amp for a, b in zip(dev, dev[1:]))
        lines.append(f"tau/dt={ratio:g}: err {err:.2e} <= {bound:.2e}")
    detail("; ".join(lines))
    assert ok


@pytest.mark.acceptance(7, "magnetization L2 identity")
def test_magnetization_identity(detail):
    base = RunConfig(params=Params(tau=0.1, dt=0.02, t_end=0.5,
                                   applied_field=AppliedField(coeffs=(1 - 0.5j,))),
                     grid=Grid(16, 16))
    defects = []
    for k in range(3):
        f = 2**k
        cfg = base.replace(grid=Grid(16 * f, 16 * f), params=base.params.with_(dt=0.02 / f))
        state, _ = ex.matched_initial_data(cfg)
        traj = dy.run(state, cfg.params, cfg.grid, cfg.stepper)
        defects.append(dg.m_l2_residual(traj, cfg.params, cfg.grid))
    factors = [a / b for a, b in zip(defects[:-1], defects[1:])]
    detail("defects " + ", ".join(f"{d:.2e}" for d in defects)
           + "; factors " + ", ".join(f"{x:.2f}" for x in factors))
    assert all(x >= 1.7 for x in factors)


@pytest.mark.acceptance(8, "relative entropy algebra")
def test_relative_entropy_algebra(detail):
    g = Grid(24, 20)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        kappa0, mu0 = rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0)
        p = Params(kappa0=kappa0, mu0=mu0)
        a = State(u=rng.standard_normal((2,) + g.shape), w=rng.standard_normal(g.shape),
                  m=rng.standard_normal((2,) + g.shape), h=rng.standard_normal((2,) + g.shape),
                  phi=np.zeros(g.shape), p=np.zeros(g.shape))
        b = LimitState(U=rng.standard_normal((2,) + g.shape), W=rng.standard_normal(g.shape),
                       H=rng.standard_normal((2,) + g.shape), Phi=np.zeros(g.shape),
                       P=np.zeros(g.shape), kappa0=kappa0)
        direct = dg.relative_entropy(a, b, p, g)
        expanded = dg.relative_entropy_expanded(a, b, p, g)
        worst = max(worst, abs(direct - expanded) / direct)
    detail(f"max relative difference {worst:.1e} over 100 pairs")
    assert worst <= 1e-12


@pytest.mark.acceptance(9, "relaxation rate sqrt(tau)")
def test_rate_reproduction(detail):
    start = time.perf_counter()
    cfg = RunConfig(params=Params(tau=0.1, dt=0.01, t_end=0.5,
                                  applied_field=AppliedField(coeffs=(1 - 0.5j, 0.3j))),
                    grid=Grid(48, 48))
    report = ex.relaxation_sweep(cfg, [1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
    elapsed = time.perf_counter() - start
    detail(f"slope {report.fitted_slope:.3f}, r^2 {report.fit_r_squared:.4f}; sup sqrt(E) "
           + ", ".join(f"{e.sup_sqrt_entropy:.2e}" for e in report.entries) + f"; {elapsed:.1f}s")
    assert 0.35 <= report.fitted_slope <= 0.65
    assert report.fit_r_squared >= 0.95
    assert elapsed < 900


@pytest.mark.acceptance(10, "limit Kelvin force folds into pressure")
def test_limit_pressure_folding(detail):
    cfg = RunConfig(params=Params(tau=None, dt=0.01, t_end=1.0,
                                  applied_field=AppliedField(coeffs=(1 - 0.5j, 0.3j))),
                    grid=Grid(48, 48), mode="limit")
    _, limit = ex.matched_initial_data(cfg, tau=None)
    folded = dy.run(limit, cfg.params, cfg.grid, dy.StepperConfig(limit_kelvin="folded"))
    explicit = dy.run(limit, cfg.params, cfg.grid, dy.StepperConfig(limit_kelvin="explicit"))
    assert len(folded.states) == 101
    gap = max(float(np.max(np.abs(a.U - b.U))) for a, b in zip(folded.states, explicit.states))
    tol = dy.StepperConfig().poisson_tol
    kelvin = 0.5 * cfg.params.mu0 * limit.kappa0 * np.sum(limit.H**2, axis=0)
    detail(f"max |U_folded - U_explicit| over 100 steps {gap:.1e} (limit {10 * tol:.0e}); "
           f"Kelvin potential range {np.ptp(kelvin):.2f}")
    assert gap <= 10 * tol


@pytest.mark.acceptance(11, "deterministic diagnostics")
def test_determinism(tmp_path, detail):
    text = """\
mode = full
nx = 32
ny = 32
t_end = 0.2
dt = 0.01
tau = 0.05
field_coeffs = 1-0.5j, 0.3j
"""
    outputs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.cfg"
        path.write_text(text + f"output_dir = {tmp_path / name}\n")
        assert cli.main(["run", str(path)]) == 0
        outputs.append((tmp_path / name / "diagnostics.csv").read_bytes())
    detail(f"two runs, {len(outputs[0])} bytes each, identical={outputs[0] == outputs[1]}")
    assert outputs[0] == outputs[1]
