"""Time stepping for the full (tau > 0), regularized (sigma > 0) and limit systems.

One step of the full system is a fractional-step scheme:

1. velocity and spin: explicit transport and coupling forces, backward-Euler
   diffusion with u = w = 0 pinned on boundary cells;
2. magnetization: explicit transport, then backward Euler for the relaxation
   and precession terms, with the magnetostatic coupling solved inside a
   Picard loop (plus backward-Euler sigma-diffusion in regularized mode);
3. magnetostatic solve for the new field;
4. projection of the velocity onto discretely divergence-free fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import forces, grid_ops, linalg
from .magnetostatics import solve_limit_potential, solve_potential
from .model import Grid, LimitState, Params, State

FROZEN_CHOICES = frozenset({
    "u", "w", "m", "h", "advection", "relaxation", "precession",
    "kelvin", "torque", "spin_coupling",
})


class SimulationError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class StepperConfig:
    """Numerical controls.

    ``frozen_fields`` switches off pieces of the model for verification runs:
    ``"u"``, ``"w"``, ``"m"`` keep that field fixed, ``"h"`` keeps the
    magnetizing field fixed instead of re-solving it, and ``"advection"``,
    ``"relaxation"``, ``"precession"``, ``"kelvin"``, ``"torque"``,
    ``"spin_coupling"`` drop the corresponding terms.
    """

    cfl_number: float = 0.4
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    frozen_fields: frozenset = field(default_factory=frozenset)
    advection: str = "upwind"
    kelvin_form: str = "conservative"
    poisson_method: str = "exact"
    poisson_tol: float = 1e-10
    limit_kelvin: str = "folded"

    def __post_init__(self):
        object.__setattr__(self, "frozen_fields", frozenset(self.frozen_fields))
        if not 0 < self.cfl_number < 1:
            raise ValueError("cfl_number must be in (0, 1)")
        if not (self.picard_tol > 0 and self.poisson_tol > 0):
            raise ValueError("tolerances must be > 0")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be >= 1")
        unknown = self.frozen_fields - FROZEN_CHOICES
        if unknown:
            raise ValueError(f"unknown frozen fields: {sorted(unknown)}")
        if self.advection not in ("upwind", "centered"):
            raise ValueError(f"unknown advection scheme {self.advection!r}")
        if self.kelvin_form not in forces.KELVIN_FORMS:
            raise ValueError(f"unknown Kelvin form {self.kelvin_form!r}")
        if self.poisson_method not in ("exact", "cg"):
            raise ValueError(f"unknown poisson method {self.poisson_method!r}")
        if self.limit_kelvin not in ("folded", "explicit"):
            raise ValueError(f"unknown limit Kelvin treatment {self.limit_kelvin!r}")

    def frozen(self, name: str) -> bool:
        return name in self.frozen_fields


# --- transport ---------------------------------------------------------------


def _one_sided(f, h, axis):
    f = np.moveaxis(f, axis, -1)
    back = np.empty_like(f)
    fwd = np.empty_like(f)
    back[..., 1:] = (f[..., 1:] - f[..., :-1]) / h
    back[..., 0] = 0.0
    fwd[..., :-1] = back[..., 1:]
    fwd[..., -1] = 0.0
    return np.moveaxis(back, -1, axis), np.moveaxis(fwd, -1, axis)


def advect(u, f, grid: Grid, scheme: str = "upwind") -> np.ndarray:
    """Transport term ``(u . grad) f`` for a scalar or vector field ``f``.

    ``"upwind"`` is first-order donor cell.  ``"centered"`` uses the
    skew-symmetric average of the advective and divergence forms with the
    antisymmetric zero closure, so ``<advect(u, f), f> = 0`` for every f.
    """
    ax = f.ndim - 2
    if scheme == "upwind":
        bx, fx = _one_sided(f, grid.hx, ax)
        by, fy = _one_sided(f, grid.hy, ax + 1)
        ux, uy = u[0], u[1]
        return (np.maximum(ux, 0) * bx + np.minimum(ux, 0) * fx
                + np.maximum(uy, 0) * by + np.minimum(uy, 0) * fy)
    if scheme == "centered":
        z = "zero"
        nonconservative = u[0] * grid_ops.ddx(f, grid, z) + u[1] * grid_ops.ddy(f, grid, z)
        conservative = grid_ops.ddx(u[0] * f, grid, z) + grid_ops.ddy(u[1] * f, grid, z)
        return 0.5 * (nonconservative + conservative)
    raise ValueError(f"unknown advection scheme {scheme!r}")


# --- building blocks ---------------------------------------------------------


def _mask(f, grid):
    return f * grid.interior_mask()


def _potential(m, h_a, grid, cfg, phi0=None):
    return solve_potential(m, h_a, grid, tol=cfg.poisson_tol, method=cfg.poisson_method, x0=phi0)


def project(u_star, grid: Grid, tol: float = 1e-10):
    """Remove the discrete-gradient part of ``u_star``.

    Returns ``(u, q)`` with ``u = u_star - G0 q`` and ``q`` zero-mean, where
    ``G0`` is the centered gradient restricted to interior cells.  ``u`` is
    orthogonal to every such gradient, so its centered divergence vanishes
    and ``u`` stays zero on boundary cells.
    """
    u_star = _mask(np.asarray(u_star, dtype=float), grid)
    if not np.all(np.isfinite(u_star)):
        raise linalg.SolverError("non-finite velocity in projection")
    proj = linalg.masked_projector(grid)
    q = proj.potential(u_star)
    u = u_star - proj.grad(q)
    scale = np.linalg.norm(u_star)
    defect = np.linalg.norm(proj.adjoint(u)) * min(grid.hx, grid.hy)
    if scale > 0 and defect > max(tol, 1e-12) * scale:
        raise linalg.SolverError(f"projection residual {defect / scale:.3e} above tolerance")
    return u, q


def discrete_divergence(u, grid: Grid) -> np.ndarray:
    """Centered divergence of a boundary-pinned velocity (zero closure)."""
    return grid_ops.div(_mask(u, grid), grid, "zero")


def relax_magnetization(m, u, w, h_a, dt: float, params: Params, grid: Grid,
                        cfg: StepperConfig = StepperConfig(), h=None, phi0=None):
    """Advance the magnetization over one step.

    Solves ``m_new = m_adv + dt [w x m_new - (m_new - kappa0 h(m_new)) / tau]``
    where ``m_adv`` is the explicit transport predictor and
    ``h(m) = P(h_a - m)`` is the magnetostatic field.  Each Picard sweep lags
    only the precession term; the stiff relaxation and its coupling to the
    potential are solved exactly, which costs one potential solve per sweep.
    Returns ``(m_new, phi_new, h_new)``.  With ``"h"`` frozen, ``h`` is held
    fixed and no potential is solved.
    """
    m = np.asarray(m, dtype=float)
    frozen_h = cfg.frozen("h")
    if frozen_h and h is None:
        raise ValueError("frozen h requires the field h")
    tau = params.tau
    r = 0.0 if (cfg.frozen("relaxation") or tau is None or math.isinf(tau)) else dt / tau
    k0 = params.kappa0
    m_adv = m if cfg.frozen("advection") else m - dt * advect(u, m, grid, cfg.advection)
    precess = not cfg.frozen("precession") and np.any(w != 0)

    op = linalg.grad_normal_operator(grid)

    def proj(v):
        if cfg.poisson_method == "exact":
            return grid_ops.grad(op.solve_exact(op.adjoint_grad(v)), grid)
        return solve_potential(-v, np.zeros_like(v), grid, tol=cfg.poisson_tol, method="cg")[1]

    def sweep(m_lag):
        m_tilde = m_adv + dt * forces.cross_scalar_vector(w, m_lag) if precess else m_adv
        if frozen_h:
            return (m_tilde + r * k0 * h) / (1 + r)
        if r == 0.0:
            return m_tilde
        # range(P) and its complement decouple: on gradients the field term
        # adds r*kappa0 to the diagonal, elsewhere only the relaxation acts
        y = (m_tilde + r * k0 * h_a) / (1 + r + r * k0) - m_tilde / (1 + r)
        return m_tilde / (1 + r) + proj(y)

    m_new = sweep(m_adv)
    if precess:
        for _ in range(cfg.picard_max_iter):
            m_next = sweep(m_new)
            change = np.linalg.norm(m_next - m_new)
            m_new = m_next
            if change <= cfg.picard_tol * max(np.linalg.norm(m_new), 1e-300):
                break
        else:
            raise linalg.SolverError("Picard iteration did not converge")
    if frozen_h:
        return m_new, phi0, h
    phi_new, h_new, _ = _potential(m_new, h_a, grid, cfg, phi0)
    return m_new, phi_new, h_new


def _check_cfl(u, grid, dt, cfg, step):
    rate = np.max(np.abs(u[0])) / grid.hx + np.max(np.abs(u[1])) / grid.hy
    if rate * dt > cfg.cfl_number:
        raise SimulationError(f"CFL number {rate * dt:.3f} exceeds {cfg.cfl_number}", step)


def _advance_flow(u, w, dt, params, grid, cfg, force, torque_source):
    """Momentum and spin update up to (not including) the projection."""
    nu, nu_r, c1 = params.nu, params.nu_r, params.c1
    adv = cfg.advection
    if not cfg.frozen("spin_coupling"):
        f_spin, t_spin = forces.spin_coupling(u, w, nu_r, grid, "zero")
        t_spin = t_spin + 4 * nu_r * w  # the -4 nu_r w part is implicit
        damping = 4 * nu_r
    else:
        f_spin, t_spin, damping = 0.0, 0.0, 0.0
    if cfg.frozen("u"):
        u_star = u
    else:
        rhs = u + dt * (f_spin + force)
        if not cfg.frozen("advection"):
            rhs = rhs - dt * advect(u, u, grid, adv)
        solve = linalg.helmholtz_solver(grid, dt * (nu + nu_r), "mask")
        u_star = np.stack([solve(rhs[0]), solve(rhs[1])])
    if cfg.frozen("w"):
        w_new = w
    else:
        rhs = w + dt * (t_spin + torque_source)
        if not cfg.frozen("advection"):
            rhs = rhs - dt * advect(u, w, grid, adv)
        scale = 1.0 + dt * damping
        w_new = linalg.helmholtz_solver(grid, dt * c1 / scale, "mask")(rhs / scale)
    return u_star, w_new


def _finite(step, **fields):
    for name, value in fields.items():
        if value is not None and not np.all(np.isfinite(value)):
            raise SimulationError(f"non-finite values in {name}", step)


def step_full(state: State, params: Params, grid: Grid, cfg: StepperConfig = StepperConfig(),
              dt: float | None = None, step_index: int | None = None) -> State:
    """Advance the full (or sigma-regularized) system by one time step."""
    dt = params.dt if dt is None else dt
    u, w, m, h = state.u, state.w, state.m, state.h
    if not cfg.frozen("u"):
        _check_cfl(u, grid, dt, cfg, step_index)
    t1 = state.time + dt
    mu0 = params.mu0
    af = params.applied_field
    h_a = af.on_grid(grid, t1)

    kelvin = 0.0
    if not cfg.frozen("kelvin"):
        closure = "zero" if cfg.kelvin_form == "skew" else "onesided"
        kelvin = forces.KELVIN_FORMS[cfg.kelvin_form](m, h, mu0, grid, closure)
    torque = 0.0 if cfg.frozen("torque") else forces.torque(m, h, mu0)
    u_star, w_new = _advance_flow(u, w, dt, params, grid, cfg, kelvin, torque)

    if cfg.frozen("m"):
        m_new, h_new, phi_new = m, h, state.phi
        if not cfg.frozen("h") and not af.is_static:
            phi_new, h_new, _ = _potential(m, h_a, grid, cfg, state.phi)
    else:
        m_new, phi_new, h_new = relax_magnetization(
            m, u, w_new, h_a, dt, params, grid, cfg, h=h, phi0=state.phi)
        if params.sigma > 0:
            solve = linalg.helmholtz_solver(grid, dt * params.sigma, "natural")
            m_new = np.stack([solve(m_new[0]), solve(m_new[1])])
            if not cfg.frozen("h"):
                phi_new, h_new, _ = _potential(m_new, h_a, grid, cfg, phi_new)

    if cfg.frozen("u"):
        u_new, p_new = u, state.p
    else:
        u_new, q = project(u_star, grid, cfg.poisson_tol)
        p_new = q / dt
    w_new = _mask(w_new, grid)
    _finite(step_index, u=u_new, w=w_new, m=m_new, h=h_new)
    return State(u=u_new, w=w_new, m=m_new, h=h_new, phi=phi_new, p=p_new, time=t1)


def step_limit(state: LimitState, params: Params, grid: Grid,
               cfg: StepperConfig = StepperConfig(), dt: float | None = None,
               step_index: int | None = None) -> LimitState:
    """Advance the quasi-equilibrium (tau = 0) system by one step.

    The Kelvin force mu0 (M . grad) H = grad(mu0 kappa0 |H|^2 / 2) is a
    gradient.  With ``limit_kelvin="folded"`` it is absorbed into the
    pressure; with ``"explicit"`` its discrete gradient is added to the
    projected velocity and removed again by the projection.
    """
    dt = params.dt if dt is None else dt
    U, W = state.U, state.W
    if not cfg.frozen("u"):
        _check_cfl(U, grid, dt, cfg, step_index)
    t1 = state.time + dt
    af = params.applied_field
    u_star, w_new = _advance_flow(U, W, dt, params, grid, cfg, 0.0, 0.0)
    if cfg.limit_kelvin == "explicit" and not cfg.frozen("u"):
        s = 0.5 * params.mu0 * state.kappa0 * np.sum(state.H * state.H, axis=0)
        u_star = u_star + dt * linalg.masked_projector(grid).grad(s)
    Phi, H = state.Phi, state.H
    if not af.is_static:
        Phi, H, _ = solve_limit_potential(af.on_grid(grid, t1), state.kappa0, grid,
                                          tol=cfg.poisson_tol, method=cfg.poisson_method,
                                          x0=Phi)
    if cfg.frozen("u"):
        u_new, p_new = U, state.P
    else:
        u_new, q = project(u_star, grid, cfg.poisson_tol)
        p_new = q / dt
    w_new = _mask(w_new, grid)
    _finite(step_index, U=u_new, W=w_new, H=H)
    return LimitState(U=u_new, W=w_new, H=H, Phi=Phi, P=p_new, kappa0=state.kappa0, time=t1)


# --- driver ------------------------------------------------------------------


@dataclass
class Trajectory:
    """States kept at the sampling cadence, always including first and last."""

    states: list = field(default_factory=list)
    steps: list = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self):
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def time_steps(t_end: float, dt: float) -> list[float]:
    """Step sizes covering [0, t_end]; the last one is shortened if needed."""
    if t_end <= 0:
        return []
    n = max(1, math.ceil(t_end / dt - 1e-9))
    steps = [dt] * n
    steps[-1] = t_end - (n - 1) * dt
    return steps


def run(initial, params: Params, grid: Grid, cfg: StepperConfig = StepperConfig(),
        callbacks: Iterable[Callable] = (), sample_every: int | None = 1,
        stepper: Callable | None = None) -> Trajectory:
    """Step from ``initial`` to ``params.t_end``.

    Each callback is called as ``callback(step_index, state)`` for the initial
    state and after every step.  States are stored every ``sample_every``
    steps (``None`` keeps only the first and last).  The limit system is
    stepped when ``initial`` is a :class:`LimitState`.
    """
    if stepper is None:
        stepper = step_limit if isinstance(initial, LimitState) else step_full
    callbacks = list(callbacks)
    traj = Trajectory()
    state = initial
    traj.states.append(state)
    traj.steps.append(0)
    for cb in callbacks:
        cb(0, state)
    steps = time_steps(params.t_end, params.dt)
    for k, dt in enumerate(steps, start=1):
        try:
            state = stepper(state, params, grid, cfg, dt=dt, step_index=k)
        except linalg.SolverError as exc:
            raise SimulationError(str(exc), k) from exc
        for cb in callbacks:
            cb(k, state)
        if k == len(steps) or (sample_every and k % sample_every == 0):
            traj.states.append(state)
            traj.steps.append(k)
    return traj
