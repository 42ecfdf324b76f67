"""Energy, dissipation and relative-entropy functionals as discrete integrals.

Space integrals use the midpoint rule (cell sums times cell area, with numpy's
pairwise summation).  Time integrals use the trapezoid rule over the samples
they are given.  In the 2D scalar-spin reduction the ``c2 |div w|^2`` terms
are identically zero.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import grid_ops
from .model import DiagnosticsSample, Grid, LimitState, Params


def integral(f: np.ndarray, grid: Grid) -> float:
    """Midpoint-rule integral of a scalar field, or of the sum of components."""
    return float(np.sum(np.ascontiguousarray(f).ravel()) * grid.cell_area)


def _sq(f, grid):
    return integral(np.square(f), grid)


def _full(state):
    return state.as_state() if isinstance(state, LimitState) else state


def energy(state, params: Params, grid: Grid) -> float:
    s = _full(state)
    mu0, k0 = params.mu0, params.kappa0
    return 0.5 * (_sq(s.u, grid) + _sq(s.w, grid) + mu0 / k0 * _sq(s.m, grid) + mu0 * _sq(s.h, grid))


def relaxation_defect(state, params: Params, grid: Grid) -> float:
    """``|m - kappa0 h|^2`` integrated."""
    s = _full(state)
    return _sq(s.m - params.kappa0 * s.h, grid)


def dissipation(state, params: Params, grid: Grid, closure: str = "onesided") -> float:
    """Viscous, spin and relaxation dissipation rate.

    The relaxation term is omitted when ``params.tau`` is None (the limit
    system, where it vanishes identically).
    """
    s = _full(state)
    d = (params.nu * _sq(grid_ops.vector_grad(s.u, grid, closure), grid)
         + params.c1 * _sq(grid_ops.grad(s.w, grid, closure), grid)
         + params.nu_r * _sq(grid_ops.curl_vec(s.u, grid, closure) - 2 * s.w, grid))
    if params.tau is not None:
        d += params.mu0 / (params.tau * params.kappa0) * relaxation_defect(s, params, grid)
    return d


def energy_source(state, params: Params, grid: Grid) -> float:
    """Power supplied by a time-dependent applied field, ``mu0 <d_t h_a, h>``."""
    af = params.applied_field
    if af.is_static:
        return 0.0
    return params.mu0 * integral(af.rate_on_grid(grid, state.time) * _full(state).h, grid)


def _trapezoid_running(values, times):
    values, times = np.asarray(values, float), np.asarray(times, float)
    out = np.zeros_like(values)
    if len(values) > 1:
        out[1:] = np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(times))
    return out


def _states(traj):
    return traj.states if hasattr(traj, "states") else list(traj)


def energy_residual(traj, params: Params, grid: Grid) -> np.ndarray:
    """``E(t) + int D - E(0) - mu0 int <d_t h_a, h>`` at every stored sample.

    Nonpositive up to discretization error for a solution of the full system.
    """
    states = _states(traj)
    times = [s.time for s in states]
    e = np.array([energy(s, params, grid) for s in states])
    d = [dissipation(s, params, grid) for s in states]
    src = [energy_source(s, params, grid) for s in states]
    return e + _trapezoid_running(d, times) - _trapezoid_running(src, times) - e[0]


def _m_l2_rate(state, params, grid):
    s = _full(state)
    return integral(np.sum(s.m * s.m, axis=0) - params.kappa0 * np.sum(s.h * s.m, axis=0), grid)


def m_l2_residual(traj, params: Params, grid: Grid) -> float:
    """Largest defect over the samples of the magnetization L2 identity.

    ``|m(t)|^2/2 - |m(0)|^2/2 + (1/tau) int_0^t int (|m|^2 - kappa0 h.m)``;
    zero for exact solutions of the full system with sigma = 0.
    """
    if params.tau is None:
        raise ValueError("the magnetization identity needs tau > 0")
    states = _states(traj)
    times = [s.time for s in states]
    half = np.array([0.5 * _sq(s.m, grid) for s in states])
    flux = _trapezoid_running([_m_l2_rate(s, params, grid) for s in states], times)
    return float(np.max(np.abs(half - half[0] + flux / params.tau)))


def relative_entropy(state_tau, limit_state: LimitState, params: Params, grid: Grid) -> float:
    """Half the weighted squared distance between a full state and a limit state."""
    s = _full(state_tau)
    mu0, k0 = params.mu0, params.kappa0
    return 0.5 * (_sq(s.u - limit_state.U, grid) + _sq(s.w - limit_state.W, grid)
                  + mu0 / k0 * _sq(s.m - limit_state.M, grid)
                  + mu0 * _sq(s.h - limit_state.H, grid))


def energy_differential(state, params: Params, grid: Grid, direction) -> float:
    """Directional derivative of the energy at ``state`` along ``direction``."""
    s, d = _full(state), _full(direction)
    mu0, k0 = params.mu0, params.kappa0
    return (integral(s.u * d.u, grid) + integral(s.w * d.w, grid)
            + mu0 / k0 * integral(s.m * d.m, grid) + mu0 * integral(s.h * d.h, grid))


def relative_entropy_expanded(state_tau, limit_state: LimitState, params: Params,
                              grid: Grid) -> float:
    """The same quantity written as ``E(a) + E(b) - dE(b) a``."""
    return (energy(state_tau, params, grid) + energy(limit_state, params, grid)
            - energy_differential(limit_state, params, grid, state_tau))


def relative_dissipation(state_tau, limit_state: LimitState, params: Params, grid: Grid,
                         closure: str = "onesided") -> float:
    s = _full(state_tau)
    du, dw = s.u - limit_state.U, s.w - limit_state.W
    d = (params.nu * _sq(grid_ops.vector_grad(du, grid, closure), grid)
         + params.c1 * _sq(grid_ops.grad(dw, grid, closure), grid)
         + params.nu_r * _sq(2 * dw - grid_ops.curl_vec(du, grid, closure), grid))
    if params.tau is not None:
        d += params.mu0 / (2 * params.kappa0 * params.tau) * relaxation_defect(s, params, grid)
    return d


class DiagnosticsRecorder:
    """Run callback accumulating diagnostics on the fly.

    Time integrals are accumulated every step; a :class:`DiagnosticsSample`
    is stored every ``every`` steps and for the step passed to ``close``.
    When ``reference`` maps a step index to a limit state, relative entropy
    and relative dissipation are filled in as well.
    """

    def __init__(self, params: Params, grid: Grid, every: int = 1, reference=None):
        self.params, self.grid, self.every = params, grid, max(1, int(every))
        self.reference = reference
        self.samples: list[DiagnosticsSample] = []
        self._prev = None
        self._e0 = None
        self._int_d = self._int_src = self._int_q = 0.0
        self._half_m0 = None

    def __call__(self, step: int, state) -> None:
        p, g = self.params, self.grid
        e, d, src = energy(state, p, g), dissipation(state, p, g), energy_source(state, p, g)
        full = p.tau is not None and not isinstance(state, LimitState)
        q = _m_l2_rate(state, p, g) if full else 0.0
        half_m = 0.5 * _sq(_full(state).m, g)
        if self._prev is None:
            self._e0, self._half_m0 = e, half_m
        else:
            t0, d0, s0, q0 = self._prev
            dt = state.time - t0
            self._int_d += 0.5 * dt * (d + d0)
            self._int_src += 0.5 * dt * (src + s0)
            self._int_q += 0.5 * dt * (q + q0)
        self._prev = (state.time, d, src, q)
        self._last = (step, state, e, d, half_m)
        if step % self.every == 0:
            self._record(step, state, e, d, half_m)

    def _record(self, step, state, e, d, half_m):
        p, g = self.params, self.grid
        m_res = None
        if p.tau is not None and not isinstance(state, LimitState):
            m_res = abs(half_m - self._half_m0 + self._int_q / p.tau)
        rel = rel_d = None
        if self.reference is not None:
            ref = self.reference(step)
            if ref is not None:
                rel = relative_entropy(state, ref, p, g)
                rel_d = relative_dissipation(state, ref, p, g)
        self.samples.append(DiagnosticsSample(
            time=state.time, energy=e, dissipation=d,
            energy_residual=e + self._int_d - self._int_src - self._e0,
            m_l2_residual=m_res, rel_entropy=rel, rel_dissipation=rel_d))

    def close(self) -> list[DiagnosticsSample]:
        """Make sure the final state is sampled and return all samples."""
        step, state, e, d, half_m = self._last
        if not self.samples or self.samples[-1].time != state.time:
            self._record(step, state, e, d, half_m)
        return self.samples


def samples_of(traj, params: Params, grid: Grid) -> Sequence[DiagnosticsSample]:
    """Diagnostics for every stored state of a trajectory."""
    rec = DiagnosticsRecorder(params, grid)
    for k, s in zip(traj.steps, traj.states):
        rec(k, s)
    return rec.close()
