"""Domain types: parameters, grid, field states and the applied field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ParameterError(ValueError):
    """Raised when a parameter set violates one of its constraints."""


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on [0, lx] x [0, ly].

    Arrays are indexed ``[i, j]`` with ``i`` running along x, so a scalar field
    has shape ``(nx, ny)`` and a vector field ``(2, nx, ny)``.
    """

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise ParameterError("grid needs at least 8 cells per direction")
        if not (self.lx > 0 and self.ly > 0):
            raise ParameterError("domain lengths must be > 0")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def interior_mask(self) -> np.ndarray:
        """True on cells that do not touch the domain boundary."""
        mask = np.zeros(self.shape, dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.nx * factor, self.ny * factor, self.lx, self.ly)


@dataclass(frozen=True)
class AppliedField:
    """Applied field h_a = grad Re f(z), f(z) = sum_k c_k (z - z0)^k, k >= 1.

    Gradients of harmonic polynomials are divergence- and curl-free by
    construction.  ``coeffs[0]`` multiplies ``z`` (a uniform field
    ``(Re c, -Im c)``), ``coeffs[1]`` multiplies ``z**2`` and so on.  When
    ``ramp_time`` is set the whole field is scaled by ``min(t / ramp_time, 1)``.
    """

    coeffs: tuple[complex, ...] = ()
    ramp_time: float | None = None
    center: tuple[float, float] = (0.5, 0.5)

    @classmethod
    def uniform(cls, hx: float, hy: float, ramp_time: float | None = None) -> "AppliedField":
        return cls(coeffs=(complex(hx, -hy),), ramp_time=ramp_time)

    @property
    def is_static(self) -> bool:
        return self.ramp_time is None

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def scale(self, t: float) -> float:
        if self.ramp_time is None:
            return 1.0
        return min(max(t, 0.0) / self.ramp_time, 1.0)

    def scale_rate(self, t: float) -> float:
        if self.ramp_time is None or t >= self.ramp_time:
            return 0.0
        return 1.0 / self.ramp_time

    def potential(self, x, y, t: float = 0.0):
        z = (np.asarray(x) - self.center[0]) + 1j * (np.asarray(y) - self.center[1])
        f = np.zeros_like(z)
        for k, c in enumerate(self.coeffs):
            f = f + c * z ** (k + 1)
        return self.scale(t) * np.real(f)

    def _shape(self, x, y):
        z = (np.asarray(x) - self.center[0]) + 1j * (np.asarray(y) - self.center[1])
        df = np.zeros_like(z)
        for k, c in enumerate(self.coeffs):
            df = df + (k + 1) * c * z**k
        # grad Re f = (Re f', -Im f') for analytic f
        return np.stack([np.real(df), -np.imag(df)])

    def value(self, x, y, t: float = 0.0) -> np.ndarray:
        return self.scale(t) * self._shape(x, y)

    def rate(self, x, y, t: float = 0.0) -> np.ndarray:
        """Time derivative of the applied field."""
        return self.scale_rate(t) * self._shape(x, y)

    def on_grid(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        X, Y = grid.mesh()
        return self.value(X, Y, t)

    def rate_on_grid(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        X, Y = grid.mesh()
        return self.rate(X, Y, t)


@dataclass(frozen=True)
class Params:
    """Physical constants and time-stepping controls.

    ``tau`` is ``None`` for the quasi-equilibrium (limit) system.
    """

    nu: float = 1e-2
    nu_r: float = 5e-3
    c1: float = 1e-2
    c2: float = 1e-2
    mu0: float = 1.0
    kappa0: float = 1.0
    tau: float | None = 1e-2
    sigma: float = 0.0
    t_end: float = 1.0
    dt: float = 1e-2
    applied_field: AppliedField = field(default_factory=AppliedField)

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)


_POSITIVE = ("nu", "c1", "mu0", "kappa0", "dt")
_NONNEGATIVE = ("nu_r", "c2", "sigma", "t_end")


def validate_params(p: Params, mode: str = "full") -> Params:
    """Return ``p`` unchanged, or raise ParameterError naming the first bad field."""
    if mode not in ("full", "regularized", "limit"):
        raise ParameterError(f"unknown mode {mode!r}")
    for name in _POSITIVE:
        value = getattr(p, name)
        if not (math.isfinite(value) and value > 0):
            raise ParameterError(f"{name} must be > 0")
    for name in _NONNEGATIVE:
        value = getattr(p, name)
        if not (math.isfinite(value) and value >= 0):
            raise ParameterError(f"{name} must be >= 0")
    if mode != "limit":
        if p.tau is None or not (p.tau > 0) or math.isnan(p.tau):
            raise ParameterError("tau must be > 0")
    if mode == "full" and p.sigma != 0:
        raise ParameterError("sigma must be 0 in full mode (use regularized)")
    if mode == "regularized" and not p.sigma > 0:
        raise ParameterError("sigma must be > 0 in regularized mode")
    af = p.applied_field
    if af.ramp_time is not None and not af.ramp_time > 0:
        raise ParameterError("applied_field ramp_time must be > 0")
    if not all(np.isfinite(c.real) and np.isfinite(c.imag) for c in af.coeffs):
        raise ParameterError("applied_field coefficients must be finite")
    return p


@dataclass(frozen=True)
class State:
    """Fields of the full system at one time level.

    ``u``, ``m`` and ``h`` have shape ``(2, nx, ny)``; ``w``, ``phi`` and ``p``
    have shape ``(nx, ny)``.  ``w`` is the out-of-plane spin component.
    """

    u: np.ndarray
    w: np.ndarray
    m: np.ndarray
    h: np.ndarray
    phi: np.ndarray
    p: np.ndarray
    time: float = 0.0

    @classmethod
    def zeros(cls, grid: Grid, time: float = 0.0) -> "State":
        s, v = np.zeros(grid.shape), np.zeros((2, *grid.shape))
        return cls(u=v, w=s, m=v.copy(), h=v.copy(), phi=s.copy(), p=s.copy(), time=time)

    def replace(self, **changes) -> "State":
        return replace(self, **changes)


@dataclass(frozen=True)
class LimitState:
    """Fields of the tau = 0 system.  The magnetization is never stored."""

    U: np.ndarray
    W: np.ndarray
    H: np.ndarray
    Phi: np.ndarray
    P: np.ndarray
    kappa0: float
    time: float = 0.0

    @property
    def M(self) -> np.ndarray:
        return self.kappa0 * self.H

    @classmethod
    def zeros(cls, grid: Grid, kappa0: float, time: float = 0.0) -> "LimitState":
        s, v = np.zeros(grid.shape), np.zeros((2, *grid.shape))
        return cls(U=v, W=s, H=v.copy(), Phi=s.copy(), P=s.copy(), kappa0=kappa0, time=time)

    def replace(self, **changes) -> "LimitState":
        return replace(self, **changes)

    def as_state(self) -> State:
        """View as a full-system state with m = kappa0 H."""
        return State(u=self.U, w=self.W, m=self.M, h=self.H, phi=self.Phi, p=self.P, time=self.time)


@dataclass(frozen=True)
class DiagnosticsSample:
    time: float
    energy: float
    dissipation: float
    energy_residual: float | None = None
    m_l2_residual: float | None = None
    rel_entropy: float | None = None
    rel_dissipation: float | None = None
