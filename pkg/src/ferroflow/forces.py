"""Kelvin force, magnetic torque and spin-vorticity coupling."""

from __future__ import annotations

import numpy as np

from . import grid_ops
from .model import Grid


def kelvin_direct(m, h, mu0: float, grid: Grid, closure: str = "onesided") -> np.ndarray:
    """``mu0 (m . grad) h``, component j = mu0 sum_i m_i d_i h_j."""
    J = grid_ops.vector_grad(h, grid, closure)
    return mu0 * np.einsum("i...,ij...->j...", m, J)


def kelvin_conservative(m, h, mu0: float, grid: Grid, closure: str = "onesided") -> np.ndarray:
    """``mu0 [div((m + h) (x) h) - grad(|h|^2) / 2]``.

    Equal to the direct form when curl h = 0 and div(m + h) = 0, and
    meaningful in weak form even when h has no derivatives.
    """
    b = m + h
    out = np.empty_like(h)
    for j in range(2):
        out[j] = grid_ops.div(b * h[j], grid, closure)
    out -= 0.5 * grid_ops.grad(np.sum(h * h, axis=0), grid, closure)
    return mu0 * out


def kelvin_skew(m, h, mu0: float, grid: Grid, closure: str = "zero") -> np.ndarray:
    """``mu0/2 sum_k (m_k grad h_k - h_k grad m_k)``.

    For curl-free h this is ``mu0 [(m . grad) h - grad(m . h)/2]``, the Kelvin
    force up to a pressure gradient.  With the antisymmetric ``"zero"``
    closure it is minus the adjoint of skew-symmetric transport of m tested
    against h, so the work it does on the flow cancels exactly against the
    magnetic energy carried by transport.  It vanishes identically when m is
    parallel to h with a constant factor.
    """
    Jh = grid_ops.vector_grad(h, grid, closure)
    Jm = grid_ops.vector_grad(m, grid, closure)
    return 0.5 * mu0 * (np.einsum("k...,jk...->j...", m, Jh) - np.einsum("k...,jk...->j...", h, Jm))


KELVIN_FORMS = {
    "direct": kelvin_direct,
    "conservative": kelvin_conservative,
    "skew": kelvin_skew,
}


def torque(m, h, mu0: float) -> np.ndarray:
    """Scalar torque ``mu0 (m x h)`` = mu0 (m_x h_y - m_y h_x)."""
    return mu0 * (m[0] * h[1] - m[1] * h[0])


def cross_scalar_vector(w, m) -> np.ndarray:
    """``w x m`` for out-of-plane ``w``: w (-m_y, m_x)."""
    return np.stack([-w * m[1], w * m[0]])


def spin_coupling(u, w, nu_r: float, grid: Grid, closure: str = "onesided"):
    """Return ``(2 nu_r curl w, 2 nu_r curl u - 4 nu_r w)``."""
    force = 2 * nu_r * grid_ops.curl_scalar(w, grid, closure)
    torque_term = 2 * nu_r * grid_ops.curl_vec(u, grid, closure) - 4 * nu_r * w
    return force, torque_term
