"""Finite-difference operators on the cell-centered grid.

All derivatives are built from one 1D centered difference.  The closure at
the first and last cell is either ``"onesided"`` (second-order one-sided
stencil, the default) or ``"zero"`` (centered stencil with zero values
outside the domain, which makes the operator exactly antisymmetric).
Because the x- and y-differences act on different axes they commute, so
``curl_vec(grad s)`` and ``div(curl_scalar w)`` vanish to roundoff.

2D conventions for the scalar spin ``w``::

    curl_vec(v)    = d_x v_y - d_y v_x
    curl_scalar(w) = (d_y w, -d_x w)
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .model import Grid

_CLOSURES = ("onesided", "zero")


def diff(f: np.ndarray, h: float, axis: int, closure: str = "onesided") -> np.ndarray:
    """Centered first difference of ``f`` along ``axis``."""
    if closure not in _CLOSURES:
        raise ValueError(f"unknown closure {closure!r}")
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    if closure == "onesided":
        out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
        out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    else:
        out[0] = f[1] / (2 * h)
        out[-1] = -f[-2] / (2 * h)
    return np.moveaxis(out, 0, axis)


def ddx(f, grid: Grid, closure: str = "onesided"):
    return diff(f, grid.hx, f.ndim - 2, closure)


def ddy(f, grid: Grid, closure: str = "onesided"):
    return diff(f, grid.hy, f.ndim - 1, closure)


def grad(s: np.ndarray, grid: Grid, closure: str = "onesided") -> np.ndarray:
    return np.stack([ddx(s, grid, closure), ddy(s, grid, closure)])


def div(v: np.ndarray, grid: Grid, closure: str = "onesided") -> np.ndarray:
    return ddx(v[0], grid, closure) + ddy(v[1], grid, closure)


def curl_vec(v: np.ndarray, grid: Grid, closure: str = "onesided") -> np.ndarray:
    return ddx(v[1], grid, closure) - ddy(v[0], grid, closure)


def curl_scalar(w: np.ndarray, grid: Grid, closure: str = "onesided") -> np.ndarray:
    return np.stack([ddy(w, grid, closure), -ddx(w, grid, closure)])


def vector_grad(v: np.ndarray, grid: Grid, closure: str = "onesided") -> np.ndarray:
    """Jacobian ``J[i, j] = d_i v_j`` with shape ``(2, 2, nx, ny)``."""
    return np.stack([ddx(v, grid, closure), ddy(v, grid, closure)])


# Ghost-cell value as a function of the first two cells (f0, f1) next to a wall.
_GHOSTS = {
    "dirichlet": lambda f0, f1: -f0,
    "neumann": lambda f0, f1: f0,
    "natural": lambda f0, f1: 2 * f0 - f1,
}


def _second_diff(f: np.ndarray, h: float, axis: int, bc: str) -> np.ndarray:
    ghost = _GHOSTS[bc]
    f = np.moveaxis(f, axis, 0)
    lo = ghost(f[0], f[1])[None]
    hi = ghost(f[-1], f[-2])[None]
    g = np.concatenate([lo, f, hi])
    out = (g[2:] - 2 * g[1:-1] + g[:-2]) / h**2
    return np.moveaxis(out, 0, axis)


def laplacian(f: np.ndarray, grid: Grid, bc: str = "neumann") -> np.ndarray:
    """Five-point Laplacian with ghost-cell closure.

    ``bc`` is ``"dirichlet"`` (ghost = -f, zero on the wall face),
    ``"neumann"`` (ghost = f, zero normal derivative) or ``"natural"``
    (linear extrapolation).  Vector fields are handled component-wise.
    """
    if bc not in _GHOSTS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    f = np.asarray(f, dtype=float)
    ax = f.ndim - 2
    return _second_diff(f, grid.hx, ax, bc) + _second_diff(f, grid.hy, ax + 1, bc)


# --- sparse assembly -------------------------------------------------------


def _second_diff_1d(n: int, h: float, bc: str) -> sp.csr_matrix:
    main = -2 * np.ones(n)
    off = np.ones(n - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if bc == "dirichlet":
        A[0, 0] = A[-1, -1] = -3
    elif bc == "neumann":
        A[0, 0] = A[-1, -1] = -1
    elif bc == "natural":
        A[0, :2] = 0
        A[-1, -2:] = 0
    elif bc != "mask":
        raise ValueError(f"unknown boundary condition {bc!r}")
    return (A / h**2).tocsr()


def laplacian_matrix(grid: Grid, bc: str = "neumann") -> sp.csr_matrix:
    """Sparse five-point Laplacian acting on ``f.ravel()`` (C order).

    ``bc="mask"`` gives the plain stencil that reads boundary-cell values as
    given; it is only meaningful on fields whose boundary cells are pinned.
    """
    Ix, Iy = sp.identity(grid.nx), sp.identity(grid.ny)
    Lx = _second_diff_1d(grid.nx, grid.hx, bc)
    Ly = _second_diff_1d(grid.ny, grid.hy, bc)
    return (sp.kron(Lx, Iy) + sp.kron(Ix, Ly)).tocsr()


def diff_matrix_1d(n: int, h: float, closure: str = "onesided") -> sp.csr_matrix:
    """Matrix form of :func:`diff` for a single axis."""
    D = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="lil")
    if closure == "onesided":
        D[0, :3] = [-3, 4, -1]
        D[-1, -3:] = [1, -4, 3]
    elif closure != "zero":
        raise ValueError(f"unknown closure {closure!r}")
    return (D / (2 * h)).tocsr()
