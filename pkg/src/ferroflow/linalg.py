"""Linear solvers shared by the magnetostatic, projection and diffusion steps."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid_ops
from .model import Grid


class SolverError(RuntimeError):
    """Iterative solve failed; ``report`` carries the final state."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def _deflate(v, null_basis):
    for q in null_basis:
        v = v - np.vdot(q, v) * q
    return v


def pcg(apply_A, b, x0=None, tol=1e-10, maxiter=5000, diag=None, null_basis=()):
    """Jacobi-preconditioned CG for a symmetric positive semidefinite operator.

    ``null_basis`` is an orthonormal basis of the operator's null space; it is
    projected out of the right-hand side, the iterate and every search
    direction, so the solve stays in the complement.  Convergence is declared
    when ``||b - A x|| <= tol * ||b||``.
    """
    b = _deflate(np.asarray(b, dtype=float), null_basis)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else _deflate(np.array(x0, dtype=float), null_basis)
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0, True)
    r = b - apply_A(x)
    r = _deflate(r, null_basis)
    inv_diag = None if diag is None else 1.0 / diag
    z = r if inv_diag is None else _deflate(inv_diag * r, null_basis)
    p = z.copy()
    rz = np.vdot(r, z)
    rnorm = np.linalg.norm(r)
    it = 0
    while rnorm > tol * bnorm and it < maxiter:
        Ap = apply_A(p)
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        r = _deflate(r, null_basis)
        z = r if inv_diag is None else _deflate(inv_diag * r, null_basis)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        rnorm = np.linalg.norm(r)
        it += 1
    return CGResult(x, it, rnorm / bnorm, rnorm <= tol * bnorm)


class GradNormalOperator:
    """The operator ``A = G^T G`` where ``G`` is :func:`grid_ops.grad`.

    ``A`` is the Kronecker sum ``Kx (+) Ky`` of the 1D normal matrices, so it
    can be applied matrix-free for CG or inverted exactly on the zero-mean
    subspace through the eigenvectors of ``Kx`` and ``Ky``.  Its null space is
    the constants.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        Dx = grid_ops.diff_matrix_1d(grid.nx, grid.hx).toarray()
        Dy = grid_ops.diff_matrix_1d(grid.ny, grid.hy).toarray()
        self.Dx, self.Dy = Dx, Dy
        Kx, Ky = Dx.T @ Dx, Dy.T @ Dy
        self.diag = np.add.outer(np.diag(Kx), np.diag(Ky))
        lx, self.Qx = np.linalg.eigh(Kx)
        ly, self.Qy = np.linalg.eigh(Ky)
        lam = np.add.outer(lx, ly)
        # the constant mode has (numerically) zero eigenvalue in both factors
        lam[0, 0] = np.inf
        self.inv_lam = 1.0 / lam
        self.null_basis = (np.full(grid.shape, 1.0 / np.sqrt(grid.nx * grid.ny)),)

    def apply(self, phi):
        return self.adjoint_grad(grid_ops.grad(phi, self.grid))

    def adjoint_grad(self, v):
        """``G^T v`` for a vector field ``v`` (unweighted Euclidean adjoint)."""
        return self.Dx.T @ v[0] + v[1] @ self.Dy

    def solve_exact(self, b):
        bh = self.Qx.T @ b @ self.Qy
        return self.Qx @ (bh * self.inv_lam) @ self.Qy.T

    def solve_cg(self, b, x0=None, tol=1e-10, maxiter=5000):
        return pcg(self.apply, b, x0=x0, tol=tol, maxiter=maxiter,
                   diag=self.diag, null_basis=self.null_basis)


@lru_cache(maxsize=16)
def grad_normal_operator(grid: Grid) -> GradNormalOperator:
    return GradNormalOperator(grid)


class MaskedProjector:
    """Discrete Leray projection for velocities pinned to zero on boundary cells.

    With ``G0 = mask * grad`` the projection is ``u - G0 q`` where
    ``G0^T G0 q = G0^T u``.  The result is exactly orthogonal to every masked
    discrete gradient, so centered (zero-closure) divergence vanishes.  The
    normal matrix is singular (constants on the four parity sublattices and
    the untouched corner cells); one cell per null component is pinned and the
    rest is solved by a cached sparse LU factorization.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        nx, ny = grid.shape
        Dx = grid_ops.diff_matrix_1d(nx, grid.hx, "zero")
        Dy = grid_ops.diff_matrix_1d(ny, grid.hy, "zero")
        mask = sp.diags(grid.interior_mask().ravel().astype(float))
        Gx = mask @ sp.kron(Dx, sp.identity(ny))
        Gy = mask @ sp.kron(sp.identity(nx), Dy)
        self.Gx, self.Gy = Gx.tocsr(), Gy.tocsr()
        A = Gx.T @ Gx + Gy.T @ Gy
        # the right-hand side lies in range(A), so the equation at a pinned
        # cell follows from the others in its null component
        keep = np.ones(nx * ny)
        keep[self._pinned_cells(nx, ny)] = 0.0
        K = sp.diags(keep)
        A = (K @ A @ K + sp.diags(1.0 - keep)).tocsc()
        self.keep = keep
        self._lu = spla.splu(A)

    @staticmethod
    def _pinned_cells(nx, ny):
        cells = [(0, 0), (0, ny - 1), (nx - 1, 0), (nx - 1, ny - 1)]
        # one non-corner cell on each parity sublattice
        cells += [(1, 1), (1, 2), (2, 1), (2, 2)]
        return [i * ny + j for i, j in cells]

    def grad(self, q):
        qf = q.ravel()
        return np.stack([(self.Gx @ qf).reshape(self.grid.shape),
                         (self.Gy @ qf).reshape(self.grid.shape)])

    def adjoint(self, u):
        return (self.Gx.T @ u[0].ravel() + self.Gy.T @ u[1].ravel()).reshape(self.grid.shape)

    def potential(self, u):
        rhs = self.keep * self.adjoint(u).ravel()
        q = self._lu.solve(rhs).reshape(self.grid.shape)
        return q - q.mean()


@lru_cache(maxsize=16)
def masked_projector(grid: Grid) -> MaskedProjector:
    return MaskedProjector(grid)


@lru_cache(maxsize=64)
def helmholtz_solver(grid: Grid, coeff: float, bc: str):
    """Factorized ``(I - coeff * L)`` for the five-point Laplacian ``L``.

    ``bc="mask"`` solves only on interior cells with boundary cells held at 0.
    """
    n = grid.nx * grid.ny
    L = grid_ops.laplacian_matrix(grid, bc)
    A = sp.identity(n) - coeff * L
    if bc == "mask":
        keep = grid.interior_mask().ravel().astype(float)
        K = sp.diags(keep)
        A = K @ A @ K + sp.diags(1.0 - keep)
        lu = spla.splu(A.tocsc())
        return lambda f: lu.solve(keep * f.ravel()).reshape(grid.shape)
    lu = spla.splu(A.tocsc())
    return lambda f: lu.solve(f.ravel()).reshape(grid.shape)
