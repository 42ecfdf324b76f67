"""Magnetostatic potential: -lap(phi) = div m, d(phi)/dn = (h_a - m).n, mean(phi) = 0.

The discrete problem is posed as a least-squares projection: ``h = grad(phi)``
is the L2-orthogonal projection of ``h_a - m`` onto the range of the discrete
gradient, i.e. ``G^T G phi = G^T (h_a - m)``.  Its optimality condition is the
weak form of the Neumann problem, the Neumann data enter naturally, and the
identity ``<grad psi, h + m> = <grad psi, h_a>`` holds for every discrete
potential ``psi``.  The last property gives an exact discrete counterpart of
the magnetic energy balance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid_ops
from .linalg import SolverError, grad_normal_operator
from .model import Grid


@dataclass(frozen=True)
class PoissonSolveReport:
    iterations: int
    final_residual_norm: float
    compatibility_defect: float
    method: str


def neumann_rhs(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Right-hand side ``G^T v`` for the projection of ``v`` onto gradients."""
    return grad_normal_operator(grid).adjoint_grad(v)


def compatibility_defect(rhs: np.ndarray, grid: Grid) -> float:
    """Discrete net flux of the Neumann data; zero when the problem is solvable."""
    return abs(float(np.sum(rhs))) * grid.cell_area


def solve_neumann(rhs, grid: Grid, tol=1e-10, method="cg", x0=None, maxiter=10000):
    """Solve ``G^T G phi = rhs`` for a zero-mean ``phi``.

    ``rhs`` must have zero net flux (sum); otherwise the system has no
    solution and :class:`SolverError` is raised.  Returns ``(phi, report)``.
    """
    op = grad_normal_operator(grid)
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise SolverError("non-finite data in potential solve")
    defect = compatibility_defect(rhs, grid)
    scale = float(np.abs(rhs).sum()) * grid.cell_area
    if defect > 1e2 * tol * max(scale, 1.0):
        raise SolverError("incompatible Neumann data",
                          PoissonSolveReport(0, np.inf, defect, method))
    if method == "exact":
        phi = op.solve_exact(rhs)
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(rhs - op.apply(phi)) / bnorm if bnorm > 0 else 0.0
        report = PoissonSolveReport(1, float(res), defect, method)
    elif method == "cg":
        result = op.solve_cg(rhs, x0=x0, tol=tol, maxiter=maxiter)
        report = PoissonSolveReport(result.iterations, result.residual_norm, defect, method)
        if not result.converged:
            raise SolverError("potential solve did not converge", report)
        phi = result.x
    else:
        raise ValueError(f"unknown method {method!r}")
    return phi - phi.mean(), report


def _solve(v, grid, tol, method, x0, maxiter):
    phi, report = solve_neumann(neumann_rhs(v, grid), grid, tol, method, x0, maxiter)
    return phi, grid_ops.grad(phi, grid), report


def solve_potential(m, h_a, grid: Grid, tol=1e-10, method="cg", x0=None, maxiter=10000):
    """Solve for the potential driven by magnetization ``m`` and applied field ``h_a``.

    Returns ``(phi, h, report)`` with ``h = grad(phi)`` and ``mean(phi) = 0``.
    ``method`` is ``"cg"`` (Jacobi-preconditioned CG with mean deflation) or
    ``"exact"`` (eigen-decomposition of the separable normal operator).
    """
    return _solve(np.asarray(h_a, float) - np.asarray(m, float), grid, tol, method, x0, maxiter)


def solve_limit_potential(h_a, kappa0: float, grid: Grid, tol=1e-10, method="cg", x0=None,
                          maxiter=10000):
    """Potential of the quasi-equilibrium system, where M = kappa0 H.

    Substituting M = kappa0 H leaves a Laplace problem with Neumann data
    ``h_a.n / (1 + kappa0)``, independent of the flow.
    """
    return _solve(np.asarray(h_a, float) / (1.0 + kappa0), grid, tol, method, x0, maxiter)


def project_gradient(v, grid: Grid) -> np.ndarray:
    """L2 projection of ``v`` onto discrete gradients (exact solve)."""
    op = grad_normal_operator(grid)
    return grid_ops.grad(op.solve_exact(op.adjoint_grad(v)), grid)
