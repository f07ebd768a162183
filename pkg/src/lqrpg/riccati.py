"""Model-based ground truth: fixed-point solution of the discrete ARE.

Runs the plain Hewer recursion P <- Q + A^T P A - A^T P B (R + B^T P B)^{-1} B^T P A
from P = Q.  The contraction of this map (for stabilizable plants) makes the
iteration converge to the unique positive semidefinite solution; no Schur or
Hamiltonian machinery is used.  Non-stabilizable instances are detected only
through divergence or budget exhaustion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import RiccatiConvergenceError
from .lqr import LqrProblem


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    P_star: np.ndarray
    K_star: np.ndarray
    opt_cost: float
    iterations: int
    residual: float


def _riccati_map(problem: LqrProblem, p: np.ndarray) -> np.ndarray:
    a, b = problem.A, problem.B
    gram = problem.R + b.T @ p @ b
    gain = np.linalg.solve(gram, b.T @ p @ a)
    nxt = problem.Q + a.T @ p @ a - a.T @ p @ b @ gain
    return 0.5 * (nxt + nxt.T)


def solve_dare(problem: LqrProblem, tol: float = 1e-12, max_iter: int = 100000) -> RiccatiSolution:
    """Fixed point of the Riccati map plus the optimal gain and cost.

    The gain uses the u = -Kx convention, K* = (R + B^T P B)^{-1} B^T P A,
    which makes the optimality residual E vanish at K*.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = problem.Q.copy()
    for n in range(1, max_iter + 1):
        p_next = _riccati_map(problem, p)
        diff = float(np.linalg.norm(p_next - p))
        scale = max(float(np.linalg.norm(p)), 1e-300)
        if not np.isfinite(diff) or float(np.linalg.norm(p_next)) > 1e100:
            raise RiccatiConvergenceError(
                f"Riccati iterates diverged at step {n}; instance appears non-stabilizable"
            )
        p = p_next
        if diff <= tol * scale:
            break
    else:
        raise RiccatiConvergenceError(
            f"Riccati iteration exhausted {max_iter} steps without |P_next - P| <= tol |P|"
        )

    gram = problem.R + problem.B.T @ p @ problem.B
    k_star = np.linalg.solve(gram, problem.B.T @ p @ problem.A)
    residual = matkit.spectral_norm(p - _riccati_map(problem, p))
    opt_cost = float(np.trace(p @ problem.sigma0))
    return RiccatiSolution(P_star=p, K_star=k_star, opt_cost=opt_cost, iterations=n, residual=residual)
