"""Exact-gradient optimization loops: gradient descent, natural gradient, Gauss-Newton.

Update conventions.  The gradient step moves along the full gradient
2 E_K Sigma_K.  The natural and Gauss-Newton steps move along E_K and
(R + B^T P_K B)^{-1} E_K respectively, so that eta = 1 for Gauss-Newton is
exactly policy iteration and the closed-form step sizes below deliver their
per-step contraction guarantees.  (The preconditioned *direction* helpers in
:mod:`lqrpg.lqr` carry the constant factor 2 of the raw gradient; the update
uses the E-scaled form that the step-size rules are calibrated for.)
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import InvalidInputError, UnstablePolicyError
from .lqr import LqrProblem, PolicyEvaluation, evaluate, policy_cost
from .riccati import RiccatiSolution
from .traces import BUDGET_EXHAUSTED, CONVERGED, DIVERGED, ConvergenceTrace, TraceRecord

METHODS = ("gd", "npg", "gn")

#: Most shrinkage attempts a single line search may make before giving up.
MAX_BACKTRACKS = 80


@dataclass(frozen=True)
class SolverConfig:
    """Method, step rule and stopping rule for one optimization run.

    ``step_rule`` is "paper" (closed-form constant step evaluated at K0),
    "backtracking" (Armijo line search, eta from 1 by factor ``shrink``), or a
    positive float used as a constant step.  Exactly one stopping rule is
    active: ``stop_gap`` (needs a Riccati oracle) or ``stop_grad_norm``.
    """

    method: str
    step_rule: str | float = "paper"
    max_iters: int = 1000
    stop_gap: float | None = None
    stop_grad_norm: float | None = None
    shrink: float = 0.5
    slope_fraction: float = 0.01

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        if isinstance(self.step_rule, str):
            if self.step_rule not in ("paper", "backtracking"):
                raise InvalidInputError(f"unknown step rule {self.step_rule!r}")
        elif not (isinstance(self.step_rule, (int, float)) and self.step_rule > 0):
            raise InvalidInputError("constant step size must be a positive number")
        if self.max_iters < 0:
            raise InvalidInputError("max_iters must be nonnegative")
        if (self.stop_gap is None) == (self.stop_grad_norm is None):
            raise InvalidInputError("exactly one of stop_gap / stop_grad_norm must be set")
        if not (0.0 < self.shrink < 1.0 and 0.0 < self.slope_fraction < 1.0):
            raise InvalidInputError("backtracking constants must lie in (0, 1)")


def _step_matrix(problem: LqrProblem, ev: PolicyEvaluation, method: str) -> np.ndarray:
    if method == "gd":
        return ev.grad
    if method == "npg":
        return ev.E
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    return np.linalg.solve(gram, ev.E)


def paper_step_size(problem: LqrProblem, ev0: PolicyEvaluation, method: str) -> float:
    """Closed-form constant step evaluated at the initial gain.

    Gauss-Newton uses eta = 1.  Natural gradient uses
    1 / (|R| + |B|^2 C(K0) / mu).  Gradient descent instantiates the explicit
    bound (1/16) min{ (sigma_min(Q) mu / C)^2 / (|B| |grad| (1 + |A - BK|)),
    sigma_min(Q) / (2 C |R + B^T P B|) } at K0.
    """
    if method == "gn":
        return 1.0
    norm_b = matkit.spectral_norm(problem.B)
    if method == "npg":
        norm_r = matkit.spectral_norm(problem.R)
        return 1.0 / (norm_r + norm_b**2 * ev0.cost / problem.mu)
    if method != "gd":
        raise InvalidInputError(f"unknown method {method!r}")
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    cost = ev0.cost
    grad_norm = matkit.spectral_norm(ev0.grad)
    loop_norm = matkit.spectral_norm(problem.A - problem.B @ ev0.K)
    gram_norm = matkit.spectral_norm(problem.R + problem.B.T @ ev0.P @ problem.B)
    if grad_norm == 0.0:
        return sig_q / (32.0 * cost * gram_norm)
    branch1 = (sig_q * problem.mu / cost) ** 2 / (norm_b * grad_norm * (1.0 + loop_norm))
    branch2 = sig_q / (2.0 * cost * gram_norm)
    return min(branch1, branch2) / 16.0


def _backtrack(problem, K, cost, direction, slope, shrink, c):
    """Armijo search along -direction; unstable trials count as infinite cost."""
    eta = 1.0
    for _ in range(MAX_BACKTRACKS):
        trial = K - eta * direction
        try:
            trial_cost = policy_cost(problem, trial)
        except UnstablePolicyError:
            trial_cost = np.inf
        if trial_cost <= cost - c * eta * slope:
            return eta, trial, trial_cost
        eta *= shrink
    return None


def optimize(
    problem: LqrProblem,
    K0,
    config: SolverConfig,
    oracle: RiccatiSolution | None = None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Run one exact-gradient method from K0 and return the final gain with its trace.

    With an oracle present the gap column is populated and the ``stop_gap``
    rule is available.  The cost sequence is non-increasing for the "paper"
    and "backtracking" step rules; a constant step that destabilizes the
    iterate ends the run with status "diverged".
    """
    if config.stop_gap is not None and oracle is None:
        raise InvalidInputError("stop_gap stopping rule requires a Riccati oracle")
    ev = evaluate(problem, K0)
    trace = ConvergenceTrace()
    eta_paper: float | None = None
    if config.step_rule == "paper":
        eta_paper = paper_step_size(problem, ev, config.method)
        if config.method == "npg" and oracle is not None:
            sigma_star_norm = matkit.spectral_norm(evaluate(problem, oracle.K_star).Sigma)
            sig_r = float(np.linalg.eigvalsh(problem.R)[0])
            trace.contraction_factor = 1.0 - eta_paper * sig_r * problem.mu / sigma_star_norm

    start = time.perf_counter()
    status = BUDGET_EXHAUSTED
    for n in range(config.max_iters + 1):
        grad_norm = float(np.linalg.norm(ev.grad))
        gap = ev.cost - oracle.opt_cost if oracle is not None else None
        record = TraceRecord(
            iteration=n,
            cost=ev.cost,
            gap=gap,
            grad_norm=grad_norm,
            step=None,
            wall_s=time.perf_counter() - start,
        )
        trace.records.append(record)

        if config.stop_gap is not None and gap is not None and gap <= config.stop_gap:
            status = CONVERGED
            break
        if config.stop_grad_norm is not None and grad_norm <= config.stop_grad_norm:
            status = CONVERGED
            break
        if grad_norm == 0.0:
            status = CONVERGED
            break
        if n == config.max_iters:
            break

        direction = _step_matrix(problem, ev, config.method)
        if config.step_rule == "backtracking":
            slope = float(np.sum(ev.grad * direction))
            hit = _backtrack(problem, ev.K, ev.cost, direction, slope, config.shrink, config.slope_fraction)
            if hit is None:
                break
            eta, k_next, _ = hit
        else:
            eta = eta_paper if eta_paper is not None else float(config.step_rule)
            k_next = ev.K - eta * direction
        record.step = eta
        try:
            ev = evaluate(problem, k_next)
        except UnstablePolicyError:
            if config.step_rule in ("paper", "backtracking"):
                raise
            status = DIVERGED
            break
    trace.status = status
    return ev.K, trace
