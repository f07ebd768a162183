"""Problem definition and exact policy evaluation.

A policy is a plain gain matrix ``K`` (shape k x d) acting as ``u = -K x``.
Evaluating a stabilizing gain yields the value matrix P, the unnormalized
state covariance Sigma, the scalar cost, the optimality residual
``E = (R + B^T P B) K - B^T P A`` and the exact gradient ``2 E Sigma``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import InvalidInputError, UnstablePolicyError


@dataclass(frozen=True, eq=False)
class InitialStateModel:
    """Second-moment model of the random initial state.

    ``kind`` is one of ``fixed_covariance`` (moment only, not samplable),
    ``cube`` (uniform on [-1, 1]^d, second moment I/3, norm bound sqrt(d)) or
    ``sphere`` (uniform on the radius-rho sphere, second moment (rho^2/d) I,
    norm bound rho).  For the sampling kinds the stored covariance must match
    the analytic form of the kind.
    """

    kind: str
    sigma0: np.ndarray
    norm_bound: float | None = None

    def __post_init__(self):
        sigma0 = matkit.as_matrix(self.sigma0, "sigma0")
        d = sigma0.shape[0]
        if sigma0.shape != (d, d):
            raise InvalidInputError(f"sigma0 must be square, got {sigma0.shape}")
        scale = matkit.spectral_norm(sigma0)
        if matkit.spectral_norm(sigma0 - sigma0.T) > 1e-12 * max(scale, 1e-300):
            raise InvalidInputError("sigma0 must be symmetric")
        sigma0 = 0.5 * (sigma0 + sigma0.T)
        if float(np.linalg.eigvalsh(sigma0)[0]) <= 0.0:
            raise InvalidInputError("sigma0 must be positive definite (excitation floor mu > 0)")
        if self.kind == "cube":
            if not np.allclose(sigma0, np.eye(d) / 3.0, atol=1e-12):
                raise InvalidInputError("cube initial states have second moment I/3")
            object.__setattr__(self, "norm_bound", float(np.sqrt(d)))
        elif self.kind == "sphere":
            radius_sq = d * sigma0[0, 0]
            if not np.allclose(sigma0, (radius_sq / d) * np.eye(d), atol=1e-12) or radius_sq <= 0:
                raise InvalidInputError("sphere initial states have second moment (radius^2/d) I")
            object.__setattr__(self, "norm_bound", float(np.sqrt(radius_sq)))
        elif self.kind != "fixed_covariance":
            raise InvalidInputError(f"unknown initial-state kind {self.kind!r}")
        object.__setattr__(self, "sigma0", sigma0)

    @classmethod
    def fixed_covariance(cls, sigma0) -> "InitialStateModel":
        return cls("fixed_covariance", np.asarray(sigma0, dtype=float))

    @classmethod
    def unit_cube(cls, d: int) -> "InitialStateModel":
        return cls("cube", np.eye(d) / 3.0)

    @classmethod
    def sphere(cls, d: int, radius: float = 1.0) -> "InitialStateModel":
        return cls("sphere", (radius**2 / d) * np.eye(d))

    @property
    def dim(self) -> int:
        return self.sigma0.shape[0]

    @property
    def mu(self) -> float:
        """Excitation floor: smallest eigenvalue of the initial second moment."""
        return float(np.linalg.eigvalsh(self.sigma0)[0])

    @property
    def mean_square_norm(self) -> float:
        """E |x0|^2, the trace of the second moment."""
        return float(np.trace(self.sigma0))


@dataclass(frozen=True, eq=False)
class LqrProblem:
    """Plant (A, B), quadratic costs (Q, R) and the initial-state model."""

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    init: InitialStateModel

    def __post_init__(self):
        a = matkit.as_matrix(self.A, "A")
        b = matkit.as_matrix(self.B, "B")
        q = matkit.as_matrix(self.Q, "Q")
        r = matkit.as_matrix(self.R, "R")
        d = a.shape[0]
        k = b.shape[1]
        if a.shape != (d, d):
            raise InvalidInputError(f"A must be square, got {a.shape}")
        if b.shape != (d, k):
            raise InvalidInputError(f"B must be {d}x{k}, got {b.shape}")
        if q.shape != (d, d):
            raise InvalidInputError(f"Q must be {d}x{d}, got {q.shape}")
        if r.shape != (k, k):
            raise InvalidInputError(f"R must be {k}x{k}, got {r.shape}")
        if self.init.dim != d:
            raise InvalidInputError(f"initial-state model has dimension {self.init.dim}, expected {d}")
        for name, mat in (("Q", q), ("R", r)):
            if matkit.spectral_norm(mat - mat.T) > 1e-12 * max(matkit.spectral_norm(mat), 1e-300):
                raise InvalidInputError(f"{name} must be symmetric")
            if float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0]) <= 0.0:
                raise InvalidInputError(f"{name} must be positive definite")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "Q", 0.5 * (q + q.T))
        object.__setattr__(self, "R", 0.5 * (r + r.T))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.B.shape[1]

    @property
    def sigma0(self) -> np.ndarray:
        return self.init.sigma0

    @property
    def mu(self) -> float:
        return self.init.mu

    def gain_shape(self) -> tuple[int, int]:
        return (self.k, self.d)


@dataclass(frozen=True, eq=False)
class PolicyEvaluation:
    """Exact infinite-horizon quantities for one stabilizing gain."""

    K: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    cost: float
    E: np.ndarray
    grad: np.ndarray


def validate_gain(problem: LqrProblem, K) -> np.ndarray:
    k_arr = matkit.as_matrix(K, "K")
    if k_arr.shape != problem.gain_shape():
        raise InvalidInputError(f"K must be {problem.gain_shape()}, got {k_arr.shape}")
    return k_arr


def closed_loop(problem: LqrProblem, K) -> np.ndarray:
    return problem.A - problem.B @ validate_gain(problem, K)


def evaluate(problem: LqrProblem, K, tol: float = 1e-12) -> PolicyEvaluation:
    """Solve both policy Lyapunov equations and assemble cost, E and gradient.

    Raises :class:`UnstablePolicyError` when the closed loop A - BK is not
    certified stable; the infinite-horizon cost does not exist in that case.
    """
    k_arr = validate_gain(problem, K)
    m = problem.A - problem.B @ k_arr
    cert = matkit.check_stability(m)
    if not cert.stable:
        raise UnstablePolicyError(
            f"closed loop A - BK is {cert.verdict} (|(A-BK)^{cert.power}| = {cert.norm:.3e})",
            certificate=cert,
        )
    stage = problem.Q + k_arr.T @ problem.R @ k_arr
    p = matkit._lyapunov_doubling(m.T, 0.5 * (stage + stage.T), tol)
    sigma = matkit._lyapunov_doubling(m, problem.sigma0, tol)
    e = (problem.R + problem.B.T @ p @ problem.B) @ k_arr - problem.B.T @ p @ problem.A
    grad = 2.0 * e @ sigma
    cost = float(np.trace(p @ problem.sigma0))
    return PolicyEvaluation(K=k_arr, P=p, Sigma=sigma, cost=cost, E=e, grad=grad)


def policy_cost(problem: LqrProblem, K, tol: float = 1e-12) -> float:
    """Cost alone, via the value-matrix Lyapunov solve only (cheaper than evaluate)."""
    k_arr = validate_gain(problem, K)
    m = problem.A - problem.B @ k_arr
    cert = matkit.check_stability(m)
    if not cert.stable:
        raise UnstablePolicyError(f"closed loop A - BK is {cert.verdict}", certificate=cert)
    stage = problem.Q + k_arr.T @ problem.R @ k_arr
    p = matkit._lyapunov_doubling(m.T, 0.5 * (stage + stage.T), tol)
    return float(np.trace(p @ problem.sigma0))


def advantage(problem: LqrProblem, K, Kp, x) -> float:
    """One-step advantage of deviating to u = -K' x at state x, then following K.

    Closed form: 2 x^T (K'-K)^T E_K x + x^T (K'-K)^T (R + B^T P_K B) (K'-K) x.
    """
    ev = evaluate(problem, K)
    return advantage_from_eval(problem, ev, Kp, x)


def advantage_from_eval(problem: LqrProblem, ev: PolicyEvaluation, Kp, x) -> float:
    kp = validate_gain(problem, Kp)
    x_vec = np.asarray(x, dtype=float).reshape(-1)
    if x_vec.shape[0] != problem.d:
        raise InvalidInputError(f"state must have dimension {problem.d}, got {x_vec.shape[0]}")
    dk_x = (kp - ev.K) @ x_vec
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    return float(2.0 * dk_x @ (ev.E @ x_vec) + dk_x @ gram @ dk_x)


def gradient_direction(ev: PolicyEvaluation) -> np.ndarray:
    """The exact gradient 2 E_K Sigma_K."""
    return ev.grad


def natural_direction(ev: PolicyEvaluation) -> np.ndarray:
    """Gradient preconditioned by Sigma_K^{-1}; equals 2 E_K exactly."""
    return 2.0 * ev.E


def gauss_newton_direction(problem: LqrProblem, ev: PolicyEvaluation) -> np.ndarray:
    """Gradient preconditioned by (R + B^T P B)^{-1} and Sigma^{-1}: 2 (R + B^T P B)^{-1} E_K."""
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    return 2.0 * np.linalg.solve(gram, ev.E)


def optimality_gap_bounds(problem: LqrProblem, ev: PolicyEvaluation, sigma_kstar_norm: float) -> tuple[float, float]:
    """Gradient-domination sandwich around C(K) - C(K*).

    Upper bound |Sigma_{K*}| / (mu^2 sigma_min(R)) |grad|_F^2, lower bound
    mu / |R + B^T P B| tr(E^T E); the true gap always lies between them.
    """
    mu = problem.mu
    sigma_min_r = float(np.linalg.eigvalsh(problem.R)[0])
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    upper = sigma_kstar_norm / (mu**2 * sigma_min_r) * float(np.sum(ev.grad * ev.grad))
    lower = mu / matkit.spectral_norm(gram) * float(np.sum(ev.E * ev.E))
    return upper, lower
