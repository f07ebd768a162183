"""Random stabilizable instances and gains for tests, the verifier and the CLI."""

from __future__ import annotations

import numpy as np

from . import matkit
from .lqr import InitialStateModel, LqrProblem


def random_problem(
    d: int,
    k: int,
    rng: np.random.Generator,
    spectral_scale: float = 0.95,
    cost_style: str = "identity",
    init_kind: str = "cube",
    radius: float = 1.0,
) -> LqrProblem:
    """Random plant with |A| scaled to ``spectral_scale`` so that K = 0 is stabilizing.

    ``cost_style="identity"`` gives Q = R = I; ``"random_pd"`` gives
    well-conditioned random positive definite costs.
    """
    if d < 1 or k < 1:
        raise ValueError("dimensions must be at least 1")
    a = rng.standard_normal((d, d))
    a *= spectral_scale / max(matkit.spectral_norm(a), 1e-300)
    b = rng.standard_normal((d, k)) / np.sqrt(d)
    if cost_style == "identity":
        q = np.eye(d)
        r = np.eye(k)
    elif cost_style == "random_pd":
        wq = rng.standard_normal((d, d))
        wr = rng.standard_normal((k, k))
        q = np.eye(d) + wq @ wq.T / (2.0 * d)
        r = np.eye(k) + wr @ wr.T / (2.0 * k)
    else:
        raise ValueError(f"unknown cost_style {cost_style!r}")
    if init_kind == "cube":
        init = InitialStateModel.unit_cube(d)
    elif init_kind == "sphere":
        init = InitialStateModel.sphere(d, radius)
    elif init_kind == "fixed_covariance":
        init = InitialStateModel.fixed_covariance(np.eye(d))
    else:
        raise ValueError(f"unknown init_kind {init_kind!r}")
    return LqrProblem(A=a, B=b, Q=q, R=r, init=init)


def random_stable_gain(problem: LqrProblem, rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    """Random gain guaranteed stabilizing via the norm bound |A - BK| <= |A| + |B||K| < 1.

    Requires |A| < 1 (as produced by :func:`random_problem`); ``scale`` in
    (0, 1) sets how much of the remaining norm margin the gain may consume.
    """
    norm_a = matkit.spectral_norm(problem.A)
    if norm_a >= 1.0:
        raise ValueError("random_stable_gain needs |A| < 1")
    base = rng.standard_normal((problem.k, problem.d))
    cap = scale * (1.0 - norm_a) / (matkit.spectral_norm(problem.B) * max(matkit.spectral_norm(base), 1e-300))
    return cap * base


def scalar_problem(a: float = 0.5, b: float = 1.0, q: float = 1.0, r: float = 1.0, sigma0: float = 1.0) -> LqrProblem:
    """One-dimensional instance with a fixed covariance; the workhorse oracle case."""
    return LqrProblem(
        A=np.array([[a]]),
        B=np.array([[b]]),
        Q=np.array([[q]]),
        R=np.array([[r]]),
        init=InitialStateModel.fixed_covariance(np.array([[sigma0]])),
    )
