"""Dense real-matrix kernel sized for state dimensions up to a few hundred.

Provides norms, inverses, symmetric eigenvalues, a spectral-radius test by
repeated squaring, and the doubling fixed-point solver for discrete Lyapunov
equations in both transpose orientations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, LqrpgError, SingularMatrixError, UnstablePolicyError

#: Relative symmetry tolerance accepted by :func:`symmetric_eig`.
SYMMETRY_RTOL = 1e-12

#: Matrix powers with norm above this are treated as overflowed.
OVERFLOW_LIMIT = 1e100


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array, rejecting empty or non-finite input."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"{name} must be a nonempty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def spectral_norm(m) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(m), 2))


def frobenius_norm(m) -> float:
    return float(np.linalg.norm(as_matrix(m)))


def trace(m) -> float:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"trace needs a square matrix, got {a.shape}")
    return float(np.trace(a))


def symmetric_eig(m) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending.

    The input must be symmetric within ``SYMMETRY_RTOL`` relative to its norm;
    anything worse is rejected rather than silently symmetrized.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"symmetric_eig needs a square matrix, got {a.shape}")
    scale = float(np.linalg.norm(a, 2))
    asym = float(np.linalg.norm(a - a.T, 2))
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise InvalidInputError(f"matrix is asymmetric: |m - m^T| = {asym:.3e} with |m| = {scale:.3e}")
    return np.linalg.eigvalsh(a)


def inverse(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"inverse needs a square matrix, got {a.shape}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrixError(f"matrix is numerically singular (cond ~ {cond:.3e})")
    return np.linalg.inv(a)


@dataclass(frozen=True)
class StabilityCertificate:
    """Outcome of the repeated-squaring spectral-radius test.

    ``power`` and ``norm`` witness the verdict: ``norm`` is the Frobenius norm
    of ``m**power``.  ``rho_upper`` is the tightest observed upper bound on the
    spectral radius, min over j of ``|m**(2^j)|_F ** (1/2^j)``; it is valid for
    every verdict because norms dominate spectral radii.
    """

    verdict: str  # "stable" | "unstable" | "marginal"
    power: int
    norm: float
    rho_upper: float

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def check_stability(m, tol: float = 1e-12, margin: float = 1e-6, max_doublings: int = 64) -> StabilityCertificate:
    """Decide whether the spectral radius of ``m`` is below 1 by repeated squaring.

    Squares ``m`` until either ``|m^(2^j)|_F < tol`` (stable) or the norm
    overflows / the doubling budget runs out, in which case the root test
    ``|m^(2^j)|^(1/2^j) >= 1 + margin`` separates unstable from marginal.
    The root test is only applied at those terminal points: early powers of a
    stable non-normal matrix can have norms far above 1, so a premature root
    verdict would misclassify them.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"stability test needs a square matrix, got {a.shape}")

    power = 1
    rho_upper = np.inf
    current = a
    for _ in range(max_doublings + 1):
        norm = float(np.linalg.norm(current))
        if not np.isfinite(norm):
            # norms can only blow up if every observed root was >= 1, so the
            # accumulated bound stays valid and certifies the verdict
            unstable = not np.isfinite(rho_upper) or rho_upper >= 1.0 + margin
            return StabilityCertificate("unstable" if unstable else "marginal", power, norm, rho_upper)
        root = norm ** (1.0 / power) if norm > 0.0 else 0.0
        rho_upper = min(rho_upper, root)
        if norm < tol:
            return StabilityCertificate("stable", power, norm, rho_upper)
        if norm > OVERFLOW_LIMIT:
            verdict = "unstable" if root >= 1.0 + margin else "marginal"
            return StabilityCertificate(verdict, power, norm, rho_upper)
        current = current @ current
        power *= 2

    verdict = "unstable" if rho_upper >= 1.0 + margin else "marginal"
    return StabilityCertificate(verdict, power // 2, norm, rho_upper)


def is_stable(m, tol: float = 1e-12) -> bool:
    """True iff the repeated-squaring test certifies spectral radius < 1."""
    return check_stability(m, tol=tol).stable


def _require_symmetric_psd(x0: np.ndarray, name: str) -> np.ndarray:
    scale = float(np.linalg.norm(x0, 2))
    asym = float(np.linalg.norm(x0 - x0.T, 2))
    if asym > 1e-10 * max(scale, 1e-300):
        raise InvalidInputError(f"{name} must be symmetric, asymmetry {asym:.3e}")
    sym = 0.5 * (x0 + x0.T)
    if scale > 0.0 and float(np.linalg.eigvalsh(sym)[0]) < -1e-10 * scale:
        raise InvalidInputError(f"{name} must be positive semidefinite")
    return sym


def _lyapunov_doubling(n: np.ndarray, x0: np.ndarray, tol: float, max_iter: int = 100) -> np.ndarray:
    """Fixed point of X = x0 + n X n^T by the doubling recursion.

    Assumes rho(n) < 1; converges in O(log(1/tol)) matrix products because the
    iterate after j doublings equals the partial series over t < 2^j.
    """
    x = x0.copy()
    mj = n.copy()
    for _ in range(max_iter):
        delta = mj @ x @ mj.T
        x = x + delta
        x = 0.5 * (x + x.T)
        if float(np.linalg.norm(delta)) <= 0.05 * tol * max(float(np.linalg.norm(x)), 1e-300):
            return x
        mj = mj @ mj
    raise LqrpgError("Lyapunov doubling recursion failed to converge on a certified-stable matrix")


def solve_lyapunov_dual(m, x0, side: str = "transpose_inside", tol: float = 1e-12) -> np.ndarray:
    """Unique fixed point of X = x0 + m^T X m or X = x0 + m X m^T.

    ``side="transpose_inside"`` solves the value-matrix orientation
    (X = x0 + m^T X m); ``side="transpose_outside"`` solves the covariance
    orientation (X = x0 + m X m^T).  Stability of ``m`` is certified first and
    an :class:`UnstablePolicyError` carrying the certificate is raised when it
    fails; marginal outcomes are treated as not provably stable.
    """
    a = as_matrix(m, "m")
    x = _require_symmetric_psd(as_matrix(x0, "x0"), "x0")
    if a.shape != x.shape:
        raise InvalidInputError(f"m and x0 shapes differ: {a.shape} vs {x.shape}")
    if side not in ("transpose_inside", "transpose_outside"):
        raise InvalidInputError(f"unknown side {side!r}")
    cert = check_stability(a)
    if not cert.stable:
        raise UnstablePolicyError(
            f"matrix is {cert.verdict}: |m^{cert.power}| = {cert.norm:.3e}", certificate=cert
        )
    n = a.T if side == "transpose_inside" else a
    return _lyapunov_doubling(n, x, tol)
