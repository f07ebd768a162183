"""Exception types shared across the package."""

from __future__ import annotations


class LqrpgError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LqrpgError, ValueError):
    """Input violates a documented precondition (shape, finiteness, symmetry)."""


class SingularMatrixError(LqrpgError):
    """Matrix is numerically singular (estimated condition number too large)."""


class UnstablePolicyError(LqrpgError):
    """The closed loop is not provably stable; the infinite-horizon cost is not finite.

    Carries the decay certificate produced by the repeated-squaring stability
    test, so callers can see the witnessing power and norm.
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class RiccatiConvergenceError(LqrpgError):
    """Fixed-point Riccati iteration exhausted its budget or diverged."""


class NotSamplableError(LqrpgError, ValueError):
    """The initial-state model carries only a covariance and cannot be sampled."""


class DivergedTrajectoryError(LqrpgError):
    """A simulated state exceeded the overflow threshold."""

    def __init__(self, message: str, step: int, trajectory: int | None = None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class EstimationFailedError(LqrpgError):
    """A zeroth-order estimate aborted because a perturbed rollout diverged.

    ``perturbation_index`` names the offending perturbation; ``policy`` holds
    the iterate at which estimation failed so the caller can restart.
    """

    def __init__(self, message: str, perturbation_index: int, policy=None):
        super().__init__(message)
        self.perturbation_index = perturbation_index
        self.policy = policy


class IllConditionedCovarianceError(LqrpgError):
    """Estimated state covariance stayed below the invertibility floor after a retry."""


class ProblemFileError(LqrpgError, ValueError):
    """A problem file failed to parse or validate; message carries the position."""
