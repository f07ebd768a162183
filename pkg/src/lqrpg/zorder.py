"""Model-free gradient and covariance estimation, and the model-free descent loops.

Each estimate perturbs the gain on a Frobenius sphere of radius r, rolls out
the perturbed gains for a finite horizon from fresh initial states, and
averages (pd / r^2) C_hat_i U_i where pd = k*d is the dimension of the
perturbation space.  The update path touches nothing but rollouts; true
policy evaluations appear only in the reporting columns of the trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DivergedTrajectoryError,
    EstimationFailedError,
    IllConditionedCovarianceError,
    InvalidInputError,
    UnstablePolicyError,
)
from .lqr import evaluate
from .riccati import RiccatiSolution
from .sim import RngHandle, Simulator
from .traces import BUDGET_EXHAUSTED, CONVERGED, ConvergenceTrace, TraceRecord

#: Stream enumeration: initial states, perturbations, covariance-floor
#: retries, and the Monte Carlo estimate of C(K0), indexed by estimate number.
X0_STREAM_BASE = 1
PERTURBATION_STREAM_BASE = 10**6
RETRY_STREAM_BASE = 5 * 10**5
COST_ESTIMATE_STREAM = 2 * 10**6


@dataclass(frozen=True)
class ZerothOrderConfig:
    """Sampling budget and smoothing geometry for one model-free run.

    ``m`` trajectories per estimate, rollout length ``horizon``, Frobenius
    smoothing radius ``radius``; ``step`` is a float or "paper" for the
    closed-form natural-gradient step evaluated at K0.  ``param_dim`` is the
    dimension k*d of the perturbation space and is validated against the
    plant when the config is used.
    """

    m: int
    horizon: int
    radius: float
    step: float | str = "paper"
    max_outer_iters: int = 100
    param_dim: int | None = None
    stop_gap: float | None = None

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInputError("m must be at least 1")
        if self.horizon < 1:
            raise InvalidInputError("horizon must be at least 1")
        if self.radius <= 0:
            raise InvalidInputError("radius must be positive")
        if isinstance(self.step, str) and self.step != "paper":
            raise InvalidInputError(f"unknown step rule {self.step!r}")
        if not isinstance(self.step, str) and self.step <= 0:
            raise InvalidInputError("step size must be positive")
        if self.max_outer_iters < 0:
            raise InvalidInputError("max_outer_iters must be nonnegative")


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    grad_hat: np.ndarray
    sigma_hat: np.ndarray
    samples_used: int


def default_radius(K0) -> float:
    """Documented heuristic: r = 0.05 (1 + |K0|_F)."""
    return 0.05 * (1.0 + float(np.linalg.norm(np.asarray(K0, dtype=float))))


def sample_sphere_matrix(k: int, d: int, r: float, rng: RngHandle | np.random.Generator) -> np.ndarray:
    """One matrix uniform on the Frobenius sphere of radius r in R^{k x d}."""
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    return sample_sphere_matrices(1, k, d, r, gen)[0]


def sample_sphere_matrices(n: int, k: int, d: int, r: float, gen: np.random.Generator) -> np.ndarray:
    if r <= 0:
        raise InvalidInputError("radius must be positive")
    u = gen.standard_normal((n, k, d))
    norms = np.sqrt(np.einsum("ikd,ikd->i", u, u))
    norms[norms == 0.0] = 1.0
    return r * u / norms[:, None, None]


def _resolve_param_dim(plant: Simulator, cfg: ZerothOrderConfig) -> int:
    pd = plant.k * plant.d
    if cfg.param_dim is not None and cfg.param_dim != pd:
        raise InvalidInputError(f"param_dim {cfg.param_dim} does not match k*d = {pd}")
    return pd


def estimate(plant: Simulator, K, cfg: ZerothOrderConfig, rng: RngHandle) -> GradientEstimate:
    """One perturbation-sphere estimate of the gradient and state covariance.

    ``rng.stream`` indexes the estimate: initial states come from stream
    X0_STREAM_BASE + index and perturbations from PERTURBATION_STREAM_BASE +
    index, so repeated runs with one seed reproduce every draw.  A diverged
    perturbed rollout aborts with the perturbation index (shrink r or pick a
    more stable gain and retry).
    """
    k_arr = np.asarray(K, dtype=float)
    pd = _resolve_param_dim(plant, cfg)
    index = rng.stream
    u_gen = RngHandle(rng.seed, PERTURBATION_STREAM_BASE + index).generator()
    x0_gen = RngHandle(rng.seed, X0_STREAM_BASE + index).generator()
    perturbations = sample_sphere_matrices(cfg.m, plant.k, plant.d, cfg.radius, u_gen)
    x0s = plant.sample_initial_states(cfg.m, x0_gen)
    try:
        costs, sigma_sum = plant.rollout_batch(k_arr[None, :, :] + perturbations, x0s, cfg.horizon)
    except DivergedTrajectoryError as exc:
        raise EstimationFailedError(
            f"perturbed rollout {exc.trajectory} diverged at step {exc.step}",
            perturbation_index=exc.trajectory if exc.trajectory is not None else -1,
            policy=k_arr,
        ) from exc
    grad_hat = (pd / cfg.radius**2) * np.einsum("i,ikd->kd", costs, perturbations) / cfg.m
    sigma_hat = sigma_sum / cfg.m
    return GradientEstimate(grad_hat=grad_hat, sigma_hat=sigma_hat, samples_used=cfg.m)


def _estimate_initial_cost(plant: Simulator, K, cfg: ZerothOrderConfig, seed: int) -> float:
    """Monte Carlo C(K0) over 100 unperturbed rollouts; used by the paper step rule."""
    gen = RngHandle(seed, COST_ESTIMATE_STREAM).generator()
    x0s = plant.sample_initial_states(100, gen)
    gains = np.broadcast_to(np.asarray(K, dtype=float), (100, plant.k, plant.d)).copy()
    costs, _ = plant.rollout_batch(gains, x0s, cfg.horizon)
    return float(np.mean(costs))


def run_modelfree(
    plant: Simulator,
    K0,
    cfg: ZerothOrderConfig,
    method: str,
    rng: RngHandle,
    oracle: RiccatiSolution | None = None,
) -> tuple[np.ndarray, ConvergenceTrace]:
    """Model-free gradient descent or natural gradient descent from K0.

    A fresh estimate is drawn every iteration.  The natural update divides
    the estimated gradient by the estimated covariance and then applies the
    E-scaled step convention of the exact loops (half the preconditioned
    gradient), so the closed-form step size keeps its contraction guarantee.
    The covariance is only inverted while sigma_min(sigma_hat) >= mu/2; one
    doubled-m retry is attempted below the floor before aborting.

    Trace costs and gaps come from true policy evaluations, for reporting
    only; the update path consumes nothing but rollouts.
    """
    if method not in ("gd", "npg"):
        raise InvalidInputError(f"model-free method must be gd or npg, got {method!r}")
    k_cur = np.asarray(K0, dtype=float).copy()
    pd = _resolve_param_dim(plant, cfg)
    mu = plant.init.mu
    trace = ConvergenceTrace()
    samples = 0

    if cfg.step == "paper":
        if oracle is not None:
            c0 = evaluate(plant.problem, k_cur).cost
        else:
            c0 = _estimate_initial_cost(plant, k_cur, cfg, rng.seed)
            samples += 100
        norm_r, norm_b, _ = plant.step_size_constants()
        if method == "npg":
            eta = 1.0 / (norm_r + norm_b**2 * c0 / mu)
        else:
            raise InvalidInputError("the closed-form step rule is defined for npg only; pass a numeric step for gd")
    else:
        eta = float(cfg.step)

    start = time.perf_counter()
    status = BUDGET_EXHAUSTED
    for n in range(cfg.max_outer_iters + 1):
        cost = gap = grad_norm = None
        try:
            ev = evaluate(plant.problem, k_cur)
            cost = ev.cost
            grad_norm = float(np.linalg.norm(ev.grad))
            if oracle is not None:
                gap = cost - oracle.opt_cost
        except UnstablePolicyError:
            pass
        record = TraceRecord(
            iteration=n,
            cost=cost,
            gap=gap,
            grad_norm=grad_norm,
            step=None,
            wall_s=time.perf_counter() - start,
            samples=samples,
        )
        trace.records.append(record)
        if cfg.stop_gap is not None and gap is not None and gap <= cfg.stop_gap:
            status = CONVERGED
            break
        if n == cfg.max_outer_iters:
            break

        est = estimate(plant, k_cur, cfg, RngHandle(rng.seed, n))
        samples += est.samples_used
        sigma_hat = est.sigma_hat
        if method == "npg":
            if float(np.linalg.eigvalsh(sigma_hat)[0]) < mu / 2.0:
                retry_cfg = replace(cfg, m=2 * cfg.m)
                est = estimate(plant, k_cur, retry_cfg, RngHandle(rng.seed, RETRY_STREAM_BASE + n))
                samples += est.samples_used
                sigma_hat = est.sigma_hat
                if float(np.linalg.eigvalsh(sigma_hat)[0]) < mu / 2.0:
                    raise IllConditionedCovarianceError(
                        f"sigma_min(sigma_hat) stayed below mu/2 = {mu / 2.0:.3e} after doubling m"
                    )
            direction = 0.5 * est.grad_hat @ np.linalg.inv(sigma_hat)
        else:
            direction = est.grad_hat
        record.step = eta
        k_cur = k_cur - eta * direction
    trace.status = status
    return k_cur, trace
