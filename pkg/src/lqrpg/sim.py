"""Trajectory simulation with seedable deterministic RNG streams.

Rollouts treat the plant as a black box: a :class:`Simulator` hands out
trajectories, truncated costs and summed state outer products, and exposes
only the quantities an experimenter would know (dimensions, the initial-state
model, cost-scale constants).  Batch simulation is vectorized across
trajectories and split into fixed-size chunks, so results are bit-identical
for any worker-pool size.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import matkit
from .errors import DivergedTrajectoryError, InvalidInputError, NotSamplableError
from .lqr import InitialStateModel, LqrProblem, validate_gain

#: State norms beyond this raise DivergedTrajectoryError instead of overflowing.
DIVERGENCE_LIMIT = 1e150

#: Trajectories per work unit in batch simulation; fixed so thread count
#: cannot affect reduction order.
CHUNK = 4096


@dataclass(frozen=True)
class RngHandle:
    """A (seed, stream) pair naming one reproducible random stream.

    The same pair always yields the identical sample sequence; distinct
    streams are statistically independent (counter-based Philox keying).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = (int(self.seed) & (2**64 - 1)) * 2**64 + (int(self.stream) & (2**64 - 1))
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States x_0..x_l, controls u_0..u_{l-1} and stage costs under u = -Kx."""

    states: np.ndarray
    controls: np.ndarray
    stage_costs: np.ndarray

    @property
    def horizon(self) -> int:
        return self.stage_costs.shape[0]

    @property
    def total_cost(self) -> float:
        """Truncated cost: sum of the stage costs over t < horizon."""
        return float(np.sum(self.stage_costs))

    @property
    def state_outer_sum(self) -> np.ndarray:
        """Sum over t < horizon of x_t x_t^T (the initial state included)."""
        x = self.states[:-1]
        return x.T @ x


def sample_initial_state(init: InitialStateModel, rng: RngHandle | np.random.Generator) -> np.ndarray:
    """One draw from the initial-state distribution (cube or sphere kinds only)."""
    gen = rng.generator() if isinstance(rng, RngHandle) else rng
    return sample_initial_states(init, 1, gen)[0]


def sample_initial_states(init: InitialStateModel, n: int, gen: np.random.Generator) -> np.ndarray:
    d = init.dim
    if init.kind == "cube":
        return gen.uniform(-1.0, 1.0, size=(n, d))
    if init.kind == "sphere":
        radius = init.norm_bound
        x = gen.standard_normal((n, d))
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        # zero draws have measure zero; replace defensively
        norms[norms == 0.0] = 1.0
        return radius * x / norms
    raise NotSamplableError("a fixed-covariance initial-state model carries no distribution to sample")


def rollout(problem: LqrProblem, K, x0, horizon: int) -> Trajectory:
    """Simulate u = -Kx for ``horizon`` steps from x0.

    No stability is required; growing states are legal until the divergence
    limit, past which a DivergedTrajectoryError carries the step index.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be at least 1")
    k_arr = validate_gain(problem, K)
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != problem.d:
        raise InvalidInputError(f"x0 must have dimension {problem.d}")
    states = np.empty((horizon + 1, problem.d))
    controls = np.empty((horizon, problem.k))
    costs = np.empty(horizon)
    states[0] = x
    for t in range(horizon):
        if float(np.linalg.norm(x)) > DIVERGENCE_LIMIT:
            raise DivergedTrajectoryError(f"state norm exceeded {DIVERGENCE_LIMIT:g} at step {t}", step=t)
        u = -k_arr @ x
        costs[t] = x @ problem.Q @ x + u @ problem.R @ u
        controls[t] = u
        x = problem.A @ x + problem.B @ u
        states[t + 1] = x
    return Trajectory(states=states, controls=controls, stage_costs=costs)


def _simulate_chunk(a, b, q, r, gains, x0s, horizon):
    """Vectorized rollouts for one chunk of (gain, x0) pairs.

    Returns per-trajectory truncated costs, the chunk-summed state outer
    products, and the (trajectory, step) of the first divergence if any.
    """
    x = x0s.copy()
    n = x.shape[0]
    costs = np.zeros(n)
    sigma = np.zeros((a.shape[0], a.shape[0]))
    limit_sq = DIVERGENCE_LIMIT**2
    for t in range(horizon):
        norms_sq = np.einsum("ij,ij->i", x, x)
        bad = norms_sq > limit_sq
        if np.any(bad):
            return costs, sigma, (int(np.argmax(bad)), t)
        if not x.any():
            break
        u = -np.einsum("ikd,id->ik", gains, x)
        costs += np.einsum("ij,jk,ik->i", x, q, x) + np.einsum("ij,jk,ik->i", u, r, u)
        sigma += x.T @ x
        x = x @ a.T + u @ b.T
    return costs, sigma, None


class Simulator:
    """Black-box rollout access to one plant.

    The estimator side of model-free optimization receives only this object;
    it exposes trajectory simulation and designer-known scale constants
    (cost-matrix norms and the excitation floor), not the dynamics matrices.
    ``problem`` remains reachable for reporting and oracle computations only.
    """

    def __init__(self, problem: LqrProblem, threads: int = 1):
        self._problem = problem
        self.threads = max(int(threads), 1)

    @property
    def problem(self) -> LqrProblem:
        """The underlying plant; for white-box reporting, never for estimation."""
        return self._problem

    @property
    def d(self) -> int:
        return self._problem.d

    @property
    def k(self) -> int:
        return self._problem.k

    @property
    def init(self) -> InitialStateModel:
        return self._problem.init

    def step_size_constants(self) -> tuple[float, float, float]:
        """(|R|, |B|, mu): the designer-known constants in the closed-form step size."""
        return (
            matkit.spectral_norm(self._problem.R),
            matkit.spectral_norm(self._problem.B),
            self._problem.mu,
        )

    def sample_initial_states(self, n: int, gen: np.random.Generator) -> np.ndarray:
        return sample_initial_states(self._problem.init, n, gen)

    def rollout(self, K, x0, horizon: int) -> Trajectory:
        return rollout(self._problem, K, x0, horizon)

    def rollout_batch(self, gains: np.ndarray, x0s: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        """Simulate trajectory i under gain ``gains[i]`` from ``x0s[i]``.

        Returns the per-trajectory truncated costs and the sum over all
        trajectories of the summed state outer products.  Chunked reduction
        in fixed index order keeps the result independent of ``threads``.
        """
        p = self._problem
        gains = np.asarray(gains, dtype=float)
        x0s = np.asarray(x0s, dtype=float)
        n = x0s.shape[0]
        if gains.shape != (n, p.k, p.d) or x0s.shape != (n, p.d):
            raise InvalidInputError("gains must be (n, k, d) and x0s (n, d) with matching n")
        if horizon < 1:
            raise InvalidInputError("horizon must be at least 1")
        spans = [(i, min(i + CHUNK, n)) for i in range(0, n, CHUNK)]
        args = [(p.A, p.B, p.Q, p.R, gains[i:j], x0s[i:j], horizon) for i, j in spans]
        if self.threads > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(lambda a: _simulate_chunk(*a), args))
        else:
            results = [_simulate_chunk(*a) for a in args]

        costs = np.empty(n)
        sigma_sum = np.zeros((p.d, p.d))
        first_bad: tuple[int, int] | None = None
        for (i, j), (chunk_costs, chunk_sigma, bad) in zip(spans, results):
            costs[i:j] = chunk_costs
            sigma_sum += chunk_sigma
            if bad is not None:
                absolute = (i + bad[0], bad[1])
                if first_bad is None or absolute < first_bad:
                    first_bad = absolute
        if first_bad is not None:
            raise DivergedTrajectoryError(
                f"trajectory {first_bad[0]} diverged at step {first_bad[1]}",
                step=first_bad[1],
                trajectory=first_bad[0],
            )
        return costs, sigma_sum


def finite_horizon_moments(problem: LqrProblem, K, horizon: int) -> tuple[float, np.ndarray]:
    """Exact truncated expectations (C^(l), Sigma^(l)) by the l-step recursion."""
    k_arr = validate_gain(problem, K)
    m = problem.A - problem.B @ k_arr
    stage = problem.Q + k_arr.T @ problem.R @ k_arr
    sigma = np.zeros_like(problem.sigma0)
    for _ in range(horizon):
        sigma = problem.sigma0 + m @ sigma @ m.T
    # the recursion above accumulates sum_{t<l} M^t Sigma0 M'^t
    cost = float(np.sum(sigma * stage))
    return cost, sigma


def truncation_tail(problem: LqrProblem, K, horizon: int, sigma_inf: np.ndarray) -> float:
    """Exact truncation error C(K) - C^(l)(K) = <M^l Sigma M'^l, Q + K^T R K>.

    Uses binary powering of the closed loop, so very large horizons stay cheap.
    """
    k_arr = validate_gain(problem, K)
    m_pow = np.linalg.matrix_power(problem.A - problem.B @ k_arr, horizon)
    stage = problem.Q + k_arr.T @ problem.R @ k_arr
    return float(np.sum((m_pow @ sigma_inf @ m_pow.T) * stage))


def horizon_for_accuracy(problem: LqrProblem, cost_bound: float, target_eps: float, K_norm: float) -> int:
    """Rollout length making the truncated cost eps-accurate (cost form).

    Ceil of d C^2 (|Q| + |R| |K|^2) / (eps mu sigma_min(Q)^2), guaranteeing
    C(K) >= C^(l)(K) >= C(K) - eps whenever cost_bound >= C(K).
    """
    if target_eps <= 0:
        raise InvalidInputError("target accuracy must be positive")
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    value = (
        problem.d
        * cost_bound**2
        * (matkit.spectral_norm(problem.Q) + matkit.spectral_norm(problem.R) * K_norm**2)
        / (target_eps * problem.mu * sig_q**2)
    )
    return max(int(math.ceil(value)), 1)


def horizon_for_covariance(problem: LqrProblem, cost_bound: float, target_eps: float) -> int:
    """Rollout length making the truncated covariance eps-accurate: d C^2 / (eps mu sigma_min(Q)^2)."""
    if target_eps <= 0:
        raise InvalidInputError("target accuracy must be positive")
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    value = problem.d * cost_bound**2 / (target_eps * problem.mu * sig_q**2)
    return max(int(math.ceil(value)), 1)


def practical_horizon(problem: LqrProblem, K, cost_bound: float, target_eps: float) -> int:
    """Usable "auto" horizon: the accuracy formula capped by the decay certificate.

    The formula above scales like 1/eps and is wildly conservative for well
    damped loops.  The repeated-squaring certificate for A - BK witnesses
    |(A-BK)^p| < 1e-12, so the truncation tail beyond p steps is negligible;
    the returned horizon is the smaller of the two.
    """
    k_arr = validate_gain(problem, K)
    formula = horizon_for_accuracy(problem, cost_bound, target_eps, matkit.spectral_norm(k_arr))
    cert = matkit.check_stability(problem.A - problem.B @ k_arr)
    if cert.stable:
        return min(formula, max(cert.power, 1))
    return formula
