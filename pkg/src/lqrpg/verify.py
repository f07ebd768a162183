"""Executable certification of the landscape and perturbation properties.

Each check restates one exact inequality or identity on a concrete instance
and reports the two sides, the slack and a pass/fail/skipped verdict.  Checks
whose hypothesis radius is violated return "skipped", never "fail".  The
non-convexity fixture (two stabilizing gains whose midpoint destabilizes the
loop) is hard-coded and always included in the suite.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from . import matkit
from .errors import UnstablePolicyError
from .instances import random_problem, random_stable_gain
from .lqr import LqrProblem, evaluate
from .riccati import RiccatiSolution, solve_dare
from .sim import RngHandle

PASS = "pass"
FAIL = "fail"
SKIPPED = "skipped"


@dataclass(frozen=True)
class CheckReport:
    check: str
    instance: str
    lhs: float
    rhs: float
    slack: float
    verdict: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _report(check: str, instance: str, lhs: float, rhs: float, ok: bool | None) -> CheckReport:
    verdict = SKIPPED if ok is None else (PASS if ok else FAIL)
    return CheckReport(check=check, instance=instance, lhs=float(lhs), rhs=float(rhs), slack=float(rhs - lhs), verdict=verdict)


# Fixture: two gains whose closed loops are nilpotent while their midpoint
# destabilizes the loop; witnesses the failure of convexity (and star-convexity
# through the midpoint) of the stabilizing-gain set for d >= 3.
NONCONVEXITY_K1 = np.array([[1.0, 0.0, -10.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
NONCONVEXITY_K2 = np.array([[1.0, -10.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


def check_nonconvexity_example() -> list[CheckReport]:
    """Both fixture loops are nilpotent (spectral radius exactly 0); the midpoint loop is unstable."""
    eye = np.eye(3)
    reports = []
    for name, gain in (("k1", NONCONVEXITY_K1), ("k2", NONCONVEXITY_K2)):
        loop = eye - gain
        cubed = float(np.linalg.norm(loop @ loop @ loop))
        cert = matkit.check_stability(loop)
        reports.append(
            _report(f"nonconvexity_{name}_nilpotent", "fixture", cubed, 0.0, cubed == 0.0 and cert.stable)
        )
    midpoint = eye - 0.5 * (NONCONVEXITY_K1 + NONCONVEXITY_K2)
    cert = matkit.check_stability(midpoint)
    reports.append(
        _report("nonconvexity_midpoint_unstable", "fixture", cert.rho_upper, 1.0, cert.verdict == "unstable")
    )
    return reports


def check_almost_smoothness(problem: LqrProblem, K, Kp, instance: str = "") -> CheckReport:
    """Exact identity: C(K') - C(K) + 2 tr(S'(K-K')^T E) - tr(S'(K-K')^T (R+B^T P B)(K-K')) = 0."""
    ev = evaluate(problem, K)
    evp = evaluate(problem, Kp)
    dk = ev.K - evp.K
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    residual = abs(
        evp.cost
        - ev.cost
        + 2.0 * float(np.trace(evp.Sigma @ dk.T @ ev.E))
        - float(np.trace(evp.Sigma @ dk.T @ gram @ dk))
    )
    tol = 1e-8 * (1.0 + abs(ev.cost))
    return _report("almost_smoothness", instance, residual, tol, residual <= tol)


def check_gradient_domination(problem: LqrProblem, K, oracle: RiccatiSolution, instance: str = "") -> list[CheckReport]:
    """Sandwich: upper bound >= C(K) - C(K*) >= lower bound, all three from the same instance."""
    ev = evaluate(problem, K)
    gap = ev.cost - oracle.opt_cost
    sigma_star_norm = matkit.spectral_norm(evaluate(problem, oracle.K_star).Sigma)
    sig_r = float(np.linalg.eigvalsh(problem.R)[0])
    gram = problem.R + problem.B.T @ ev.P @ problem.B
    upper = sigma_star_norm / (problem.mu**2 * sig_r) * float(np.sum(ev.grad * ev.grad))
    lower = problem.mu / matkit.spectral_norm(gram) * float(np.sum(ev.E * ev.E))
    slack_tol = 1e-10 * (1.0 + abs(ev.cost))
    return [
        _report("gradient_domination_upper", instance, gap, upper, gap <= upper + slack_tol),
        _report("gradient_domination_lower", instance, lower, gap, lower <= gap + slack_tol),
    ]


def perturbation_radius(problem: LqrProblem, ev) -> float:
    """Hypothesis radius sigma_min(Q) mu / (4 C |B| (|A - BK| + 1)) of the covariance perturbation bound."""
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    loop_norm = matkit.spectral_norm(problem.A - problem.B @ ev.K)
    return sig_q * problem.mu / (4.0 * ev.cost * matkit.spectral_norm(problem.B) * (loop_norm + 1.0))


def check_sigma_perturbation(problem: LqrProblem, K, Kp, instance: str = "") -> CheckReport:
    """In-radius gains stay stabilizing and |Sigma' - Sigma| obeys the explicit Lipschitz bound."""
    ev = evaluate(problem, K)
    kp = np.asarray(Kp, dtype=float)
    dist = matkit.spectral_norm(kp - ev.K)
    radius = perturbation_radius(problem, ev)
    if dist > radius * (1.0 + 1e-9):
        return _report("sigma_perturbation", instance, dist, radius, None)
    try:
        evp = evaluate(problem, kp)
    except UnstablePolicyError:
        # inside the radius every gain must be stabilizing
        return _report("sigma_perturbation", instance, np.inf, radius, False)
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    loop_norm = matkit.spectral_norm(problem.A - problem.B @ ev.K)
    bound = (
        4.0
        * (ev.cost / sig_q) ** 2
        * matkit.spectral_norm(problem.B)
        * (loop_norm + 1.0)
        / problem.mu
        * dist
    )
    lhs = matkit.spectral_norm(evp.Sigma - ev.Sigma)
    return _report("sigma_perturbation", instance, lhs, bound, lhs <= bound + 1e-12)


def _value_shift_constant(problem: LqrProblem, ev) -> float:
    """Per-unit-|dK| bound on |P_{K'} - P_K| for in-hypothesis perturbations.

    Splitting P' - P = (T' - T)(Q + K'^T R K') + T(K'^T R K' - K^T R K) and
    using the operator-norm bound T <= C/(mu sigma_min(Q)) together with
    |T' - T| <= 2 T^2 |F - F'| (valid once T |F - F'| <= 1/2, which the
    hypothesis radius enforces):

        |dP| <= [ 2 T^2 2|B|(|A-BK|+1) (|Q| + 4|R||K|^2) + 3 T |K| |R| ] |dK|

    with |K'| <= 2|K| from the hypothesis |dK| <= |K|.
    """
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    norm_b = matkit.spectral_norm(problem.B)
    norm_r = matkit.spectral_norm(problem.R)
    norm_q = matkit.spectral_norm(problem.Q)
    norm_k = matkit.spectral_norm(ev.K)
    norm_a_cl = matkit.spectral_norm(problem.A - problem.B @ ev.K)
    t_norm = ev.cost / (problem.mu * sig_q)
    stage_prime = norm_q + 4.0 * norm_r * norm_k**2
    return 4.0 * t_norm**2 * norm_b * (norm_a_cl + 1.0) * stage_prime + 3.0 * t_norm * norm_k * norm_r


def _grad_lipschitz_constant(problem: LqrProblem, ev) -> float:
    """Explicit Lipschitz constant for the gradient under in-radius perturbations.

    Assembled from the chain bounding the covariance and value-matrix shifts:

        |dE|     <= (|R| + |B||dP||A| + |B|^2 |dP| 2|K| + |B|^2 |P|) |dK|
        |dSigma| <= 4 (C/sigma_min(Q))^2 |B| (|A-BK|+1) / mu        |dK|
        |dGrad|  <= 2 |dE| (|Sigma| + C/sigma_min(Q)) + 2 |E| |dSigma|

    with |dP| from :func:`_value_shift_constant` and |E| bounded through
    tr(E^T E) <= |R + B^T P B| C / mu.
    """
    sig_q = float(np.linalg.eigvalsh(problem.Q)[0])
    norm_b = matkit.spectral_norm(problem.B)
    norm_r = matkit.spectral_norm(problem.R)
    norm_k = matkit.spectral_norm(ev.K)
    norm_a_cl = matkit.spectral_norm(problem.A - problem.B @ ev.K)
    norm_a = matkit.spectral_norm(problem.A)
    cost = ev.cost
    mu = problem.mu
    dp = _value_shift_constant(problem, ev)
    de = norm_r + norm_b * dp * norm_a + norm_b**2 * dp * 2.0 * norm_k + norm_b**2 * matkit.spectral_norm(ev.P)
    dsigma = 4.0 * (cost / sig_q) ** 2 * norm_b * (norm_a_cl + 1.0) / mu
    gram_norm = matkit.spectral_norm(problem.R + problem.B.T @ ev.P @ problem.B)
    e_norm = np.sqrt(gram_norm * cost / mu)
    sigma_prime_norm = matkit.spectral_norm(ev.Sigma) + cost / sig_q
    return 2.0 * de * sigma_prime_norm + 2.0 * e_norm * dsigma


def check_cost_and_grad_perturbation(problem: LqrProblem, K, Kp, instance: str = "") -> list[CheckReport]:
    """Cost and gradient shifts obey the assembled Lipschitz constants.

    Cost side: |C(K') - C(K)| <= E|x0|^2 |P' - P| with the value-matrix shift
    bound of :func:`_value_shift_constant`.  Gradient side: the explicit chain
    of :func:`_grad_lipschitz_constant`.  Both need the hypothesis
    |K' - K| <= min(perturbation radius, |K|).
    """
    ev = evaluate(problem, K)
    kp = np.asarray(Kp, dtype=float)
    dist = matkit.spectral_norm(kp - ev.K)
    norm_k = matkit.spectral_norm(ev.K)
    radius = min(perturbation_radius(problem, ev), norm_k)
    if dist > radius * (1.0 + 1e-9):
        return [
            _report("cost_perturbation", instance, dist, radius, None),
            _report("grad_perturbation", instance, dist, radius, None),
        ]
    evp = evaluate(problem, kp)
    cost_bound = problem.init.mean_square_norm * _value_shift_constant(problem, ev) * dist
    cost_shift = abs(evp.cost - ev.cost)
    grad_shift = matkit.spectral_norm(evp.grad - ev.grad)
    grad_bound = _grad_lipschitz_constant(problem, ev) * dist
    return [
        _report("cost_perturbation", instance, cost_shift, cost_bound, cost_shift <= cost_bound + 1e-12),
        _report("grad_perturbation", instance, grad_shift, grad_bound, grad_shift <= grad_bound + 1e-12),
    ]


def check_trace_floor(problem: LqrProblem, Kp, instance: str = "") -> CheckReport:
    """tr(Sigma_{K'}) >= mu / (2 (1 - rho_upper)) with the certified radius upper bound.

    Using rho_upper >= rho only lowers the right-hand side, so the asserted
    inequality is a conservative restatement of the exact one.
    """
    kp = np.asarray(Kp, dtype=float)
    cert = matkit.check_stability(problem.A - problem.B @ kp)
    if not cert.stable or cert.rho_upper >= 1.0:
        return _report("trace_floor", instance, cert.rho_upper, 1.0, None)
    evp = evaluate(problem, kp)
    floor = problem.mu / (2.0 * (1.0 - cert.rho_upper))
    lhs = float(np.trace(evp.Sigma))
    return _report("trace_floor", instance, floor, lhs, lhs >= floor - 1e-12)


def run_suite(seed: int = 0, trials: int = 50, dims: tuple[int, ...] = (2, 3, 4, 5, 6)) -> tuple[list[CheckReport], bool]:
    """All checks over random stabilizable instances plus the fixed counterexample.

    Deterministic for a given (seed, trials, dims); success means no check
    reports "fail" (skipped verdicts are fine).
    """
    reports = list(check_nonconvexity_example())
    for t in range(trials):
        gen = RngHandle(seed, t).generator()
        d = int(gen.choice(np.asarray(dims)))
        k = int(gen.integers(1, d + 1))
        problem = random_problem(d, k, gen, cost_style="random_pd")
        oracle = solve_dare(problem)
        gain = random_stable_gain(problem, gen)
        ev = evaluate(problem, gain)
        label = f"seed={seed} trial={t} d={d} k={k}"

        near = gain + 0.5 * perturbation_radius(problem, ev) * _unit_gain(gen, k, d)
        far_frac = min(perturbation_radius(problem, ev), matkit.spectral_norm(gain))
        within_both = gain + 0.9 * far_frac * _unit_gain(gen, k, d)

        reports.append(check_almost_smoothness(problem, gain, near, label))
        reports.extend(check_gradient_domination(problem, gain, oracle, label))
        reports.append(check_sigma_perturbation(problem, gain, near, label))
        reports.extend(check_cost_and_grad_perturbation(problem, gain, within_both, label))
        reports.append(check_trace_floor(problem, near, label))
    ok = all(r.verdict != FAIL for r in reports)
    return reports, ok


def _unit_gain(gen: np.random.Generator, k: int, d: int) -> np.ndarray:
    u = gen.standard_normal((k, d))
    return u / max(matkit.spectral_norm(u), 1e-300)


def reports_to_jsonl(reports: list[CheckReport]) -> str:
    return "\n".join(r.to_json() for r in reports) + "\n"
