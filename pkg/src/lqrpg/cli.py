"""Command-line front end.

Subcommands: ``generate`` (random instance files), ``solve`` (Riccati ground
truth), ``optimize`` (exact-gradient runs), ``learn`` (model-free runs) and
``verify`` (the property-certification suite).  Trace CSVs get a rendered PNG
figure next to them unless ``--no-plot`` is passed.

Exit codes: 0 ok, 2 parse/validation, 3 Riccati non-convergence, 4 unstable
initial policy, 5 estimation failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import matkit, zorder
from .errors import (
    EstimationFailedError,
    IllConditionedCovarianceError,
    InvalidInputError,
    ProblemFileError,
    RiccatiConvergenceError,
    UnstablePolicyError,
)
from .exact_opt import SolverConfig, optimize
from .instances import random_problem
from .lqr import evaluate
from .probfile import load_problem_file, save_problem_file
from .riccati import solve_dare
from .sim import RngHandle, Simulator, practical_horizon
from .traces import write_trace_csv
from .verify import run_suite, reports_to_jsonl
from .zorder import ZerothOrderConfig, run_modelfree

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RICCATI = 3
EXIT_UNSTABLE = 4
EXIT_ESTIMATION = 5


def _thread_count(value: int | None) -> int:
    if value is not None:
        return max(value, 1)
    env = os.environ.get("LQRPG_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise InvalidInputError(f"LQRPG_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _parse_steps(text: str):
    if text in ("paper", "backtracking"):
        return text
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(f"--steps must be 'paper', 'backtracking' or a number, got {text!r}")


def _parse_eta(text: str):
    if text == "paper":
        return text
    try:
        return float(text)
    except ValueError:
        raise InvalidInputError(f"--eta must be 'paper' or a number, got {text!r}")


def _matrix_lines(name: str, m: np.ndarray) -> str:
    rows = ["  ".join(f"{v: .10g}" for v in row) for row in m]
    return f"{name} =\n  " + "\n  ".join(rows)


def cmd_generate(args) -> int:
    gen = RngHandle(args.seed, 0).generator()
    problem = random_problem(args.dim, args.ctrl, gen, spectral_scale=args.spectral_scale)
    save_problem_file(args.out, problem)
    print(f"wrote {args.out}: d={args.dim} k={args.ctrl} |A|={matkit.spectral_norm(problem.A):.6g}")
    return EXIT_OK


def cmd_solve(args) -> int:
    problem, _ = load_problem_file(args.problem)
    sol = solve_dare(problem)
    print(_matrix_lines("K*", sol.K_star))
    print(f"C(K*) = {sol.opt_cost!r}")
    print(f"residual = {sol.residual:.3e} after {sol.iterations} iterations")
    return EXIT_OK


def _maybe_plot(args, trace, title: str) -> None:
    if args.trace and not args.no_plot:
        from .plotting import render_trace_figure

        render_trace_figure(trace, Path(args.trace).with_suffix(".png"), title)


def cmd_optimize(args) -> int:
    problem, k0 = load_problem_file(args.problem)
    if k0 is None:
        k0 = np.zeros(problem.gain_shape())
    oracle = solve_dare(problem)
    config = SolverConfig(
        method=args.method,
        step_rule=_parse_steps(args.steps),
        max_iters=args.max_iters,
        stop_gap=args.stop_gap,
        stop_grad_norm=None if args.stop_gap is not None else 0.0,
    )
    k_final, trace = optimize(problem, k0, config, oracle=oracle)
    if args.trace:
        write_trace_csv(trace, args.trace, include_wall=True)
        _maybe_plot(args, trace, f"{args.method} on {Path(args.problem).name}")
    final = trace.final
    print(f"status = {trace.status} after {trace.iterations()} iterations")
    print(f"cost = {final.cost!r}  gap = {final.gap!r}")
    print(_matrix_lines("K", k_final))
    return EXIT_OK


def cmd_learn(args) -> int:
    problem, k0 = load_problem_file(args.problem)
    if k0 is None:
        k0 = np.zeros(problem.gain_shape())
    plant = Simulator(problem, threads=_thread_count(args.threads))
    oracle = solve_dare(problem)
    radius = args.radius if args.radius is not None else zorder.default_radius(k0)
    if args.horizon == "auto":
        cost0 = evaluate(problem, k0).cost
        eps = radius**2 * max(args.stop_gap or 1e-2 * cost0, 1e-12) / (10.0 * problem.k * problem.d)
        horizon = practical_horizon(problem, k0, 2.0 * cost0, eps)
    else:
        horizon = int(args.horizon)
    cfg = ZerothOrderConfig(
        m=args.m,
        horizon=horizon,
        radius=radius,
        step=_parse_eta(args.eta),
        max_outer_iters=args.iters,
        stop_gap=args.stop_gap,
    )
    k_final, trace = run_modelfree(plant, k0, cfg, args.method, RngHandle(args.seed), oracle=oracle)
    if args.trace:
        write_trace_csv(trace, args.trace, include_wall=False, include_samples=True)
        _maybe_plot(args, trace, f"model-free {args.method} on {Path(args.problem).name}")
    final = trace.final
    print(f"status = {trace.status} after {trace.iterations()} iterations, horizon {horizon}")
    print(f"cost = {final.cost!r}  gap = {final.gap!r}  samples = {final.samples}")
    print(_matrix_lines("K", k_final))
    return EXIT_OK


def cmd_verify(args) -> int:
    dims = tuple(range(2, args.max_dim + 1))
    reports, ok = run_suite(seed=args.seed, trials=args.trials, dims=dims)
    out = reports_to_jsonl(reports)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    counts = {}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    print(f"verify: {counts}", file=sys.stderr)
    return EXIT_OK if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqrpg", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random stabilizable problem file")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--ctrl", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spectral-scale", type=float, default=0.95)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve the Riccati equation and print the optimal gain")
    p.add_argument("--problem", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("optimize", help="run an exact-gradient method")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=("gd", "npg", "gn"), required=True)
    p.add_argument("--steps", default="paper", help="'paper', 'backtracking' or a constant step size")
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--stop-gap", type=float, default=1e-10)
    p.add_argument("--trace", help="CSV trace path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("learn", help="run a model-free method from simulated trajectories")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=("gd", "npg"), required=True)
    p.add_argument("--m", type=int, required=True, help="trajectories per gradient estimate")
    p.add_argument("--horizon", default="auto", help="rollout length or 'auto'")
    p.add_argument("--radius", type=float, default=None, help="perturbation radius (default 0.05 (1+|K0|))")
    p.add_argument("--eta", default="paper", help="'paper' or a constant step size")
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stop-gap", type=float, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--trace", help="CSV trace path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("verify", help="run the property-certification suite (JSONL reports)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--max-dim", type=int, default=6)
    p.add_argument("--out", help="write JSONL here instead of stdout")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFileError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RiccatiConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RICCATI
    except UnstablePolicyError as exc:
        print(
            f"error: {exc}\nthe initial gain must have finite cost (stabilizing K0)",
            file=sys.stderr,
        )
        return EXIT_UNSTABLE
    except (EstimationFailedError, IllConditionedCovarianceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
