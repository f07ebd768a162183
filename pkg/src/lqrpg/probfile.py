"""JSON problem files: load with positioned errors, save deterministically."""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidInputError, ProblemFileError
from .lqr import InitialStateModel, LqrProblem


def _matrix_from_json(obj, name: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(row, list) for row in obj):
        raise ProblemFileError(f"key {name!r} must be a nonempty nested array of numbers")
    width = len(obj[0])
    for i, row in enumerate(obj):
        if len(row) != width:
            raise ProblemFileError(f"key {name!r} row {i} has {len(row)} entries, expected {width}")
        for j, entry in enumerate(row):
            if not isinstance(entry, (int, float)) or isinstance(entry, bool):
                raise ProblemFileError(f"key {name!r} entry ({i},{j}) is not a number")
    arr = np.asarray(obj, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ProblemFileError(f"key {name!r} contains non-finite entries")
    return arr


def _init_from_json(obj) -> InitialStateModel:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ProblemFileError('key "init" must be an object with a "kind" field')
    kind = obj["kind"]
    if kind == "cube":
        return None  # dimension-dependent; resolved by the caller
    if kind == "sphere":
        radius = obj.get("radius", 1.0)
        if not isinstance(radius, (int, float)) or radius <= 0:
            raise ProblemFileError('sphere init needs a positive "radius"')
        return ("sphere", float(radius))
    if kind == "fixed_covariance":
        if "sigma0" not in obj:
            raise ProblemFileError('fixed_covariance init needs a "sigma0" matrix')
        return ("fixed_covariance", _matrix_from_json(obj["sigma0"], "init.sigma0"))
    raise ProblemFileError(f"unknown init kind {kind!r}")


def load_problem_file(path) -> tuple[LqrProblem, np.ndarray | None]:
    """Parse and validate a problem file; returns the problem and the optional K0."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemFileError(f"{path}: top level must be an object")
    for key in ("A", "B", "Q", "R", "init"):
        if key not in doc:
            raise ProblemFileError(f"{path}: missing key {key!r}")
    try:
        a = _matrix_from_json(doc["A"], "A")
        b = _matrix_from_json(doc["B"], "B")
        q = _matrix_from_json(doc["Q"], "Q")
        r = _matrix_from_json(doc["R"], "R")
        init_spec = _init_from_json(doc["init"])
        d = a.shape[0]
        if init_spec is None:
            init = InitialStateModel.unit_cube(d)
        elif init_spec[0] == "sphere":
            init = InitialStateModel.sphere(d, init_spec[1])
        else:
            init = InitialStateModel.fixed_covariance(init_spec[1])
        problem = LqrProblem(A=a, B=b, Q=q, R=r, init=init)
        k0 = None
        if "K0" in doc and doc["K0"] is not None:
            k0 = _matrix_from_json(doc["K0"], "K0")
            if k0.shape != problem.gain_shape():
                raise ProblemFileError(f"{path}: K0 must be {problem.gain_shape()}, got {k0.shape}")
    except InvalidInputError as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    return problem, k0


def save_problem_file(path, problem: LqrProblem, K0=None) -> None:
    """Write a problem file; identical problems always produce identical bytes."""
    doc = {
        "A": problem.A.tolist(),
        "B": problem.B.tolist(),
        "Q": problem.Q.tolist(),
        "R": problem.R.tolist(),
    }
    init = problem.init
    if init.kind == "cube":
        doc["init"] = {"kind": "cube"}
    elif init.kind == "sphere":
        doc["init"] = {"kind": "sphere", "radius": init.norm_bound}
    else:
        doc["init"] = {"kind": "fixed_covariance", "sigma0": init.sigma0.tolist()}
    if K0 is not None:
        doc["K0"] = np.asarray(K0, dtype=float).tolist()
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
