"""Problem files (JSON) and the built-in two-qubit example.

A problem file carries the Hamiltonian and the initial state as dense
complex matrices, with every complex number written as a two-element
[re, im] array, plus an optional eigenbasis and optional tolerance
overrides::

    {
      "dim": 2,
      "hamiltonian": [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]],
      "rho":         [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]],
      "basis":       [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
      "tolerances":  {"hermiticity": 1e-10, "trace": 1e-9, "psd": 1e-9,
                      "cluster": 1e-8}
    }

``basis`` is a list of vectors (each a list of [re, im] pairs).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .linalg import (
    DEFAULT_HERMITICITY_TOL,
    DEFAULT_PSD_TOL,
    DEFAULT_TRACE_TOL,
    DensityState,
    HermitianOperator,
)

TOLERANCE_KEYS = ("hermiticity", "trace", "psd", "cluster")

_DEFAULT_TOLS = {
    "hermiticity": DEFAULT_HERMITICITY_TOL,
    "trace": DEFAULT_TRACE_TOL,
    "psd": DEFAULT_PSD_TOL,
    "cluster": None,  # None: scale with the operator norm
}


@dataclass
class ProblemFile:
    """Parsed problem: Hamiltonian, initial state, optional eigenbasis
    (columns) and optional tolerance overrides."""

    dim: int
    hamiltonian: np.ndarray
    rho: np.ndarray
    basis: np.ndarray | None = None
    tolerances: dict[str, float] = field(default_factory=dict)


def _complex_entry(x, where: str) -> complex:
    if (
        not isinstance(x, (list, tuple))
        or len(x) != 2
        or not all(isinstance(v, (int, float)) for v in x)
    ):
        raise ParseError(f"{where}: complex entries must be [re, im] pairs, got {x!r}")
    return complex(x[0], x[1])


def _parse_matrix(obj, dim: int, where: str) -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != dim:
        raise ParseError(f"{where}: expected {dim} rows")
    out = np.empty((dim, dim), dtype=complex)
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != dim:
            raise ParseError(f"{where}: row {i} must have {dim} entries")
        for j, x in enumerate(row):
            out[i, j] = _complex_entry(x, f"{where}[{i}][{j}]")
    return out


def parse_problem(obj) -> ProblemFile:
    """Build a ProblemFile from decoded JSON, raising ParseError on any
    structural defect."""
    if not isinstance(obj, dict):
        raise ParseError("problem file must be a JSON object")
    try:
        dim = obj["dim"]
    except KeyError:
        raise ParseError("missing required key 'dim'") from None
    if not isinstance(dim, int) or dim < 1:
        raise ParseError(f"'dim' must be a positive integer, got {dim!r}")
    for key in ("hamiltonian", "rho"):
        if key not in obj:
            raise ParseError(f"missing required key '{key}'")

    hamiltonian = _parse_matrix(obj["hamiltonian"], dim, "hamiltonian")
    rho = _parse_matrix(obj["rho"], dim, "rho")

    basis = None
    if obj.get("basis") is not None:
        raw = obj["basis"]
        if not isinstance(raw, list) or len(raw) != dim:
            raise ParseError(f"basis: expected {dim} vectors")
        cols = []
        for k, vec in enumerate(raw):
            if not isinstance(vec, list) or len(vec) != dim:
                raise ParseError(f"basis: vector {k} must have {dim} entries")
            cols.append([_complex_entry(x, f"basis[{k}]") for x in vec])
        basis = np.array(cols, dtype=complex).T  # vectors become columns

    tolerances = {}
    if obj.get("tolerances") is not None:
        raw = obj["tolerances"]
        if not isinstance(raw, dict):
            raise ParseError("tolerances must be an object")
        for key, value in raw.items():
            if key not in TOLERANCE_KEYS:
                raise ParseError(
                    f"unknown tolerance {key!r}, expected one of {TOLERANCE_KEYS}"
                )
            if not isinstance(value, (int, float)) or value < 0:
                raise ParseError(f"tolerance {key!r} must be a nonnegative number")
            tolerances[key] = float(value)

    return ProblemFile(
        dim=dim, hamiltonian=hamiltonian, rho=rho, basis=basis, tolerances=tolerances
    )


def load_problem(path) -> ProblemFile:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read problem file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return parse_problem(obj)


def _matrix_to_json(a: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in a]


def problem_to_dict(problem: ProblemFile) -> dict:
    """Inverse of parse_problem, for writing problem files."""
    out = {
        "dim": problem.dim,
        "hamiltonian": _matrix_to_json(problem.hamiltonian),
        "rho": _matrix_to_json(problem.rho),
    }
    if problem.basis is not None:
        out["basis"] = [
            [[float(x.real), float(x.imag)] for x in problem.basis[:, k]]
            for k in range(problem.basis.shape[1])
        ]
    if problem.tolerances:
        out["tolerances"] = dict(problem.tolerances)
    return out


def resolve_tolerances(problem: ProblemFile, scale: float = 1.0) -> dict:
    """Tolerances to use: explicit file values win, defaults are multiplied
    by ``scale`` (the FQH_TOLERANCE_SCALE mechanism)."""
    out = {}
    for key in TOLERANCE_KEYS:
        if key in problem.tolerances:
            out[key] = problem.tolerances[key]
        elif _DEFAULT_TOLS[key] is None:
            out[key] = None
        else:
            out[key] = _DEFAULT_TOLS[key] * scale
    return out


def build_operators(problem: ProblemFile, scale: float = 1.0):
    """Validate the problem matrices.  Returns (rho, hamiltonian, basis,
    cluster_tol); validation failures raise with a message naming the
    violated invariant."""
    tols = resolve_tolerances(problem, scale)
    h = HermitianOperator(problem.hamiltonian, hermiticity_tol=tols["hermiticity"])
    rho = DensityState.from_matrix(
        problem.rho,
        hermiticity_tol=tols["hermiticity"],
        trace_tol=tols["trace"],
        psd_tol=tols["psd"],
    )
    return rho, h, problem.basis, tols["cluster"]


def two_qubit_example() -> ProblemFile:
    """Two qubits: a degenerate, energy-coherent initial state measured by a
    non-degenerate Hamiltonian.

    Matrices are written in the product basis (|+,+>, |+,->, |-,+>, |-,->).
    The computational basis of each qubit sits on the Bloch equator of
    {|+>, |->}: |1> = (|+> + |->)/sqrt(2) and |0> = (|+> - |->)/sqrt(2).
    The Hamiltonian assigns energies 1, 3, 5, 7 to |0,0>, |0,1>, |1,0>,
    |1,1>; the state is 0.2 on the |+> (x) anything plane, 0.1 on |-,+> and
    0.5 on |-,->.  The supplied reference basis is the product basis, so
    Bloch angles (theta, phi) rotate inside the degenerate plane.
    """
    rt2 = 1.0 / math.sqrt(2.0)
    plus = np.array([1.0, 0.0], dtype=complex)
    minus = np.array([0.0, 1.0], dtype=complex)
    one = rt2 * (plus + minus)
    zero = rt2 * (plus - minus)
    qubit = {0: zero, 1: one}

    hamiltonian = np.zeros((4, 4), dtype=complex)
    for (i, j), energy in {(0, 0): 1.0, (0, 1): 3.0, (1, 0): 5.0, (1, 1): 7.0}.items():
        vec = np.kron(qubit[i], qubit[j])
        hamiltonian += energy * np.outer(vec, vec.conj())

    def proj(v):
        return np.outer(v, v.conj())

    eye2 = np.eye(2, dtype=complex)
    rho = 0.2 * np.kron(proj(plus), eye2) + np.kron(
        proj(minus), 0.1 * proj(plus) + 0.5 * proj(minus)
    )

    basis = np.eye(4, dtype=complex)  # the product basis itself
    return ProblemFile(dim=4, hamiltonian=hamiltonian, rho=rho, basis=basis)


BUILTIN_EXAMPLES = {"two-qubit": two_qubit_example}
