"""Quantum measurement instruments in Kraus (operator-sum) form.

An instrument is an outcome-indexed family of completely positive maps
whose total action is trace non-increasing (trace preserving for every
instrument constructed here).  Projective Lueders instruments are the main
construction; arbitrary Kraus families are accepted so the conditional
energy change is available beyond the projective case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IncompleteBasis, UnknownLabel, ValidationError
from .linalg import (
    DensityState,
    HermitianOperator,
    SpectralDecomposition,
    as_basis,
    as_complex_matrix,
    check_complete_basis,
    hermitize,
    jacobi_eigh,
    max_abs,
)

#: outcomes with probability at or below this are treated as unobserved:
#: conditional quantities are defined to be 0 and no post-state is formed
PROB_FLOOR = 1e-12

COMPLETENESS_TOL = 1e-9


@dataclass(eq=False)
class KrausInstrument:
    """Outcome-labelled family of Kraus operator lists.

    ``outcomes`` maps each label to the Kraus operators of its completely
    positive map; labels may be any hashable structure (ints, nested
    tuples).  Construction verifies sum_x sum_k K^dag K <= identity.
    """

    outcomes: list[tuple[object, list[np.ndarray]]]
    completeness_tol: float = COMPLETENESS_TOL

    def __post_init__(self):
        if not self.outcomes:
            raise ValidationError("instrument needs at least one outcome")
        dim = None
        coerced = []
        seen = set()
        for label, kraus_ops in self.outcomes:
            if label in seen:
                raise ValidationError(f"duplicate outcome label {label!r}")
            seen.add(label)
            if not kraus_ops:
                raise ValidationError(f"outcome {label!r} has no Kraus operators")
            ops = [as_complex_matrix(k, dim) for k in kraus_ops]
            dim = ops[0].shape[0]
            coerced.append((label, ops))
        self.outcomes = coerced

        total = np.zeros((dim, dim), dtype=complex)
        for _, ops in self.outcomes:
            for k in ops:
                total += k.conj().T @ k
        w, _ = jacobi_eigh(hermitize(total))
        if w[-1] > 1.0 + self.completeness_tol:
            raise ValidationError(
                f"instrument is not trace-non-increasing: "
                f"largest eigenvalue of sum K^dag K is {w[-1]:.12f}"
            )
        self.is_trace_preserving = bool(
            max_abs(total - np.eye(dim)) <= self.completeness_tol
        )
        self._index = {label: ops for label, ops in self.outcomes}

    @property
    def dim(self) -> int:
        return self.outcomes[0][1][0].shape[0]

    def labels(self) -> list:
        return [label for label, _ in self.outcomes]

    def kraus_for(self, label) -> list[np.ndarray]:
        try:
            return self._index[label]
        except KeyError:
            raise UnknownLabel(f"no outcome labelled {label!r}") from None

    def apply_map(self, label, operator: np.ndarray) -> np.ndarray:
        """The CP map of one outcome: sum_k K_k M K_k^dag."""
        out = np.zeros_like(np.asarray(operator, dtype=complex))
        for k in self.kraus_for(label):
            out += k @ operator @ k.conj().T
        return out


@dataclass(eq=False)
class OutcomeStatistics:
    """Probability of one outcome and the normalized post-measurement state
    (None when the probability is at or below PROB_FLOOR)."""

    label: object
    probability: float
    post_state: DensityState | None


def apply(inst: KrausInstrument, rho: DensityState) -> list[OutcomeStatistics]:
    """Outcome probabilities tr[I_x(rho)] and conditional post-states."""
    if inst.dim != rho.dim:
        raise DimensionMismatch(
            f"instrument dimension {inst.dim} does not match state dimension {rho.dim}"
        )
    stats = []
    for label, _ in inst.outcomes:
        out = inst.apply_map(label, rho.matrix)
        p = float(np.trace(out).real)
        if p > PROB_FLOOR:
            post = DensityState.from_matrix(hermitize(out) / p)
        else:
            post = None
        stats.append(OutcomeStatistics(label=label, probability=p, post_state=post))
    return stats


def conditional_energy_change(
    inst: KrausInstrument,
    rho: DensityState,
    h: HermitianOperator,
    label,
    prob_floor: float = PROB_FLOOR,
) -> float:
    """Increase in expected energy conditional on observing ``label``.

    The post-measurement expectation tr[H I_x(rho)]/tr[I_x(rho)] minus the
    real part of the weak value of H post-selected on the outcome,
    tr[I_x(H rho + rho H)]/(2 tr[I_x(rho)]).  Outcomes with probability at
    or below ``prob_floor`` get the conventional value 0.
    """
    if inst.dim != rho.dim or inst.dim != h.dim:
        raise DimensionMismatch("instrument, state and Hamiltonian dimensions differ")
    inst.kraus_for(label)
    out = inst.apply_map(label, rho.matrix)
    p = float(np.trace(out).real)
    if p <= prob_floor:
        return 0.0
    post_energy = float(np.trace(h.matrix @ out).real)
    anticomm = h.matrix @ rho.matrix + rho.matrix @ h.matrix
    weak = 0.5 * float(np.trace(inst.apply_map(label, anticomm)).real)
    return (post_energy - weak) / p


def sequential(first: KrausInstrument, second: KrausInstrument) -> KrausInstrument:
    """Composite instrument for measuring ``first`` then ``second``.

    Outcome labels are (label_first, label_second) pairs; the Kraus
    operators are all products K_second K_first.
    """
    if first.dim != second.dim:
        raise DimensionMismatch(
            f"cannot compose instruments of dimension {first.dim} and {second.dim}"
        )
    outcomes = []
    for l1, ops1 in first.outcomes:
        for l2, ops2 in second.outcomes:
            outcomes.append(((l1, l2), [k2 @ k1 for k1 in ops1 for k2 in ops2]))
    return KrausInstrument(outcomes)


def projective_instrument(
    decomp: SpectralDecomposition, labels: list | None = None
) -> KrausInstrument:
    """Lueders instrument of a spectral decomposition: one outcome per
    cluster, whose single Kraus operator is the cluster projector."""
    if labels is None:
        labels = list(range(len(decomp.clusters)))
    if len(labels) != len(decomp.clusters):
        raise ValidationError(
            f"got {len(labels)} labels for {len(decomp.clusters)} projectors"
        )
    return KrausInstrument(
        [(label, [c.projector]) for label, c in zip(labels, decomp.clusters)]
    )


def rank1_instrument(basis, labels: list | None = None) -> KrausInstrument:
    """Lueders instrument of a complete orthonormal basis: one outcome per
    vector, projecting onto it."""
    v = as_basis(basis)
    try:
        check_complete_basis(v)
    except IncompleteBasis:
        raise
    if labels is None:
        labels = list(range(v.shape[1]))
    if len(labels) != v.shape[1]:
        raise ValidationError(f"got {len(labels)} labels for {v.shape[1]} vectors")
    outcomes = []
    for k, label in enumerate(labels):
        vec = v[:, k]
        outcomes.append((label, [np.outer(vec, vec.conj())]))
    return KrausInstrument(outcomes)
