"""Monte Carlo sampling of measurement records.

Draws use numpy's Philox bit generator, a counter-based generator with a
published algorithm: one seed fixes the whole record stream on every
platform.  Categorical draws invert a cumulative table built once per run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDistribution, ValidationError
from .heat import (
    LEVEL_EIGENSTATE,
    LEVEL_FULL,
    LEVEL_PARTIAL,
    HeatDistribution,
    decohered_eigenbasis,
    distribution_for,
)
from .instruments import PROB_FLOOR, apply, projective_instrument, rank1_instrument
from .linalg import DensityState, HermitianOperator


@dataclass(eq=False)
class SampleRun:
    """Result of one sampling run: per-label counts and frequencies plus
    empirical moments of the heat.  Label order follows the analytic
    distribution that was sampled."""

    level: str
    seed: int
    n_samples: int
    empirical_moments: list[float]
    empirical_probs: dict[tuple, float]
    counts: dict[tuple, int]


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _cumulative(probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    total = cum[-1]
    if total <= 0.0:
        raise EmptyDistribution("distribution carries no probability mass")
    cum = cum / total
    cum[-1] = 1.0
    return cum


def _finish_run(
    dist: HeatDistribution, counts: np.ndarray, n: int, seed: int, max_order: int
) -> SampleRun:
    freqs = counts / n
    heats = dist.heats()
    moments = [float(np.sum(freqs * heats**k)) for k in range(1, max_order + 1)]
    labels = dist.labels()
    return SampleRun(
        level=dist.level,
        seed=seed,
        n_samples=n,
        empirical_moments=moments,
        empirical_probs={label: float(f) for label, f in zip(labels, freqs)},
        counts={label: int(c) for label, c in zip(labels, counts)},
    )


def sample(dist: HeatDistribution, n: int, seed: int, max_order: int = 4) -> SampleRun:
    """Draw ``n`` i.i.d. records from the analytic distribution."""
    if n < 1:
        raise ValidationError(f"need at least one sample, got {n}")
    if not dist.entries:
        raise EmptyDistribution("cannot sample from a distribution with no entries")
    cum = _cumulative(dist.probabilities())
    u = _generator(seed).random(n)
    idx = np.searchsorted(cum, u, side="right")
    counts = np.bincount(idx, minlength=len(dist.entries)).astype(np.int64)
    return _finish_run(dist, counts, n, seed, max_order)


def sample_sequential(
    rho: DensityState,
    h: HermitianOperator,
    level: str,
    n: int,
    seed: int,
    basis=None,
    max_order: int = 4,
    cluster_tol: float | None = None,
) -> SampleRun:
    """Draw ``n`` records by simulating the physical measurement sequence:
    the first measurement collapses the state, the second measures energy.

    The joint frequencies must agree (distributionally) with ``sample`` on
    the corresponding analytic distribution; heat values are read off the
    analytic distribution's label table.
    """
    if n < 1:
        raise ValidationError(f"need at least one sample, got {n}")
    dist = distribution_for(rho, h, level, basis=basis, cluster_tol=cluster_tol)
    if not dist.entries:
        raise EmptyDistribution("cannot sample from a distribution with no entries")
    label_index = {label: i for i, label in enumerate(dist.labels())}
    counts = np.zeros(len(dist.entries), dtype=np.int64)
    gen = _generator(seed)

    hdec = h.spectral_decomposition()
    if level == LEVEL_FULL:
        inst = projective_instrument(hdec, labels=[(i,) for i in range(len(hdec.clusters))])
        stats = apply(inst, rho)
        labels = [s.label for s in stats]
        probs = np.array([s.probability for s in stats])
        cum = _cumulative(probs)
        idx = np.searchsorted(cum, gen.random(n), side="right")
        for i, c in zip(*np.unique(idx, return_counts=True)):
            counts[label_index[labels[i]]] += int(c)
        return _finish_run(dist, counts, n, seed, max_order)

    rdec = rho.decomposition(cluster_tol)
    if level == LEVEL_EIGENSTATE:
        if basis is None:
            basis = rdec.basis()
        # label vectors with the same (cluster, index) pairs the analytic
        # distribution uses
        from .heat import _validate_eigenbasis

        v, assignments, _ = _validate_eigenbasis(rho, basis, cluster_tol)
        first = rank1_instrument(v, labels=assignments)
        phis = decohered_eigenbasis(rho.matrix, hdec)
        second_labels = [(nn, nu) for nn, nu, _ in phis]
        second = rank1_instrument(
            np.column_stack([vec for _, _, vec in phis]), labels=second_labels
        )
    elif level == LEVEL_PARTIAL:
        first = projective_instrument(rdec, labels=list(range(len(rdec.clusters))))
        second = projective_instrument(hdec, labels=list(range(len(hdec.clusters))))
    else:
        raise ValidationError(f"unknown level {level!r}")

    first_stats = [s for s in apply(first, rho) if s.probability > PROB_FLOOR]
    first_cum = _cumulative(np.array([s.probability for s in first_stats]))

    # conditional second-step tables, restricted to labels the analytic
    # distribution keeps (the discarded mass is at most the probability floor)
    cond_cums = []
    cond_targets = []
    for s in first_stats:
        second_stats = apply(second, s.post_state)
        probs = []
        targets = []
        for t in second_stats:
            joint = (s.label, t.label)
            if joint in label_index and t.probability > 0.0:
                probs.append(t.probability)
                targets.append(label_index[joint])
        if not probs:
            raise EmptyDistribution(
                f"first outcome {s.label!r} has no second outcome above the floor"
            )
        cond_cums.append(_cumulative(np.array(probs)))
        cond_targets.append(np.array(targets, dtype=np.int64))

    u1 = gen.random(n)
    u2 = gen.random(n)
    idx1 = np.searchsorted(first_cum, u1, side="right")
    for i in range(len(first_stats)):
        mask = idx1 == i
        if not mask.any():
            continue
        idx2 = np.searchsorted(cond_cums[i], u2[mask], side="right")
        np.add.at(counts, cond_targets[i][idx2], 1)
    return _finish_run(dist, counts, n, seed, max_order)


@dataclass(eq=False)
class ChiSquareResult:
    statistic: float
    dof: int
    critical: float
    passed: bool


def _critical_value(dof: int, level: float) -> float:
    from scipy.stats import chi2  # deferred: keeps CLI start-up light

    return float(chi2.ppf(level, dof)) if dof > 0 else 0.0


def chi_square_gof(
    counts,
    probs,
    level: float = 0.999,
    min_expected: float = 5.0,
) -> ChiSquareResult:
    """Pearson goodness-of-fit of observed counts against given
    probabilities.  Bins with expected count below ``min_expected`` are
    pooled (smallest first) so the chi-square approximation stays valid."""
    counts = np.asarray(counts, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if counts.shape != probs.shape:
        raise ValidationError("counts and probs must have the same length")
    n = counts.sum()
    expected = n * probs / probs.sum()

    order = np.argsort(expected)
    counts, expected = counts[order], expected[order]
    pooled_c: list[float] = []
    pooled_e: list[float] = []
    acc_c = acc_e = 0.0
    for c, e in zip(counts, expected):
        acc_c += c
        acc_e += e
        if acc_e >= min_expected:
            pooled_c.append(acc_c)
            pooled_e.append(acc_e)
            acc_c = acc_e = 0.0
    if acc_e > 0.0:
        if pooled_e:
            pooled_c[-1] += acc_c
            pooled_e[-1] += acc_e
        else:
            pooled_c.append(acc_c)
            pooled_e.append(acc_e)

    pooled_c = np.array(pooled_c)
    pooled_e = np.array(pooled_e)
    stat = float(np.sum((pooled_c - pooled_e) ** 2 / pooled_e))
    dof = len(pooled_e) - 1
    critical = _critical_value(dof, level)
    return ChiSquareResult(statistic=stat, dof=dof, critical=critical, passed=stat <= critical)


def chi_square_two_sample(counts1, counts2, level: float = 0.999) -> ChiSquareResult:
    """Two-sample chi-square test that two count vectors over the same
    categories come from one distribution."""
    r = np.asarray(counts1, dtype=float)
    s = np.asarray(counts2, dtype=float)
    if r.shape != s.shape:
        raise ValidationError("count vectors must have the same length")
    n1, n2 = r.sum(), s.sum()
    if n1 <= 0 or n2 <= 0:
        raise ValidationError("both samples must be non-empty")
    k1 = np.sqrt(n2 / n1)
    k2 = np.sqrt(n1 / n2)
    mask = (r + s) > 0
    stat = float(np.sum((k1 * r[mask] - k2 * s[mask]) ** 2 / (r[mask] + s[mask])))
    dof = int(mask.sum()) - 1
    critical = _critical_value(dof, level)
    return ChiSquareResult(statistic=stat, dof=dof, critical=critical, passed=stat <= critical)
