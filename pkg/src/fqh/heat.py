"""Heat distributions, moments and variance bounds for a projective energy
measurement.

Three coarse-graining levels of the measurement record are supported:

* ``eigenstate``: rank-1 measurement in an eigenbasis of the state, then the
  energy measurement resolved within each energy eigenspace.  The heat of a
  record is the final energy eigenvalue minus the initial eigenvector's
  energy expectation.  Higher moments depend on the basis chosen inside
  degenerate clusters of the state.
* ``partial``: only the degenerate subspaces of the state and of the
  Hamiltonian are distinguished.  Depends on spectral projectors alone, so
  every moment is unique.
* ``full``: the bare energy measurement.  The conditional energy change is
  identically zero, hence so is every moment.

All three share a vanishing first moment, collapse to zero entirely when
the state commutes with the Hamiltonian, and obey
var(full) <= var(partial) <= var(eigenstate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisNotEigen, DimensionMismatch, NotPSD, ValidationError
from .instruments import PROB_FLOOR
from .linalg import (
    DEFAULT_PSD_TOL,
    DensityState,
    HermitianOperator,
    SpectralDecomposition,
    as_basis,
    as_complex_matrix,
    check_complete_basis,
    frobenius,
    hermitize,
    jacobi_eigh,
    rank1_pinch,
)

LEVEL_EIGENSTATE = "eigenstate"
LEVEL_PARTIAL = "partial"
LEVEL_FULL = "full"
LEVELS = (LEVEL_EIGENSTATE, LEVEL_PARTIAL, LEVEL_FULL)

#: residual above which a vector is rejected as an eigenvector of the state
BASIS_EIGEN_TOL = 1e-8

#: slack used for the variance ordering and first-moment checks
ORDERING_SLACK = 1e-9


@dataclass(frozen=True)
class HeatEntry:
    """One trajectory: structured outcome label, probability, heat value."""

    label: tuple
    probability: float
    heat: float


@dataclass(eq=False)
class HeatDistribution:
    """Exact heat distribution at one coarse-graining level.

    Labels are ((m, mu), (n, nu)) for the eigenstate level, (m, n) for the
    partial level and (n,) for the full level.  ``skipped`` counts outcome
    pairs dropped because their weight was at or below the probability
    floor.
    """

    level: str
    entries: list[HeatEntry]
    basis_tag: str | None = None
    skipped: int = 0

    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    def heats(self) -> np.ndarray:
        return np.array([e.heat for e in self.entries])

    def labels(self) -> list[tuple]:
        return [e.label for e in self.entries]

    def total_probability(self) -> float:
        return float(self.probabilities().sum()) if self.entries else 0.0


def _state_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityState):
        return rho.matrix
    if isinstance(rho, HermitianOperator):
        return rho.matrix
    return as_complex_matrix(rho)


def _clipped_weight(eigenvalue: float) -> float:
    # eigenvalues in [-psd_tol, 0) are rounding noise on a PSD operator
    return max(float(eigenvalue), 0.0)


def _validate_eigenbasis(
    rho: DensityState, basis, cluster_tol: float | None
) -> tuple[np.ndarray, list[tuple[int, int]], SpectralDecomposition]:
    """Check that ``basis`` is a complete orthonormal eigenbasis of ``rho``
    and assign each vector to a spectral cluster.

    Returns the basis as columns, a (cluster, index-within-cluster) pair per
    column, and the decomposition used for the assignment.
    """
    rdec = rho.decomposition(cluster_tol)
    v = as_basis(basis, rho.dim)
    check_complete_basis(v)

    rm = rho.matrix
    cluster_values = rdec.eigenvalues()
    match_tol = max(10.0 * rdec.cluster_tol, BASIS_EIGEN_TOL)
    assignments: list[tuple[int, int]] = []
    counts = [0] * len(rdec.clusters)
    for k in range(v.shape[1]):
        vec = v[:, k]
        lam = float(np.real(np.vdot(vec, rm @ vec)))
        residual = float(np.linalg.norm(rm @ vec - lam * vec))
        if residual > BASIS_EIGEN_TOL:
            raise BasisNotEigen(
                f"basis vector {k} is not an eigenvector of the state: "
                f"residual {residual:.3e} exceeds {BASIS_EIGEN_TOL:.1e}"
            )
        m = int(np.argmin(np.abs(cluster_values - lam)))
        if abs(cluster_values[m] - lam) > match_tol:
            raise BasisNotEigen(
                f"basis vector {k} has eigenvalue {lam:.6g}, "
                f"no spectral cluster within {match_tol:.1e}"
            )
        assignments.append((m, counts[m]))
        counts[m] += 1
    for m, cluster in enumerate(rdec.clusters):
        if counts[m] != cluster.multiplicity:
            raise BasisNotEigen(
                f"cluster {m} (eigenvalue {cluster.eigenvalue:.6g}) received "
                f"{counts[m]} basis vectors but has multiplicity {cluster.multiplicity}"
            )
    return v, assignments, rdec


def decohered_eigenbasis(
    rho, hdec: SpectralDecomposition
) -> list[tuple[int, int, np.ndarray]]:
    """Orthonormal eigenvectors of the energy-decohered state, grouped by
    energy cluster: for each projector the compressed state is diagonalized
    inside the eigenspace.  Returns (cluster, index, vector) triples."""
    rm = _state_matrix(rho)
    out = []
    for n, cluster in enumerate(hdec.clusters):
        vn = cluster.eigenvectors
        block = hermitize(vn.conj().T @ rm @ vn)
        _, u = jacobi_eigh(block)
        phis = vn @ u
        for nu in range(cluster.multiplicity):
            out.append((n, nu, phis[:, nu]))
    return out


def eigenstate_distribution(
    rho: DensityState,
    h: HermitianOperator,
    basis,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
    basis_tag: str | None = None,
) -> HeatDistribution:
    """Joint distribution of rank-1 state measurement then energy
    measurement, with the heat of each record.

    ``basis`` must be a complete orthonormal eigenbasis of ``rho``; the
    probability of the record ((m, mu), (n, nu)) is the state eigenvalue
    times the squared overlap between the initial eigenvector and the final
    decohered eigenvector, and its heat is the final energy eigenvalue
    minus the initial vector's energy expectation.
    """
    if rho.dim != h.dim:
        raise DimensionMismatch("state and Hamiltonian dimensions differ")
    v, assignments, rdec = _validate_eigenbasis(rho, basis, cluster_tol)
    hdec = h.spectral_decomposition()
    phis = decohered_eigenbasis(rho.matrix, hdec)
    energies = hdec.eigenvalues()

    hm = h.matrix
    entries = []
    skipped = 0
    for k in range(v.shape[1]):
        m, mu = assignments[k]
        lam = _clipped_weight(rdec.clusters[m].eigenvalue)
        psi = v[:, k]
        e_psi = float(np.real(np.vdot(psi, hm @ psi)))
        for n, nu, phi in phis:
            p = lam * float(abs(np.vdot(phi, psi)) ** 2)
            if p <= prob_floor:
                skipped += 1
                continue
            entries.append(
                HeatEntry(
                    label=((m, mu), (n, nu)),
                    probability=p,
                    heat=float(energies[n]) - e_psi,
                )
            )
    return HeatDistribution(
        level=LEVEL_EIGENSTATE,
        entries=entries,
        basis_tag=basis_tag or "user-supplied",
        skipped=skipped,
    )


def partial_cg_distribution(
    rho: DensityState,
    h: HermitianOperator,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
) -> HeatDistribution:
    """Distribution over (state cluster, energy cluster) pairs.

    Probability of (m, n) is the state eigenvalue times tr[Pi_n P_m]; the
    heat is the energy eigenvalue minus the conditional energy
    tr[Pi_n P_m H P_m]/tr[Pi_n P_m].  Pairs whose overlap tr[Pi_n P_m] is
    at or below ``prob_floor`` are skipped (their conditional energy is the
    indeterminate 0/0, conventionally 0).  Depends only on projectors, so
    the result is invariant under re-basing of degenerate clusters.
    """
    if rho.dim != h.dim:
        raise DimensionMismatch("state and Hamiltonian dimensions differ")
    rdec = rho.decomposition(cluster_tol)
    hdec = h.spectral_decomposition()
    hm = h.matrix

    entries = []
    skipped = 0
    for m, cm in enumerate(rdec.clusters):
        lam = _clipped_weight(cm.eigenvalue)
        pm = cm.projector
        php = pm @ hm @ pm
        for n, cn in enumerate(hdec.clusters):
            w = float(np.trace(cn.projector @ pm).real)
            if w <= prob_floor:
                skipped += 1
                continue
            num = float(np.trace(cn.projector @ php).real)
            entries.append(
                HeatEntry(
                    label=(m, n),
                    probability=lam * w,
                    heat=float(cn.eigenvalue) - num / w,
                )
            )
    return HeatDistribution(level=LEVEL_PARTIAL, entries=entries, skipped=skipped)


def full_cg_distribution(
    rho: DensityState,
    h: HermitianOperator,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
) -> HeatDistribution:
    """Distribution over energy outcomes alone.  The conditional energy
    change vanishes identically, so every heat value is exactly 0."""
    if rho.dim != h.dim:
        raise DimensionMismatch("state and Hamiltonian dimensions differ")
    hdec = h.spectral_decomposition(cluster_tol)
    entries = []
    skipped = 0
    for n, cn in enumerate(hdec.clusters):
        p = float(np.trace(cn.projector @ rho.matrix).real)
        if p <= prob_floor:
            skipped += 1
            continue
        entries.append(HeatEntry(label=(n,), probability=p, heat=0.0))
    return HeatDistribution(level=LEVEL_FULL, entries=entries, skipped=skipped)


def distribution_for(
    rho: DensityState,
    h: HermitianOperator,
    level: str,
    basis=None,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
    basis_tag: str | None = None,
) -> HeatDistribution:
    """Dispatch to the distribution builder for ``level``; the eigenstate
    level defaults to the eigensolver basis of the state."""
    if level == LEVEL_EIGENSTATE:
        if basis is None:
            basis = rho.decomposition(cluster_tol).basis()
            basis_tag = basis_tag or "default-eigenbasis"
        return eigenstate_distribution(
            rho, h, basis, cluster_tol=cluster_tol, prob_floor=prob_floor, basis_tag=basis_tag
        )
    if level == LEVEL_PARTIAL:
        return partial_cg_distribution(rho, h, cluster_tol=cluster_tol, prob_floor=prob_floor)
    if level == LEVEL_FULL:
        return full_cg_distribution(rho, h, cluster_tol=cluster_tol, prob_floor=prob_floor)
    raise ValidationError(f"unknown level {level!r}, expected one of {LEVELS}")


def moments_enumerated(dist: HeatDistribution, order: int) -> list[float]:
    """Moments 1..order as probability-weighted powers of the heat values."""
    if order < 1:
        raise ValidationError(f"moment order must be >= 1, got {order}")
    p = dist.probabilities()
    heats = dist.heats()
    if len(p) == 0:
        return [0.0] * order
    return [float(np.sum(p * heats**k)) for k in range(1, order + 1)]


def moments_trace_formula_eigenstate(
    rho: DensityState,
    h: HermitianOperator,
    basis,
    order: int,
    cluster_tol: float | None = None,
) -> list[float]:
    """Closed-form eigenstate-level moments tr[(H - D(H))^k rho], where D is
    the rank-1 pinching in the supplied eigenbasis of the state."""
    if order < 1:
        raise ValidationError(f"moment order must be >= 1, got {order}")
    v, _, _ = _validate_eigenbasis(rho, basis, cluster_tol)
    x = h.matrix - rank1_pinch(v, h.matrix)
    out = []
    power = np.eye(rho.dim, dtype=complex)
    for _ in range(order):
        power = power @ x
        out.append(float(np.trace(power @ rho.matrix).real))
    return out


def moments_trace_formula_partial(
    rho: DensityState,
    h: HermitianOperator,
    order: int,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
) -> list[float]:
    """Closed-form partial-level moments via the binomial expansion of
    (energy - conditional energy)^k in projector traces.  Pairs with
    overlap at or below ``prob_floor`` contribute 0."""
    if order < 1:
        raise ValidationError(f"moment order must be >= 1, got {order}")
    rdec = rho.decomposition(cluster_tol)
    hdec = h.spectral_decomposition()
    hm = h.matrix

    out = [0.0] * order
    for cm in rdec.clusters:
        lam = _clipped_weight(cm.eigenvalue)
        pm = cm.projector
        php = pm @ hm @ pm
        for cn in hdec.clusters:
            w = float(np.trace(cn.projector @ pm).real)
            if w <= prob_floor:
                continue
            ratio = float(np.trace(cn.projector @ php).real) / w
            eps = float(cn.eigenvalue)
            for k in range(1, order + 1):
                term = sum(
                    math.comb(k, i) * (-1.0) ** i * eps ** (k - i) * ratio**i
                    for i in range(k + 1)
                )
                out[k - 1] += lam * w * term
    return out


def skew_information(rho_like, h, psd_tol: float = DEFAULT_PSD_TOL) -> float:
    """Wigner-Yanase skew information tr[H^2 rho] - tr[H rho^(1/2) H rho^(1/2)].

    Nonnegative, zero iff the state commutes with H, convex in the state,
    and equal to the variance of H on pure states.  The square root is
    taken spectrally with eigenvalues in [-psd_tol, 0) clipped to zero.
    """
    rm = _state_matrix(rho_like)
    hm = h.matrix if isinstance(h, HermitianOperator) else as_complex_matrix(h)
    if rm.shape != hm.shape:
        raise DimensionMismatch("state and observable dimensions differ")
    w, v = jacobi_eigh(hermitize(rm))
    if w[0] < -psd_tol:
        raise NotPSD(
            f"skew information needs a PSD state, got eigenvalue {w[0]:.3e}"
        )
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    value = np.trace(hm @ hm @ rm) - np.trace(hm @ root @ hm @ root)
    return float(value.real)


def variance_identities(
    rho: DensityState,
    h: HermitianOperator,
    basis=None,
    cluster_tol: float | None = None,
) -> tuple[float, float, float, float]:
    """Variances of the eigenstate and partial heat plus their
    skew-information expressions.

    Returns (var_eigenstate, var_partial, skew_sum_eigenstate,
    skew_sum_partial).  The first and third agree identically; the second
    is bounded by the fourth, which is bounded by the first.
    """
    rdec = rho.decomposition(cluster_tol)
    if basis is None:
        basis = rdec.basis()

    qdist = eigenstate_distribution(rho, h, basis, cluster_tol=cluster_tol)
    m1, m2 = moments_enumerated(qdist, 2)
    var_q = m2 - m1**2

    sdist = partial_cg_distribution(rho, h, cluster_tol=cluster_tol)
    s1, s2 = moments_enumerated(sdist, 2)
    var_s = s2 - s1**2

    v, assignments, _ = _validate_eigenbasis(rho, basis, cluster_tol)
    skew_eig = 0.0
    for k in range(v.shape[1]):
        m, _ = assignments[k]
        lam = _clipped_weight(rdec.clusters[m].eigenvalue)
        if lam == 0.0:
            continue
        vec = v[:, k]
        skew_eig += lam * skew_information(np.outer(vec, vec.conj()), h)

    skew_partial = 0.0
    for cm in rdec.clusters:
        lam = _clipped_weight(cm.eigenvalue)
        if lam == 0.0:
            continue
        q_m = lam * cm.multiplicity
        skew_partial += q_m * skew_information(cm.projector / cm.multiplicity, h)

    return var_q, var_s, skew_eig, skew_partial


def bloch_basis(
    rho: DensityState,
    theta: float,
    phi: float,
    reference=None,
    cluster_tol: float | None = None,
) -> np.ndarray:
    """Eigenbasis of ``rho`` with every two-dimensional degenerate cluster
    rotated by the Bloch angles (theta, phi).

    With (e_plus, e_minus) the cluster's reference pair, the rotated pair is

        u_plus  =  exp(+i phi) cos(theta/2) e_plus + sin(theta/2) e_minus
        u_minus = -exp(-i phi) cos(theta/2) e_minus + sin(theta/2) e_plus

    Clusters of other dimensions keep their reference vectors.  The
    reference defaults to the eigensolver basis; when given it must itself
    be an eigenbasis of the state.
    """
    if reference is None:
        rdec = rho.decomposition(cluster_tol)
        groups = [c.eigenvectors for c in rdec.clusters]
    else:
        v, assignments, rdec = _validate_eigenbasis(rho, reference, cluster_tol)
        groups = []
        for m, cluster in enumerate(rdec.clusters):
            cols = [k for k, (mm, _) in enumerate(assignments) if mm == m]
            groups.append(v[:, cols])

    cos_half = math.cos(theta / 2.0)
    sin_half = math.sin(theta / 2.0)
    rotated = []
    for block in groups:
        if block.shape[1] == 2:
            e_plus = block[:, 0]
            e_minus = block[:, 1]
            u_plus = np.exp(1j * phi) * cos_half * e_plus + sin_half * e_minus
            u_minus = -np.exp(-1j * phi) * cos_half * e_minus + sin_half * e_plus
            rotated.append(np.column_stack([u_plus, u_minus]))
        else:
            rotated.append(block)
    return np.concatenate(rotated, axis=1)


@dataclass(eq=False)
class FqhReport:
    """Full analysis of one (state, Hamiltonian) pair.

    Moments are indexed 1..order; ``moments`` comes from enumerating the
    distributions and ``moments_trace`` from the closed-form expressions,
    with ``max_crosscheck_discrepancy`` their largest disagreement.
    ``invariant_violations`` lists any checked identity that failed at its
    stated tolerance (empty on healthy inputs).
    """

    dim: int
    order: int
    basis_tag: str
    commuting_case: bool
    moments: dict[str, list[float]]
    moments_trace: dict[str, list[float]]
    variances: dict[str, float]
    skew_bound_eigenstate: float
    skew_bound_partial: float
    ordering_ok: bool
    max_crosscheck_discrepancy: float
    prob_floor_skips: dict[str, int]
    invariant_violations: list[str] = field(default_factory=list)
    distributions: dict[str, HeatDistribution] = field(default_factory=dict)

    def to_dict(self) -> dict:
        def entry_dict(e: HeatEntry) -> dict:
            return {
                "label": _label_to_json(e.label),
                "probability": e.probability,
                "heat": e.heat,
            }

        return {
            "dim": self.dim,
            "order": self.order,
            "basis_tag": self.basis_tag,
            "commuting_case": self.commuting_case,
            "moments": self.moments,
            "moments_trace": self.moments_trace,
            "variances": self.variances,
            "skew_bound_eigenstate": self.skew_bound_eigenstate,
            "skew_bound_partial": self.skew_bound_partial,
            "ordering_ok": self.ordering_ok,
            "max_crosscheck_discrepancy": self.max_crosscheck_discrepancy,
            "prob_floor_skips": self.prob_floor_skips,
            "invariant_violations": list(self.invariant_violations),
            "distributions": {
                level: {
                    "basis_tag": dist.basis_tag,
                    "skipped": dist.skipped,
                    "entries": [entry_dict(e) for e in dist.entries],
                }
                for level, dist in self.distributions.items()
            },
        }


def _label_to_json(label):
    if isinstance(label, tuple):
        return [_label_to_json(x) for x in label]
    return int(label)


def analyze(
    rho: DensityState,
    h: HermitianOperator,
    basis=None,
    order: int = 4,
    cluster_tol: float | None = None,
    prob_floor: float = PROB_FLOOR,
    basis_tag: str | None = None,
) -> FqhReport:
    """Compute distributions, moments (enumerated and closed form),
    variances and skew-information bounds at all three coarse-graining
    levels, and check the identities that must hold between them."""
    if order < 2:
        raise ValidationError(f"order must be >= 2, got {order}")
    if rho.dim != h.dim:
        raise DimensionMismatch("state and Hamiltonian dimensions differ")

    if basis is None:
        basis = rho.decomposition(cluster_tol).basis()
        basis_tag = basis_tag or "default-eigenbasis"
    basis_tag = basis_tag or "user-supplied"

    qdist = eigenstate_distribution(
        rho, h, basis, cluster_tol=cluster_tol, prob_floor=prob_floor, basis_tag=basis_tag
    )
    sdist = partial_cg_distribution(rho, h, cluster_tol=cluster_tol, prob_floor=prob_floor)
    bdist = full_cg_distribution(rho, h, cluster_tol=cluster_tol, prob_floor=prob_floor)

    moments = {
        LEVEL_EIGENSTATE: moments_enumerated(qdist, order),
        LEVEL_PARTIAL: moments_enumerated(sdist, order),
        LEVEL_FULL: moments_enumerated(bdist, order),
    }
    moments_trace = {
        LEVEL_EIGENSTATE: moments_trace_formula_eigenstate(
            rho, h, basis, order, cluster_tol=cluster_tol
        ),
        LEVEL_PARTIAL: moments_trace_formula_partial(
            rho, h, order, cluster_tol=cluster_tol, prob_floor=prob_floor
        ),
    }

    var_q, var_s, skew_eig, skew_partial = variance_identities(
        rho, h, basis, cluster_tol=cluster_tol
    )
    variances = {LEVEL_EIGENSTATE: var_q, LEVEL_PARTIAL: var_s, LEVEL_FULL: 0.0}

    rm, hm = rho.matrix, h.matrix
    comm = frobenius(rm @ hm - hm @ rm)
    commuting = comm <= 1e-9 * frobenius(rm) * frobenius(hm)

    h_norm = h.norm_f
    cross_tol = 1e-8 * (1.0 + h_norm**order)
    crosscheck = 0.0
    for level in (LEVEL_EIGENSTATE, LEVEL_PARTIAL):
        for a, b in zip(moments[level], moments_trace[level]):
            crosscheck = max(crosscheck, abs(a - b))

    ordering_ok = (0.0 <= var_s + ORDERING_SLACK) and (var_s <= var_q + ORDERING_SLACK)

    violations: list[str] = []
    for level in LEVELS:
        if abs(moments[level][0]) > ORDERING_SLACK:
            violations.append(f"first moment of {level} level exceeds 1e-9")
    if not ordering_ok:
        violations.append("variance ordering full <= partial <= eigenstate violated")
    if abs(var_q - skew_eig) > 1e-8 * (1.0 + h_norm**2):
        violations.append("eigenstate variance does not match its skew-information sum")
    if var_s > skew_partial + ORDERING_SLACK:
        violations.append("partial variance exceeds its skew-information bound")
    if skew_partial > var_q + ORDERING_SLACK:
        violations.append("partial skew-information bound exceeds eigenstate variance")
    if crosscheck > cross_tol:
        violations.append("enumerated and closed-form moments disagree")
    if commuting and any(
        abs(mom) > ORDERING_SLACK for level in LEVELS for mom in moments[level]
    ):
        violations.append("commuting state has nonvanishing moments")

    return FqhReport(
        dim=rho.dim,
        order=order,
        basis_tag=basis_tag,
        commuting_case=bool(commuting),
        moments=moments,
        moments_trace=moments_trace,
        variances=variances,
        skew_bound_eigenstate=skew_eig,
        skew_bound_partial=skew_partial,
        ordering_ok=bool(ordering_ok),
        max_crosscheck_discrepancy=float(crosscheck),
        prob_floor_skips={
            LEVEL_EIGENSTATE: qdist.skipped,
            LEVEL_PARTIAL: sdist.skipped,
            LEVEL_FULL: bdist.skipped,
        },
        invariant_violations=violations,
        distributions={
            LEVEL_EIGENSTATE: qdist,
            LEVEL_PARTIAL: sdist,
            LEVEL_FULL: bdist,
        },
    )
