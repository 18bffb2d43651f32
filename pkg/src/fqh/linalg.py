"""Dense complex Hermitian linear algebra on small matrices.

Spectral projectors, pinching maps and everything downstream are built on
the routines here.  The eigensolver is a cyclic complex Jacobi iteration:
dimensions are capped at 64, where Jacobi is deterministic, accurate to a
few ulps of the Frobenius norm, and fast enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    IncompleteBasis,
    NoConvergence,
    NonHermitian,
    NotPSD,
    ValidationError,
)

MAX_DIM = 64

DEFAULT_HERMITICITY_TOL = 1e-10
DEFAULT_TRACE_TOL = 1e-9
DEFAULT_PSD_TOL = 1e-9

#: entrywise tolerance at which a vector family counts as a complete basis
BASIS_COMPLETENESS_TOL = 1e-8

JACOBI_MAX_SWEEPS = 64


def as_complex_matrix(entries, dim: int | None = None) -> np.ndarray:
    """Coerce to a square complex ndarray, checking the claimed dimension."""
    a = np.asarray(entries, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DimensionMismatch(
            f"matrix is {a.shape[0]}x{a.shape[0]}, expected dimension {dim}"
        )
    return a


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermitize(a: np.ndarray) -> np.ndarray:
    """(A + A^dag)/2, used to scrub rounding-level asymmetry."""
    return (a + a.conj().T) / 2


def default_cluster_tol(norm_f: float) -> float:
    """Absolute gap below which eigenvalues count as degenerate."""
    return 1e-8 * max(1.0, norm_f)


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvector columns of a
    Hermitian matrix, by cyclic complex Jacobi rotations.

    Each rotation zeroes one off-diagonal pair exactly; sweeps repeat until
    the off-diagonal Frobenius mass is negligible against the input norm.
    Raises NoConvergence if the sweep budget is exhausted.
    """
    a = np.array(matrix, dtype=complex, copy=True)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n == 1:
        return np.array([a[0, 0].real]), v

    norm = frobenius(a)
    if norm == 0.0:
        return np.zeros(n), v

    off_target = 1e-13 * norm
    skip = off_target / (n * n)
    off_mask = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        # summed directly over off-diagonal entries: the subtraction
        # norm^2 - diag^2 would lose everything below norm*sqrt(eps)
        return float(np.sqrt(np.sum(np.abs(a[off_mask]) ** 2)))

    converged = False
    for _ in range(max_sweeps):
        if off_norm() <= off_target:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r <= skip:
                    continue
                phase = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (app - aqq) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c

                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * phase * cp + s * cq
                a[:, q] = -s * phase * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * np.conj(phase) * rp + s * rq
                a[q, :] = -s * np.conj(phase) * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * phase * vp + s * vq
                v[:, q] = -s * phase * vp + c * vq
    if not converged and off_norm() > off_target:
        raise NoConvergence(
            f"Jacobi eigensolver did not converge within {max_sweeps} sweeps"
        )

    w = np.diag(a).real.copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


@dataclass(eq=False)
class HermitianOperator:
    """Square complex matrix, Hermitian within ``hermiticity_tol``.

    The eigendecomposition is computed once on first use and cached; the
    instance is treated as immutable after construction.
    """

    matrix: np.ndarray
    hermiticity_tol: float = DEFAULT_HERMITICITY_TOL

    def __post_init__(self):
        self.matrix = as_complex_matrix(self.matrix)
        if self.matrix.shape[0] > MAX_DIM:
            raise ValidationError(
                f"dimension {self.matrix.shape[0]} exceeds the supported maximum {MAX_DIM}"
            )
        defect = max_abs(self.matrix - self.matrix.conj().T)
        if defect > self.hermiticity_tol:
            raise NonHermitian(
                f"hermiticity violated: max|A - A^dag| = {defect:.3e} "
                f"exceeds tolerance {self.hermiticity_tol:.3e}"
            )
        self._eigh_cache = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm_f(self) -> float:
        return frobenius(self.matrix)

    def eigh(self):
        if self._eigh_cache is None:
            self._eigh_cache = jacobi_eigh(hermitize(self.matrix))
        return self._eigh_cache

    def spectral_decomposition(self, cluster_tol: float | None = None) -> "SpectralDecomposition":
        return spectral_decomposition(self, cluster_tol)


def eigh(op: HermitianOperator):
    """Ascending eigenvalues and orthonormal eigenvector columns of ``op``."""
    return op.eigh()


@dataclass(eq=False)
class EigenCluster:
    """One (near-)degenerate eigenvalue: projector plus an orthonormal basis
    of its eigenspace.  ``eigenvectors`` has the basis as columns."""

    eigenvalue: float
    multiplicity: int
    projector: np.ndarray
    eigenvectors: np.ndarray


@dataclass(eq=False)
class SpectralDecomposition:
    """Clustered spectral resolution A = sum_i lambda_i P_i."""

    clusters: list[EigenCluster]
    cluster_tol: float

    @property
    def dim(self) -> int:
        return self.clusters[0].projector.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.array([c.eigenvalue for c in self.clusters])

    def projectors(self) -> list[np.ndarray]:
        return [c.projector for c in self.clusters]

    def multiplicities(self) -> list[int]:
        return [c.multiplicity for c in self.clusters]

    def basis(self) -> np.ndarray:
        """All eigenvector columns, concatenated in cluster order."""
        return np.concatenate([c.eigenvectors for c in self.clusters], axis=1)

    def reconstruct(self) -> np.ndarray:
        return sum(c.eigenvalue * c.projector for c in self.clusters)


def spectral_decomposition(
    op: HermitianOperator, cluster_tol: float | None = None
) -> SpectralDecomposition:
    """Eigendecomposition with single-linkage clustering of near-degenerate
    eigenvalues: consecutive sorted eigenvalues closer than ``cluster_tol``
    are merged into one cluster with a rank-``multiplicity`` projector."""
    w, v = op.eigh()
    tol = default_cluster_tol(op.norm_f) if cluster_tol is None else float(cluster_tol)
    if tol < 0.0:
        raise ValidationError(f"cluster_tol must be nonnegative, got {tol}")

    n = len(w)
    clusters: list[EigenCluster] = []
    start = 0
    for i in range(1, n + 1):
        if i == n or w[i] - w[i - 1] > tol:
            vecs = v[:, start:i]
            clusters.append(
                EigenCluster(
                    eigenvalue=float(np.mean(w[start:i])),
                    multiplicity=i - start,
                    projector=vecs @ vecs.conj().T,
                    eigenvectors=vecs,
                )
            )
            start = i
    return SpectralDecomposition(clusters=clusters, cluster_tol=tol)


@dataclass(eq=False)
class DensityState:
    """Unit-trace positive semidefinite operator."""

    operator: HermitianOperator
    trace_tol: float = DEFAULT_TRACE_TOL
    psd_tol: float = DEFAULT_PSD_TOL

    def __post_init__(self):
        tr = complex(np.trace(self.operator.matrix))
        if abs(tr - 1.0) > self.trace_tol:
            raise ValidationError(
                f"trace deviates from one: |tr - 1| = {abs(tr - 1.0):.3e} "
                f"exceeds tolerance {self.trace_tol:.3e}"
            )
        wmin = float(self.operator.eigh()[0][0])
        if wmin < -self.psd_tol:
            raise NotPSD(
                f"not positive semidefinite: smallest eigenvalue {wmin:.3e} "
                f"is below -{self.psd_tol:.3e}"
            )

    @classmethod
    def from_matrix(
        cls,
        matrix,
        hermiticity_tol: float = DEFAULT_HERMITICITY_TOL,
        trace_tol: float = DEFAULT_TRACE_TOL,
        psd_tol: float = DEFAULT_PSD_TOL,
    ) -> "DensityState":
        return cls(
            operator=HermitianOperator(matrix, hermiticity_tol=hermiticity_tol),
            trace_tol=trace_tol,
            psd_tol=psd_tol,
        )

    @property
    def matrix(self) -> np.ndarray:
        return self.operator.matrix

    @property
    def dim(self) -> int:
        return self.operator.dim

    def decomposition(self, cluster_tol: float | None = None) -> SpectralDecomposition:
        return self.operator.spectral_decomposition(cluster_tol)


def as_basis(vectors, dim: int | None = None) -> np.ndarray:
    """Coerce a vector family to a matrix with the vectors as columns.

    A 2-d array is taken column-wise; a sequence of 1-d arrays is stacked.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        v = vectors.astype(complex, copy=False)
    else:
        v = np.column_stack([np.asarray(x, dtype=complex).ravel() for x in vectors])
    if dim is not None and v.shape != (dim, dim):
        raise DimensionMismatch(f"basis has shape {v.shape}, expected ({dim}, {dim})")
    return v


def check_complete_basis(v: np.ndarray, tol: float = BASIS_COMPLETENESS_TOL) -> None:
    """Raise IncompleteBasis unless the columns of ``v`` are orthonormal and
    resolve the identity within ``tol`` (entrywise)."""
    if v.shape[0] != v.shape[1]:
        raise IncompleteBasis(
            f"{v.shape[1]} vectors cannot span a {v.shape[0]}-dimensional space"
        )
    eye = np.eye(v.shape[0])
    gram_defect = max_abs(v.conj().T @ v - eye)
    completeness_defect = max_abs(v @ v.conj().T - eye)
    if gram_defect > tol or completeness_defect > tol:
        raise IncompleteBasis(
            f"vectors do not form a complete orthonormal basis: "
            f"gram defect {gram_defect:.3e}, completeness defect {completeness_defect:.3e}"
        )


def pinch(decomp: SpectralDecomposition, b) -> np.ndarray:
    """Projection (pinching) map sum_i P_i B P_i for the spectral projectors
    of the decomposed operator.  Kills coherences between eigenspaces."""
    bm = as_complex_matrix(b, decomp.dim)
    out = np.zeros_like(bm)
    for p in decomp.projectors():
        out += p @ bm @ p
    return out


def rank1_pinch(basis, b) -> np.ndarray:
    """Diagonal part of ``b`` in the given complete orthonormal basis:
    sum_k |psi_k><psi_k| B |psi_k><psi_k|."""
    v = as_basis(basis)
    bm = as_complex_matrix(b, v.shape[0])
    check_complete_basis(v)
    diag = np.einsum("ki,kl,li->i", v.conj(), bm, v)
    return (v * diag) @ v.conj().T
