"""Normalized hypergraph Laplacian and its spectrum.

The Laplacian is ``L = D^-1 S S^T`` with ``S`` the signed incidence matrix and
``D`` the diagonal of degrees.  It is similar to the symmetric matrix
``K = D^-1/2 S S^T D^-1/2``, which is what the eigensolver works on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LaplacianError, SpectrumError, SyncPrecludedError
from .hypercore import ChemicalHypergraph, incidence, is_bipartite

__all__ = [
    "LaplacianMatrix",
    "Spectrum",
    "SpectralSummary",
    "BipartiteBoundReport",
    "laplacian",
    "laplacian_from_matrix",
    "jacobi_eigh",
    "spectrum",
    "spectral_summary",
    "kernel_projector",
    "bipartite_bound_check",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LaplacianMatrix:
    """Dense Laplacian together with the degree diagonal used to normalize it.

    ``signed`` is kept when the matrix came from a hypergraph so that the
    symmetric similar matrix can be formed without any rounding asymmetry.
    """

    dense: np.ndarray
    degrees: np.ndarray
    signed: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "dense", _frozen(self.dense))
        object.__setattr__(self, "degrees", _frozen(self.degrees))
        if self.signed is not None:
            object.__setattr__(self, "signed", _frozen(self.signed))

    @property
    def n(self) -> int:
        return self.dense.shape[0]

    def symmetric(self) -> np.ndarray:
        """``K = D^-1/2 S S^T D^-1/2`` (or the symmetrized similarity transform)."""
        root = np.sqrt(self.degrees)
        if self.signed is not None:
            T = self.signed / root[:, None]
            return T @ T.T
        K = root[:, None] * self.dense / root[None, :]
        return 0.5 * (K + K.T)


def laplacian(H: ChemicalHypergraph) -> LaplacianMatrix:
    inc = incidence(H)
    deg = inc.degrees
    zero = np.flatnonzero(deg == 0)
    if zero.size:
        i = int(zero[0])
        raise LaplacianError(
            f"vertex {H.label(i)} has degree 0 (isolated or catalyst-only); "
            "the normalized Laplacian is undefined",
            vertex=i,
        )
    S = inc.signed.astype(float)
    L = (S @ S.T) / deg[:, None]
    return LaplacianMatrix(L, deg.astype(float), S)


def laplacian_from_matrix(L, degrees=None) -> LaplacianMatrix:
    """Wrap an externally built Laplacian; ``degrees`` defaults to all ones."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise LaplacianError(f"Laplacian must be square, got shape {L.shape}")
    d = np.ones(L.shape[0]) if degrees is None else np.asarray(degrees, dtype=float)
    if np.any(d <= 0):
        raise LaplacianError("degrees must be positive")
    return LaplacianMatrix(L, d)


# ---------------------------------------------------------------------------
# eigensolver


def _off_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A, rel_tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` unsorted, eigenvectors as columns.
    Sweeps stop once the off-diagonal Frobenius norm is at most
    ``rel_tol * ||A||_F``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise SpectrumError(f"matrix must be square, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max(initial=0.0))):
        raise SpectrumError("jacobi_eigh requires a symmetric matrix")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    if n <= 1:
        return np.diag(A).copy(), V

    target = rel_tol * np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = _off_norm(A)
        if off <= target:
            break
        # elements already below this threshold are left alone for the sweep
        skip = target / n
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :].copy()
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                A[p, p] = app - t * apq
                A[q, q] = aqq + t * apq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        off = _off_norm(A)
        if off > target:
            raise SpectrumError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
    return np.diag(A).copy(), V


@dataclass(frozen=True)
class Spectrum:
    """Sorted spectrum of a Laplacian.

    ``eigenvectors`` are eigenvectors of L itself (columns).  ``sym_vectors``
    are the orthonormal eigenvectors of the symmetric similar matrix, related
    by ``eigenvectors = D^-1/2 sym_vectors``.  Both are ``None`` for a spectrum
    built from eigenvalues alone.
    """

    eigenvalues: np.ndarray
    zero_tol: float
    eigenvectors: np.ndarray | None = None
    sym_vectors: np.ndarray | None = None
    degrees: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _frozen(self.eigenvalues))
        for name in ("eigenvectors", "sym_vectors", "degrees"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    @classmethod
    def from_eigenvalues(cls, values, zero_tol: float | None = None) -> "Spectrum":
        vals = np.sort(np.asarray(values, dtype=float))
        if zero_tol is None:
            zero_tol = 1e-9 * len(vals)
        return cls(vals, float(zero_tol))

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def zero_multiplicity(self) -> int:
        return int(np.count_nonzero(self.eigenvalues <= self.zero_tol))


def spectrum(L: LaplacianMatrix, zero_tol: float | None = None) -> Spectrum:
    n = L.n
    if zero_tol is None:
        zero_tol = 1e-9 * n
    if zero_tol < 0:
        raise ValueError("zero_tol must be non-negative")
    K = L.symmetric()
    vals, W = jacobi_eigh(K)
    order = np.argsort(vals, kind="stable")
    vals, W = vals[order], W[:, order]

    low = vals.min(initial=0.0)
    if low < -zero_tol:
        raise SpectrumError(
            f"eigenvalue {low:.3e} below -zero_tol; Laplacian is not positive semidefinite"
        )
    vals = np.where(vals < 0.0, 0.0, vals)

    W = W / np.linalg.norm(W, axis=0)
    lead = W[np.argmax(np.abs(W), axis=0), np.arange(n)]
    W = W * np.where(lead < 0, -1.0, 1.0)
    V = W / np.sqrt(L.degrees)[:, None]
    return Spectrum(vals, float(zero_tol), V, W, L.degrees)


@dataclass(frozen=True)
class SpectralSummary:
    zero_multiplicity: int
    lambda_min_nonzero: float | None
    lambda_max: float


def spectral_summary(s: Spectrum) -> SpectralSummary:
    k0 = s.zero_multiplicity
    lam_min = float(s.eigenvalues[k0]) if k0 < s.n else None
    return SpectralSummary(k0, lam_min, float(s.eigenvalues[-1]))


def kernel_projector(s: Spectrum) -> np.ndarray:
    """Projector onto the zero-eigenvalue eigenspace of L.

    Orthogonal for the degree-weighted inner product; in matrix form
    ``P = D^-1/2 W0 W0^T D^1/2`` with ``W0`` the kernel basis of K.
    """
    if s.sym_vectors is None or s.degrees is None:
        raise ValueError("kernel_projector needs a spectrum with eigenvectors")
    k0 = s.zero_multiplicity
    if k0 == 0:
        raise SyncPrecludedError("no neutral modes; synchronized dynamics precluded")
    W0 = s.sym_vectors[:, :k0]
    root = np.sqrt(s.degrees)
    return (W0 / root[:, None]) @ (W0.T * root[None, :])


@dataclass(frozen=True)
class BipartiteBoundReport:
    lambda_max: float
    lambda_max_bipartite: float
    holds: bool
    comparison_is_bipartite: bool
    equal: bool


def _edge_shapes(H: ChemicalHypergraph) -> list[tuple[int, int]]:
    # orientation does not change the Laplacian, so (in, out) is compared unordered
    return sorted(
        tuple(sorted((len(h.pure_inputs), len(h.pure_outputs)))) for h in H.hyperedges
    )


def bipartite_bound_check(
    H: ChemicalHypergraph, H_bip: ChemicalHypergraph, tol: float = 1e-9
) -> BipartiteBoundReport:
    """Instance check of ``lambda_N(H) <= lambda_N(H_bip)`` for a shape-matched comparison."""
    if H.n_hyperedges != H_bip.n_hyperedges or _edge_shapes(H) != _edge_shapes(H_bip):
        raise ValueError(
            "comparison hypergraph must have the same number of hyperedges and the same "
            "non-catalyst input/output counts per hyperedge"
        )
    lam = float(spectrum(laplacian(H)).eigenvalues[-1])
    lam_bip = float(spectrum(laplacian(H_bip)).eigenvalues[-1])
    return BipartiteBoundReport(
        lambda_max=lam,
        lambda_max_bipartite=lam_bip,
        holds=lam <= lam_bip + tol,
        comparison_is_bipartite=is_bipartite(H_bip),
        equal=abs(lam - lam_bip) <= tol,
    )
