"""Hermitian functional calculus: the matrix sign function and spectral
projectors via dense eigendecomposition.

The kernel of a discretized operator is never exactly zero, so a relative
threshold tau stands in for "eigenvalue equals zero"; every result records
the tau it was computed with.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid
from .operators import OperatorMatrix

DEFAULT_RELATIVE_TAU = 1e-8

PROJECTOR_KINDS = ("plus", "minus", "zero")


@dataclass(frozen=True)
class ZeroTolerance:
    """Absolute threshold below which an eigenvalue counts as kernel."""

    tau: float

    def __post_init__(self):
        if not (self.tau >= 0.0 and np.isfinite(self.tau)):
            raise ValueError(f"tolerance must be a finite nonnegative number, got {self.tau}")

    @classmethod
    def relative(cls, scale: float, factor: float = DEFAULT_RELATIVE_TAU) -> "ZeroTolerance":
        """Threshold proportional to an operator scale (typically ``||D||``)."""
        return cls(tau=factor * float(scale))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues (ascending) and matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    grid: Grid
    rank: int

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))
        object.__setattr__(self, "vectors", np.asarray(self.vectors, dtype=complex))
        self.eigenvalues.flags.writeable = False
        self.vectors.flags.writeable = False

    @property
    def scale(self) -> float:
        """Largest absolute eigenvalue, the spectral norm of the operator."""
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0

    def apply_function(self, values: np.ndarray) -> np.ndarray:
        """Assemble V diag(values) V* for per-eigenvalue weights."""
        return (self.vectors * np.asarray(values)) @ self.vectors.conj().T


def _fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Rotate each eigenvector so its first significant component is real
    and positive; makes repeated decompositions reproducible."""
    out = np.array(vectors)
    mags = np.abs(out)
    tops = mags.max(axis=0)
    tops[tops == 0.0] = 1.0
    for j in range(out.shape[1]):
        significant = np.nonzero(mags[:, j] > 1e-8 * tops[j])[0]
        lead = out[significant[0], j] if significant.size else 1.0
        mag = abs(lead)
        if mag > 0.0:
            out[:, j] *= lead.conjugate() / mag
    return out


def eigendecompose(op: OperatorMatrix) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian operator.

    Exactly diagonal matrices bypass LAPACK: their calculus is a permutation
    of the diagonal, computed without round-off.  Phases follow the
    first-significant-component convention, ordering is by ascending
    eigenvalue.

    Raises
    ------
    ValueError
        If the operator was not built as Hermitian, or if the residual
        ``A V - V diag`` or the orthonormality defect exceeds tolerance.
    """
    if not op.hermitian:
        raise ValueError("eigendecompose needs an operator built as Hermitian")
    a = op.matrix
    n = a.shape[0]
    if np.count_nonzero(a - np.diag(np.diagonal(a))) == 0:
        diag = np.diagonal(a).real
        order = np.argsort(diag, kind="stable")
        vectors = np.zeros((n, n))
        vectors[order, np.arange(n)] = 1.0
        dec = SpectralDecomposition(eigenvalues=diag[order], vectors=vectors,
                                    grid=op.grid, rank=op.rank)
        return dec
    lam, vec = np.linalg.eigh(a)
    vec = _fix_phases(vec)
    dec = SpectralDecomposition(eigenvalues=lam, vectors=vec, grid=op.grid, rank=op.rank)
    scale = max(dec.scale, 1.0)
    residual = np.max(np.abs(a @ vec - vec * lam))
    if residual > 1e-9 * scale:
        raise ValueError(f"eigendecomposition residual {residual:.3e} exceeds 1e-9 * scale")
    ortho = np.max(np.abs(vec.conj().T @ vec - np.eye(n)))
    if ortho > 1e-10:
        raise ValueError(f"eigenvectors not orthonormal: defect {ortho:.3e}")
    return dec


def _resolve_tau(dec: SpectralDecomposition, tol) -> float:
    if tol is None:
        return DEFAULT_RELATIVE_TAU * dec.scale
    if isinstance(tol, ZeroTolerance):
        return tol.tau
    tau = float(tol)
    if tau < 0.0 or not np.isfinite(tau):
        raise ValueError(f"tolerance must be finite and nonnegative, got {tau}")
    return tau


def sign_of(op: OperatorMatrix, tol=None) -> OperatorMatrix:
    """Bounded sign of a Hermitian operator: +1, -1, or 0 on each
    eigenvector, with eigenvalues within ``tol`` of zero counted as kernel.

    ``tol`` may be a float, a :class:`ZeroTolerance`, or None for the
    default ``1e-8 * ||D||``.  The result keeps grid, rank, and spin but
    deliberately drops metric provenance: a sign is no longer a Dirac
    operator.
    """
    dec = eigendecompose(op)
    tau = _resolve_tau(dec, tol)
    weights = np.where(np.abs(dec.eigenvalues) <= tau, 0.0, np.sign(dec.eigenvalues))
    s = dec.apply_function(weights)
    if np.count_nonzero(s - np.diag(np.diagonal(s))) != 0:
        s = 0.5 * (s + s.conj().T)
    return OperatorMatrix(matrix=s, grid=op.grid, rank=op.rank, hermitian=True,
                          spin=op.spin, tolerance=tau)


def spectral_projector(op: OperatorMatrix, which: str = "zero", tol=None) -> OperatorMatrix:
    """Orthogonal projector onto the positive, negative, or near-kernel
    spectral subspace of a Hermitian operator."""
    if which not in PROJECTOR_KINDS:
        raise ValueError(f"which must be one of {PROJECTOR_KINDS}, got {which!r}")
    dec = eigendecompose(op)
    tau = _resolve_tau(dec, tol)
    kernel = np.abs(dec.eigenvalues) <= tau
    if which == "zero":
        weights = np.where(kernel, 1.0, 0.0)
    elif which == "plus":
        weights = np.where(~kernel & (dec.eigenvalues > 0.0), 1.0, 0.0)
    else:
        weights = np.where(~kernel & (dec.eigenvalues < 0.0), 1.0, 0.0)
    p = dec.apply_function(weights)
    if np.count_nonzero(p - np.diag(np.diagonal(p))) != 0:
        p = 0.5 * (p + p.conj().T)
    return OperatorMatrix(matrix=p, grid=op.grid, rank=op.rank, hermitian=True,
                          spin=op.spin, tolerance=tau)


def kernel_rank(op: OperatorMatrix, tol=None) -> int:
    """Number of eigenvalues within the kernel threshold."""
    dec = eigendecompose(op)
    tau = _resolve_tau(dec, tol)
    return int(np.count_nonzero(np.abs(dec.eigenvalues) <= tau))
