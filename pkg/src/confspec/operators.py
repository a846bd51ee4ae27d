"""Discretized Dirac and multiplication operators in the Fourier basis.

All operators act on Fourier coefficient vectors.  A rank-r spinor bundle on
a grid with S sites gives vectors of length S * r, the spinor index varying
fastest.  Multiplication operators are the exact DFT conjugation of pointwise
multiplication on the sample grid, so products and brackets of multipliers
satisfy their algebraic identities to machine precision.

The conformal Dirac operator is the symmetric sandwich

    D_g = M(exp(-v/2)) D_flat M(exp(-v/2)),

the unitary image of the curved-metric operator inside the flat-measure
Hilbert space of the background.  Spin structures enter only through the
half-integer shifts of the flat symbol.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ._basis import (
    TAU,
    samples_to_coefficients,
    coefficients_to_samples,
    spectral_derivative,
    unitary_dft,
)
from .geometry import Grid, Metric, _as_point, _as_tuple

PERIODIC = "periodic"
ANTIPERIODIC = "antiperiodic"

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_X.flags.writeable = False
PAULI_Y.flags.writeable = False


@dataclass(frozen=True)
class SpinStructure:
    """Choice of spinor periodicity per generator of the torus/circle.

    ``periodic`` leaves the Fourier modes at integers, ``antiperiodic``
    shifts them by one half.
    """

    parities: tuple[str, ...]

    def __post_init__(self):
        parities = tuple(self.parities) if not isinstance(self.parities, str) \
            else (self.parities,)
        for p in parities:
            if p not in (PERIODIC, ANTIPERIODIC):
                raise ValueError(f"unknown spin parity {p!r}")
        if len(parities) not in (1, 2):
            raise ValueError("spin structures cover 1 or 2 generators")
        object.__setattr__(self, "parities", parities)

    @property
    def deltas(self) -> tuple[float, ...]:
        return tuple(0.5 if p == ANTIPERIODIC else 0.0 for p in self.parities)

    @property
    def dim(self) -> int:
        return len(self.parities)


def spin_structure(*parities: str) -> SpinStructure:
    """Convenience constructor: ``spin_structure("antiperiodic", "periodic")``."""
    return SpinStructure(tuple(parities))


@dataclass(frozen=True, eq=False)
class SpinorField:
    """Spinor samples on a grid: complex values of shape (sites, rank)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] != self.grid.sites:
            raise ValueError(
                f"expected values of shape (sites, rank) with sites={self.grid.sites}")
        if not np.all(np.isfinite(values)):
            raise ValueError("spinor values must be finite")
        object.__setattr__(self, "values", values)
        self.values.flags.writeable = False

    @property
    def rank(self) -> int:
        return self.values.shape[1]

    def norm(self) -> float:
        """L^2 norm with the flat cell volume of the grid."""
        return float(np.sqrt(self.grid.cell_volume) * np.linalg.norm(self.values))

    def inner(self, other: "SpinorField") -> complex:
        if other.grid != self.grid or other.rank != self.rank:
            raise ValueError("spinor fields live on different bundles")
        return complex(self.grid.cell_volume * np.vdot(self.values, other.values))

    def coefficients(self) -> np.ndarray:
        """Fourier coefficient vector of length sites * rank."""
        cube = self.values.reshape(self.grid.shape + (self.rank,))
        for axis in range(self.grid.dim):
            cube = samples_to_coefficients(cube, axis=axis)
        return cube.reshape(-1)

    @classmethod
    def from_coefficients(cls, grid: Grid, coeffs: np.ndarray) -> "SpinorField":
        coeffs = np.asarray(coeffs, dtype=complex)
        rank = coeffs.size // grid.sites
        if rank * grid.sites != coeffs.size:
            raise ValueError("coefficient vector length must be a multiple of sites")
        cube = coeffs.reshape(grid.shape + (rank,))
        for axis in range(grid.dim):
            cube = coefficients_to_samples(cube, axis=axis)
        return cls(grid=grid, values=cube.reshape(grid.sites, rank))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense operator on Fourier coefficient vectors.

    ``metric`` and ``spin`` are set only when the matrix is the Dirac
    operator assembled from that metric; derived operators (sign, spectral
    projectors, brackets) drop the metric so that provenance-dependent code
    paths never misfire.
    """

    matrix: np.ndarray
    grid: Grid
    rank: int = 1
    hermitian: bool = False
    spin: SpinStructure | None = None
    metric: Metric | None = dataclasses.field(default=None, repr=False)
    tolerance: float | None = None

    def __post_init__(self):
        a = np.array(self.matrix, dtype=complex)
        n = self.grid.sites * self.rank
        if a.shape != (n, n):
            raise ValueError(f"expected a {n} x {n} matrix, got shape {a.shape}")
        if self.hermitian:
            drift = np.max(np.abs(a - a.conj().T)) if n else 0.0
            if drift > 1e-10:
                raise ValueError(f"matrix declared hermitian but |A - A*| = {drift:.3e}")
        object.__setattr__(self, "matrix", a)
        self.matrix.flags.writeable = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, field: SpinorField) -> SpinorField:
        if field.grid != self.grid or field.rank != self.rank:
            raise ValueError("field does not match the operator's bundle")
        return SpinorField.from_coefficients(
            self.grid, self.matrix @ field.coefficients())

    def norm(self) -> float:
        """Spectral (operator) norm."""
        return float(np.linalg.norm(self.matrix, 2))


def _site_dft(grid: Grid) -> np.ndarray:
    """Unitary coefficient-to-sample matrix over all grid sites."""
    mats = [unitary_dft(n) for n in grid.shape]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _lift_scalar(block: np.ndarray, rank: int) -> np.ndarray:
    """Tensor a site-indexed matrix with the identity on the spinor index."""
    if rank == 1:
        return block
    s = block.shape[0]
    out = np.zeros((s, rank, s, rank), dtype=complex)
    for t in range(rank):
        out[:, t, :, t] = block
    return out.reshape(s * rank, s * rank)


def multiplication_operator(samples, grid: Grid, rank: int = 1) -> OperatorMatrix:
    """Multiplication by a function, conjugated into the Fourier basis.

    Parameters
    ----------
    samples : array_like
        Either scalar values per site, shape ``grid.shape`` or ``(sites,)``,
        or a matrix-valued field of shape ``grid.shape + (rank, rank)`` or
        ``(sites, rank, rank)``.
    grid : Grid
    rank : int
        Spinor rank of the target bundle.

    A constant scalar is represented exactly as that multiple of the
    identity.  The conjugation uses the full DFT, so multiplication
    operators compose exactly: M(f) M(g) = M(f g) to machine precision.
    """
    f = np.asarray(samples)
    s = grid.sites
    if f.shape in (grid.shape, (s,)):
        flat = f.reshape(s).astype(complex)
        hermitian = bool(np.all(np.abs(flat.imag) == 0.0))
        if np.all(flat == flat[0]):
            m = flat[0] * np.eye(s, dtype=complex)
        else:
            F = _site_dft(grid)
            m = F.conj().T @ (flat[:, None] * F)
        return OperatorMatrix(matrix=_lift_scalar(m, rank), grid=grid, rank=rank,
                              hermitian=hermitian)
    if f.shape in (grid.shape + (rank, rank), (s, rank, rank)):
        blocks = f.reshape(s, rank, rank).astype(complex)
        F = _site_dft(grid)
        out = np.zeros((s, rank, s, rank), dtype=complex)
        for a in range(rank):
            for b in range(rank):
                out[:, a, :, b] = F.conj().T @ (blocks[:, a, b, None] * F)
        m = out.reshape(s * rank, s * rank)
        hermitian = bool(np.max(np.abs(blocks - blocks.conj().transpose(0, 2, 1))) == 0.0)
        return OperatorMatrix(matrix=m, grid=grid, rank=rank, hermitian=hermitian)
    raise ValueError(
        f"samples of shape {f.shape} match neither a scalar field nor a rank-{rank} matrix field")


def _flat_symbol_blocks(metric: Metric, spin: SpinStructure) -> np.ndarray:
    """Flat Dirac symbol per mode: shape (sites,) for the circle, else
    (sites, 2, 2)."""
    scales = metric.background.axis_scales()
    deltas = spin.deltas
    modes = metric.grid.modes().astype(float)
    if metric.dim == 1:
        return scales[0] * (modes[:, 0] + deltas[0])
    kx = scales[0] * (modes[:, 0] + deltas[0])
    ky = scales[1] * (modes[:, 1] + deltas[1])
    return kx[:, None, None] * PAULI_X + ky[:, None, None] * PAULI_Y


def flat_dirac(metric: Metric, spin: SpinStructure) -> OperatorMatrix:
    """Dirac operator of the flat background, diagonal (circle) or
    2x2-block-diagonal (torus) in the Fourier basis."""
    if spin.dim != metric.dim:
        raise ValueError("spin structure dimension does not match the metric")
    s = metric.grid.sites
    blocks = _flat_symbol_blocks(metric, spin)
    if metric.dim == 1:
        d = np.diag(blocks.astype(complex))
    else:
        full = np.zeros((s, 2, s, 2), dtype=complex)
        full[np.arange(s), :, np.arange(s), :] = blocks
        d = full.reshape(2 * s, 2 * s)
    return OperatorMatrix(matrix=d, grid=metric.grid, rank=metric.spinor_rank,
                          hermitian=True, spin=spin, metric=metric)


def build_dirac(metric: Metric, spin: SpinStructure, grid: Grid | None = None) -> OperatorMatrix:
    """Dirac operator of ``exp(2v) g_flat`` in the flat-measure Hilbert space.

    Parameters
    ----------
    metric : Metric
    spin : SpinStructure
        One parity per generator; the count must match the dimension.
    grid : Grid, optional
        Must equal ``metric.grid`` when given; accepted for symmetry with
        the rest of the API.

    Returns
    -------
    OperatorMatrix
        Hermitian, with ``metric`` and ``spin`` provenance attached.

    Notes
    -----
    When v vanishes identically the flat operator is returned as built, with
    no numerical conjugation: multiplication by the constant 1 is exactly
    the identity.
    """
    if grid is not None and grid != metric.grid:
        raise ValueError("explicit grid does not match the metric's grid")
    if spin.dim != metric.dim:
        raise ValueError(
            f"need {metric.dim} spin parities for a {metric.dim}-dimensional metric")
    flat = flat_dirac(metric, spin)
    v = metric.factor.samples
    if np.all(v == 0.0):
        return flat
    w = np.exp(-0.5 * v)
    envelope = multiplication_operator(w, metric.grid, rank=metric.spinor_rank)
    d = envelope.matrix @ flat.matrix @ envelope.matrix
    d = 0.5 * (d + d.conj().T)
    return OperatorMatrix(matrix=d, grid=metric.grid, rank=metric.spinor_rank,
                          hermitian=True, spin=spin, metric=metric)


@dataclass(frozen=True)
class CliffordAction:
    """Clifford multiplication of covectors for a fixed metric.

    Calling the action on a base point and covector components returns the
    rank x rank matrix ``c_g(xi)``; it satisfies the anticommutation rule
    c(xi) c(eta) + c(eta) c(xi) = -2 g*(xi, eta) Id.
    """

    metric: Metric

    def __call__(self, x, xi) -> np.ndarray:
        return clifford(self.metric, x, xi)


def clifford(metric: Metric, x, xi) -> np.ndarray:
    """Clifford action ``c_g(xi)`` at the point x, an anti-hermitian
    rank x rank matrix."""
    x = _as_point(x, metric.dim)
    xi = _as_tuple(xi)
    if len(xi) != metric.dim:
        raise ValueError("covector components must match the metric dimension")
    scale = np.exp(-metric.factor_at(x))
    s = metric.background.axis_scales()
    if metric.dim == 1:
        return np.array([[-1j * scale * s[0] * xi[0]]], dtype=complex)
    return -1j * scale * (s[0] * xi[0] * PAULI_X + s[1] * xi[1] * PAULI_Y)


def _clifford_derivative_field(metric: Metric, a_samples: np.ndarray):
    """Pointwise Clifford action of da on the metric's grid.

    Returns scalar samples (circle) or 2x2 blocks per site (torus), plus the
    coarse derivative arrays for reuse by the norm routine.
    """
    a = np.asarray(a_samples, dtype=float).reshape(metric.grid.shape)
    v = metric.factor.samples
    scales = metric.background.axis_scales()
    if metric.dim == 1:
        da = spectral_derivative(a, axis=0, period=TAU)
        w = -1j * scales[0] * da * np.exp(-v)
        return w, (da,)
    dax = spectral_derivative(a, axis=0, period=TAU)
    day = spectral_derivative(a, axis=1, period=TAU)
    env = np.exp(-v)
    blocks = (-1j * env)[..., None, None] * (
        scales[0] * dax[..., None, None] * PAULI_X
        + scales[1] * day[..., None, None] * PAULI_Y)
    return blocks, (dax, day)


def commutator(op: OperatorMatrix, a_samples) -> OperatorMatrix:
    """Bracket [op, M(a)] with a real scalar function a.

    For a Dirac operator carrying metric provenance the bracket is assembled
    analytically as the multiplication operator by the Clifford action of
    da, the exact first-order action with no truncation-boundary artifacts.
    For any other operator the literal matrix bracket is returned.
    """
    a = np.asarray(a_samples, dtype=float)
    if op.metric is not None:
        field, _ = _clifford_derivative_field(op.metric, a)
        if op.metric.dim == 1:
            return multiplication_operator(field.reshape(-1), op.grid, rank=op.rank)
        return multiplication_operator(field, op.grid, rank=op.rank)
    m = multiplication_operator(a, op.grid, rank=op.rank)
    return OperatorMatrix(matrix=op.matrix @ m.matrix - m.matrix @ op.matrix,
                          grid=op.grid, rank=op.rank)


def commutator_norm(op: OperatorMatrix, a_samples) -> float:
    """Operator norm of [op, M(a)].

    For a Dirac-provenance operator the bracket is a multiplication
    operator, whose spectral norm is exactly the largest pointwise Clifford
    norm sqrt(g*(da, da)) over the grid; that maximum is returned without
    assembling the matrix.  Other operators get the dense spectral norm of
    the literal bracket.
    """
    a = np.asarray(a_samples, dtype=float)
    if op.metric is None:
        return commutator(op, a).norm()
    metric = op.metric
    _, derivs = _clifford_derivative_field(metric, a)
    scales = metric.background.axis_scales()
    flat_sq = sum((s * d) ** 2 for s, d in zip(scales, derivs))
    return float(np.max(np.exp(-metric.factor.samples) * np.sqrt(flat_sq)))
