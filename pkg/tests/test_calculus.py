"""Hermitian functional calculus: eigendecomposition, sign, spectral projectors."""

import numpy as np
import pytest

from confspec import (
    Grid,
    OperatorMatrix,
    build_dirac,
    eigendecompose,
    kernel_rank,
    make_circle_metric,
    sign_of,
    spectral_projector,
)

TWO_PI = 2.0 * np.pi


def _diag_op(values):
    n = len(values)
    return OperatorMatrix(matrix=np.diag(values).astype(complex),
                          grid=Grid((n,), (TWO_PI,)), rank=1, hermitian=True)


def _random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return OperatorMatrix(matrix=(a + a.conj().T) / 2.0,
                          grid=Grid((n,), (TWO_PI,)), rank=1, hermitian=True)


# ------------------------------------------------------------- eigendecompose

def test_eigendecompose_diagonal():
    decomp = eigendecompose(_diag_op([3.0, 1.0, 2.0, 4.0]))
    assert np.allclose(np.sort(decomp.eigenvalues), [1.0, 2.0, 3.0, 4.0],
                       atol=1e-14)
    gram = decomp.vectors.conj().T @ decomp.vectors
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-14


def test_eigendecompose_reconstructs(rng):
    op = _random_hermitian(rng, 64)
    decomp = eigendecompose(op)
    rebuilt = (decomp.vectors * decomp.eigenvalues) @ decomp.vectors.conj().T
    assert np.max(np.abs(rebuilt - op.matrix)) <= 1e-9 * np.max(np.abs(op.matrix))


def test_eigendecompose_flat_periodic(periodic):
    metric = make_circle_metric(TWO_PI, np.zeros(8), 0)
    decomp = eigendecompose(build_dirac(metric, periodic))
    assert np.allclose(np.sort(decomp.eigenvalues), np.arange(-4.0, 4.0),
                       atol=1e-12)


# ------------------------------------------------------------------- sign(D)

def test_sign_of_diagonal():
    signed = sign_of(_diag_op([-2.0, 0.0, 5.0, -7.0]))
    assert np.array_equal(signed.matrix,
                          np.diag([-1.0, 0.0, 1.0, -1.0]).astype(complex))


def test_sign_is_hermitian(sign_curved_s1):
    assert sign_curved_s1.hermitian
    gap = np.max(np.abs(sign_curved_s1.matrix - sign_curved_s1.matrix.conj().T))
    assert gap <= 1e-12


def test_sign_squares_to_identity_without_kernel(sign_curved_s1):
    # antiperiodic circle: no zero modes, so sign(D) is an involution
    square = sign_curved_s1.matrix @ sign_curved_s1.matrix
    assert np.max(np.abs(square - np.eye(sign_curved_s1.size))) <= 1e-12


def test_sign_with_kernel(periodic):
    metric = make_circle_metric(TWO_PI, np.zeros(64), 0)
    dirac = build_dirac(metric, periodic)
    assert kernel_rank(dirac) == 1
    signed = sign_of(dirac)
    eigenvalues = np.sort(np.linalg.eigvalsh(signed.matrix))
    assert np.sum(np.abs(eigenvalues) < 0.5) == 1, "exactly one spectral zero"


def test_sign_annihilates_kernel_projector(periodic):
    metric = make_circle_metric(TWO_PI, np.zeros(64), 0)
    dirac = build_dirac(metric, periodic)
    product = sign_of(dirac).matrix @ spectral_projector(dirac, which="zero").matrix
    assert np.max(np.abs(product)) <= 1e-12


def test_sign_scale_equivariance(dirac_curved_s1):
    doubled = OperatorMatrix(matrix=2.0 * dirac_curved_s1.matrix,
                             grid=dirac_curved_s1.grid, rank=1, hermitian=True)
    assert np.allclose(sign_of(dirac_curved_s1).matrix, sign_of(doubled).matrix,
                       atol=1e-13)


# ---------------------------------------------------------------- projectors

def test_projector_plus_diagonal():
    plus = spectral_projector(_diag_op([-1.0, 2.0]), which="plus")
    assert np.allclose(plus.matrix, np.diag([0.0, 1.0]), atol=1e-14)


def test_projector_kinds_resolve_identity(rng):
    for _ in range(10):
        op = _random_hermitian(rng, 24)
        total = sum(spectral_projector(op, which=kind).matrix
                    for kind in ("plus", "minus", "zero"))
        assert np.max(np.abs(total - np.eye(24))) <= 1e-12


def test_projector_identity_with_sign(rng):
    # pi_plus = (sign + Id - pi_zero) / 2, exactly, including on a kernel
    metric = make_circle_metric(TWO_PI, np.zeros(64), 0)
    from confspec import SpinStructure
    dirac = build_dirac(metric, SpinStructure(("periodic",)))
    candidates = [dirac] + [_random_hermitian(rng, 24) for _ in range(10)]
    for op in candidates:
        plus = spectral_projector(op, which="plus").matrix
        zero = spectral_projector(op, which="zero").matrix
        synthesized = 0.5 * (sign_of(op).matrix + np.eye(op.size) - zero)
        assert np.max(np.abs(plus - synthesized)) <= 1e-12


def test_projector_rejects_unknown_kind():
    with pytest.raises(ValueError, match="which"):
        spectral_projector(_diag_op([1.0, 2.0]), which="positive")


# ---------------------------------------------------------------- invariants

def test_sign_commutes_with_operator(dirac_curved_s1, sign_curved_s1):
    bracket = (sign_curved_s1.matrix @ dirac_curved_s1.matrix
               - dirac_curved_s1.matrix @ sign_curved_s1.matrix)
    scale = np.linalg.norm(dirac_curved_s1.matrix, 2)
    assert np.max(np.abs(bracket)) <= 1e-9 * scale


def test_sign_times_operator_is_positive(dirac_curved_s1, sign_curved_s1):
    modulus = sign_curved_s1.matrix @ dirac_curved_s1.matrix
    eigenvalues = np.linalg.eigvalsh((modulus + modulus.conj().T) / 2.0)
    scale = np.max(np.abs(dirac_curved_s1.matrix))
    assert eigenvalues.min() >= -1e-9 * scale


def test_explicit_tolerance_controls_kernel():
    op = _diag_op([-1.0, 1e-6, 1.0, 2.0])
    assert kernel_rank(op) == 0
    assert kernel_rank(op, tol=1e-3) == 1
    wide = sign_of(op, tol=1e-3)
    assert wide.matrix[1, 1] == 0.0
