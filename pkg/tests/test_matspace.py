import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import diag_subspace, full_subspace
from ral.errors import DimensionError, EmptySpanError, MembershipError
from ral.matspace import (
    hs_inner,
    normalize,
    orth_complement,
    orthonormalize,
    pad_square,
    random_subspace,
    random_unit_matrix,
    schmidt_align,
    tensor_subspace,
)


def test_hs_inner_basic(rng):
    x = random_unit_matrix((3, 2), rng)
    assert abs(hs_inner(x, x) - 1) < 1e-12
    assert hs_inner(np.diag([1.0, 0]), np.diag([0.0, 1])) == 0


def test_hs_inner_conjugate_linear_in_second(rng):
    a = random_unit_matrix((2, 2), rng)
    b = random_unit_matrix((2, 2), rng)
    assert abs(hs_inner(a, 1j * b) - (-1j) * hs_inner(a, b)) < 1e-14
    assert abs(hs_inner(a, b) - np.trace(a @ b.conj().T)) < 1e-14


def test_hs_inner_tensor_factorization(rng):
    a, c = random_unit_matrix((2, 3), rng), random_unit_matrix((2, 3), rng)
    b, d = random_unit_matrix((3, 2), rng), random_unit_matrix((3, 2), rng)
    lhs = hs_inner(np.kron(a, b), np.kron(c, d))
    assert abs(lhs - hs_inner(a, c) * hs_inner(b, d)) < 1e-13


def test_hs_inner_shape_mismatch():
    with pytest.raises(DimensionError):
        hs_inner(np.eye(2), np.eye(3))


def test_orthonormalize_diagonal():
    K = orthonormalize([np.diag([2.0, 0]), np.diag([0.0, 3])])
    assert K.dim == 2
    assert np.allclose(K[0], np.diag([1, 0])) or np.allclose(K[1], np.diag([1, 0]))
    assert np.allclose(K.gram(), np.eye(2), atol=1e-12)


def test_orthonormalize_drops_dependent(rng):
    x = random_unit_matrix((2, 2), rng)
    K = orthonormalize([x, 2 * x])
    assert K.dim == 1
    assert abs(abs(hs_inner(K[0], x)) - 1) < 1e-12


def test_orthonormalize_keeps_near_dependent(rng):
    x = random_unit_matrix((2, 2), rng)
    y = random_unit_matrix((2, 2), rng)
    y = normalize(y - hs_inner(y, x) * x)
    K = orthonormalize([x, x + 1e-3 * y])
    assert K.dim == 2
    assert np.linalg.matrix_rank(K.gram(), tol=1e-8) == 2


def test_orthonormalize_errors():
    with pytest.raises(EmptySpanError):
        orthonormalize([np.zeros((2, 2))])
    with pytest.raises(EmptySpanError):
        orthonormalize([])
    with pytest.raises(DimensionError):
        orthonormalize([np.eye(2), np.eye(3)])


def test_orth_complement_examples():
    x = np.diag([1.0, 0]).astype(complex)
    assert orth_complement(full_subspace(2), x).dim == 3
    perp = orth_complement(diag_subspace(2), x)
    assert perp.dim == 1
    assert abs(abs(hs_inner(perp[0], np.diag([0, 1]))) - 1) < 1e-12
    K1 = orthonormalize([x])
    assert orth_complement(K1, x).dim == 0


def test_orth_complement_membership():
    with pytest.raises(MembershipError):
        orth_complement(diag_subspace(2), np.array([[0, 1], [0, 0]], dtype=complex))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6))
def test_orth_complement_properties(n, m, seed):
    d = min(n * m, 3)
    K = random_subspace(n, m, d, seed)
    x = normalize(K.combine(np.random.default_rng(seed).standard_normal(d)))
    perp = orth_complement(K, x)
    assert perp.dim == d - 1
    for y in perp:
        assert abs(hs_inner(x, y)) < 1e-10
        assert K.residual(y) < 1e-10
    if perp.dim:
        assert np.allclose(perp.gram(), np.eye(perp.dim), atol=1e-10)


def test_schmidt_align_diagonal_is_trivial():
    x = np.diag([0.8, 0.6]).astype(complex)
    form, _, x_rot = schmidt_align(orthonormalize([x]), x)
    assert np.allclose(np.abs(form.u), np.eye(2))
    assert np.allclose(np.abs(form.v), np.eye(2))
    assert np.allclose(x_rot, x)


def test_schmidt_align_off_diagonal():
    x = np.array([[0, 1], [0, 0]], dtype=complex)
    form, _, x_rot = schmidt_align(orthonormalize([x]), x)
    assert np.allclose(x_rot, np.diag([1, 0]))
    assert np.allclose(np.abs(form.u), np.abs(form.u).round())
    assert np.allclose(np.abs(form.v), np.abs(form.v).round())


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 10**6))
def test_schmidt_align_residual(n, m, seed):
    rng = np.random.default_rng(seed)
    x = random_unit_matrix((n, m), rng)
    K = orthonormalize([x, random_unit_matrix((n, m), rng)])
    form, K_rot, x_rot = schmidt_align(K, x)
    assert np.linalg.norm(form.u @ x @ form.v - x_rot) <= 1e-10
    assert np.allclose(form.u @ form.u.conj().T, np.eye(n), atol=1e-10)
    assert np.allclose(form.v @ form.v.conj().T, np.eye(m), atol=1e-10)
    assert abs(np.sum(form.sigma**2) - 1) < 1e-12
    assert np.all(np.diff(form.sigma) <= 1e-15)
    assert np.allclose(K_rot.gram(), K.gram(), atol=1e-10)
    assert K_rot.residual(x_rot) < 1e-10


def test_tensor_subspace(rng):
    KA = random_subspace(2, 2, 2, 1)
    KB = random_subspace(2, 3, 3, 2)
    KAB = tensor_subspace(KA, KB)
    assert KAB.dim == 6
    assert KAB.shape == (4, 6)
    assert np.allclose(KAB.gram(), np.eye(6), atol=1e-12)
    xA = normalize(KA.combine(rng.standard_normal(2)))
    xB = normalize(KB.combine(rng.standard_normal(3)))
    assert KAB.residual(np.kron(xA, xB)) < 1e-12


def test_random_subspace():
    a = random_subspace(2, 2, 2, 7)
    b = random_subspace(2, 2, 2, 7)
    assert np.array_equal(a.basis, b.basis)
    with pytest.raises(DimensionError):
        random_subspace(2, 2, 5, 0)
    K = random_subspace(3, 3, 4, 1)
    assert np.allclose(K.gram(), np.eye(4), atol=1e-10)


def test_pad_square():
    a = np.arange(6).reshape(2, 3)
    p = pad_square(a)
    assert p.shape == (3, 3)
    assert np.array_equal(p[:2], a)
    assert np.all(p[2] == 0)
