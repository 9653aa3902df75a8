import numpy as np
import pytest

from cvlab.exceptions import DimensionError, DomainError
from cvlab.linalg import (
    adjoint,
    anticommutator,
    commutator,
    expm_hermitian,
    matmul,
    matrix_sqrt,
    partial_trace,
    polar_decompose,
    pseudoinverse,
    spectral_decompose,
    trace,
)

from conftest import random_density, random_unitary


def test_basic_arithmetic():
    assert trace(np.eye(2)) == 2
    np.testing.assert_array_equal(adjoint([[0, 1j], [0, 0]]), [[0, 0], [-1j, 0]])
    np.testing.assert_array_equal(matmul(np.diag([2, 3]), np.diag([5, 7])), np.diag([10, 21]))
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_commutators():
    a = np.array([[1, 2], [3, 4]], dtype=complex)
    np.testing.assert_array_equal(commutator(a, a), np.zeros((2, 2)))
    pf = np.diag([1, 0])
    h = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(commutator(pf, 1j * h), [[0, 1j], [-1j, 0]])
    np.testing.assert_allclose(anticommutator(np.diag([1, 0]), np.full((2, 2), 0.5)), [[1, 0.5], [0.5, 0]])
    with pytest.raises(DimensionError):
        commutator(np.eye(2), np.eye(3))


def test_spectral_examples():
    s = spectral_decompose(np.diag([1.0, -1.0]))
    assert s.eigenvalues == (-1.0, 1.0)
    np.testing.assert_allclose(s.projectors[0], np.diag([0, 1]))
    np.testing.assert_allclose(s.projectors[1], np.diag([1, 0]))

    s = spectral_decompose(np.eye(2))
    assert s.eigenvalues == (1.0,)
    np.testing.assert_allclose(s.projectors[0], np.eye(2))

    s = spectral_decompose([[0, 1], [1, 0]])
    np.testing.assert_allclose(s.eigenvalues, (-1, 1), atol=1e-15)
    np.testing.assert_allclose(s.projectors[0], 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-15)
    np.testing.assert_allclose(s.projectors[1], 0.5 * np.array([[1, 1], [1, 1]]), atol=1e-15)

    with pytest.raises(DomainError):
        spectral_decompose([[0, 1], [0, 0]])


def test_spectral_properties(rng):
    for _ in range(50):
        d = rng.integers(1, 7)
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        h = z + z.conj().T
        if d > 2:
            # force a degenerate pair
            u = random_unitary(rng, d)
            w = rng.normal(size=d)
            w[1] = w[0]
            h = (u * w) @ u.conj().T
        s = spectral_decompose(h)
        assert np.linalg.norm(s.reconstruct() - h) <= 1e-10
        assert np.linalg.norm(sum(s.projectors) - np.eye(d)) <= 1e-10
        for k, p in enumerate(s.projectors):
            for l, q in enumerate(s.projectors):
                target = p if k == l else 0 * p
                assert np.linalg.norm(p @ q - target) <= 1e-10
        assert list(s.eigenvalues) == sorted(s.eigenvalues)


def test_polar_examples():
    p = polar_decompose(np.diag([0.6, 0.4]))
    np.testing.assert_allclose(p.unitary, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(p.positive, np.diag([0.6, 0.4]), atol=1e-15)

    x = np.array([[0, 1], [1, 0]], dtype=complex)
    p = polar_decompose(x)
    np.testing.assert_allclose(p.unitary, x, atol=1e-15)
    np.testing.assert_allclose(p.positive, np.eye(2), atol=1e-15)

    m = np.array([[0, -2], [1, 0]], dtype=complex)
    p = polar_decompose(m)
    np.testing.assert_allclose(p.positive, np.diag([1, 2]), atol=1e-15)
    np.testing.assert_allclose(p.unitary, [[0, -1], [1, 0]], atol=1e-15)
    np.testing.assert_allclose(p.unitary @ p.positive, m, atol=1e-15)


def test_polar_random_and_singular(rng):
    for _ in range(100):
        d = rng.integers(1, 7)
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        if d > 1 and rng.random() < 0.3:
            m[:, 0] = 0  # singular
        p = polar_decompose(m)
        assert np.linalg.norm(p.unitary.conj().T @ p.unitary - np.eye(d)) <= 1e-10
        assert np.linalg.norm(p.unitary @ p.positive - m) <= 1e-10 * max(1, np.linalg.norm(m))
        assert np.linalg.eigvalsh(p.positive).min() >= -1e-12
        # deterministic
        q = polar_decompose(m)
        np.testing.assert_array_equal(p.unitary, q.unitary)


def test_pseudoinverse_examples():
    np.testing.assert_allclose(pseudoinverse(np.eye(3)), np.eye(3))
    x = np.array([[0, 1], [1, 0]])
    np.testing.assert_allclose(pseudoinverse(x), x.T, atol=1e-15)
    # full column rank: normal-equations oracle (A^T A)^-1 A^T
    col = np.array([[1.0], [1.0]])
    oracle = np.linalg.solve(col.T @ col, col.T)
    np.testing.assert_allclose(pseudoinverse(col), oracle, atol=1e-15)
    np.testing.assert_allclose(pseudoinverse(col), [[0.5, 0.5]], atol=1e-15)
    np.testing.assert_array_equal(pseudoinverse(np.zeros((2, 3))), np.zeros((3, 2)))


def test_pseudoinverse_rank_deficient_min_norm(rng):
    # rank-1 matrix: A+ b must be the min-norm least-squares solution
    a = np.outer([1.0, 2.0, 2.0], [1.0, 1.0])
    b = np.array([1.0, 0.0, 3.0])
    x = pseudoinverse(a) @ b
    # oracle: least-squares along the range direction, spread evenly over the init space
    u = np.array([1.0, 2.0, 2.0]) / 3.0
    v = np.array([1.0, 1.0]) / np.sqrt(2)
    sigma = 3.0 * np.sqrt(2)
    np.testing.assert_allclose(x, v * (u @ b) / sigma, atol=1e-14)


def test_matrix_sqrt():
    np.testing.assert_allclose(matrix_sqrt(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(matrix_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    g = 0.1
    m1, m2 = np.diag([0.5 + g, 0.5 - g]), np.diag([0.5 - g, 0.5 + g])
    rest = np.eye(2) - m1 @ m1 - m2 @ m2
    np.testing.assert_allclose(rest, np.diag([0.48, 0.48]), atol=1e-15)
    r = matrix_sqrt(rest)
    np.testing.assert_allclose(r, np.sqrt(0.48) * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(r @ r, rest, atol=1e-15)
    with pytest.raises(DomainError):
        matrix_sqrt(np.diag([1.0, -0.1]))


def test_matrix_sqrt_random(rng):
    for _ in range(30):
        rho = random_density(rng, rng.integers(1, 6), rank=1)
        r = matrix_sqrt(rho)
        assert np.linalg.norm(r @ r - rho) <= 1e-10
        assert np.linalg.eigvalsh(r).min() >= -1e-12


def test_expm_hermitian_is_group():
    h = np.array([[0, 1], [1, 0]], dtype=complex)
    a, b = expm_hermitian(h, 0.2), expm_hermitian(h, 0.3)
    np.testing.assert_allclose(a @ b, expm_hermitian(h, 0.5), atol=1e-15)
    np.testing.assert_allclose(expm_hermitian(h, 0.2), np.cos(0.2) * np.eye(2) + 1j * np.sin(0.2) * h, atol=1e-15)


def test_partial_trace(rng):
    a, b = random_density(rng, 2), random_density(rng, 3)
    big = np.kron(a, b)
    np.testing.assert_allclose(partial_trace(big, [2, 3], keep=0), a, atol=1e-14)
    np.testing.assert_allclose(partial_trace(big, [2, 3], keep=1), b, atol=1e-14)
    with pytest.raises(DimensionError):
        partial_trace(big, [2, 2], keep=0)


def test_numerator_identity_random(rng):
    # M rho M^dag = 1/2 (M M^dag rho + rho M M^dag) + 1/2 ([M, rho] M^dag + M [rho, M^dag])
    for _ in range(100):
        d = rng.integers(1, 6)
        m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        md = m.conj().T
        lhs = m @ rho @ md
        rhs = 0.5 * (m @ md @ rho + rho @ m @ md) + 0.5 * (commutator(m, rho) @ md + m @ commutator(rho, md))
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1, np.linalg.norm(m) ** 2 * np.linalg.norm(rho))


def test_double_commutator_identity(rng):
    for _ in range(100):
        d = rng.integers(1, 6)
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        m = z + z.conj().T
        rho = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lhs = commutator(m, rho) @ m + m @ commutator(rho, m)
        rhs = -commutator(m, commutator(m, rho))
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * max(1, np.linalg.norm(m) ** 2 * np.linalg.norm(rho))
