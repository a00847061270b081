import math

import numpy as np
import pytest

from qoadapt.linalg import (
    NotSpdError,
    SingularMinorError,
    dual_norm,
    fit_exponent,
    gram_orthonormalize,
    inverse_spectral_norm,
    lu_normalized,
    schatten_norm,
    singular_values,
    spd_factor,
    spd_solve,
    spectral_norm,
    tril_strict,
    triu,
)
from conftest import random_matrix


def jacobi_eigenvalues(a, sweeps=60, tol=1e-14):
    """Cyclic Jacobi eigensolver for symmetric matrices; test-local oracle."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(a[p, q]))
                if abs(a[p, q]) <= tol * math.sqrt(abs(a[p, p] * a[q, q]) + 1e-300):
                    continue
                theta = 0.5 * math.atan2(2.0 * a[p, q], a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
        if off < 1e-14:
            break
    return np.sort(np.diag(a))[::-1]


class TestSingularValues:
    def test_diagonal(self):
        s = singular_values(np.diag([3.0, 0.0, 4.0]))
        np.testing.assert_allclose(s, [4.0, 3.0, 0.0], atol=1e-14)

    def test_identity(self):
        np.testing.assert_allclose(singular_values(np.eye(5)), np.ones(5), atol=1e-14)

    def test_nilpotent(self):
        s = singular_values(np.array([[0.0, 1.0], [0.0, 0.0]]))
        np.testing.assert_allclose(s, [1.0, 0.0], atol=1e-14)

    def test_descending_and_transpose_stable(self, rng):
        for _ in range(10):
            a = random_matrix(rng, 12)
            s = singular_values(a)
            assert np.all(np.diff(s) <= 1e-12)
            st = singular_values(a.T)
            np.testing.assert_allclose(s, st, rtol=1e-10, atol=1e-12)

    def test_matches_independent_jacobi_eigensolver(self, rng):
        for _ in range(5):
            a = random_matrix(rng, 16)
            s = singular_values(a)
            lam = jacobi_eigenvalues(a.T @ a)
            np.testing.assert_allclose(s, np.sqrt(np.maximum(lam, 0.0)), rtol=1e-8)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            singular_values(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestSchattenNorm:
    def test_identity_all_orders(self):
        n = 6
        for p in (1, 2, 4):
            assert schatten_norm(np.eye(n), p) == pytest.approx(n ** (1.0 / p), rel=1e-12)
        assert schatten_norm(np.eye(n), math.inf) == pytest.approx(1.0, rel=1e-12)

    def test_diag_pythagoras(self):
        assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0, rel=1e-14)

    def test_diag_spectral(self):
        assert schatten_norm(np.diag([3.0, 4.0]), math.inf) == pytest.approx(4.0, rel=1e-14)

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            schatten_norm(np.eye(2), 3)

    def test_transpose_invariance(self, rng):
        a = random_matrix(rng, 9)
        for p in (1, 2, 4, math.inf):
            assert schatten_norm(a, p) == pytest.approx(schatten_norm(a.T, p), rel=1e-10)

    def test_hoelder(self, rng):
        for _ in range(20):
            a = random_matrix(rng, 8)
            b = random_matrix(rng, 8)
            assert schatten_norm(a @ b, 2) <= schatten_norm(a, 4) * schatten_norm(b, 4) * (1 + 1e-12)
            for p in (1, 2, 4):
                assert schatten_norm(a @ b, p) <= (
                    schatten_norm(a, math.inf) * schatten_norm(b, p) * (1 + 1e-12)
                )


class TestTruncation:
    def test_basic(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(triu(m), [[1.0, 2.0], [0.0, 4.0]])
        np.testing.assert_array_equal(tril_strict(m), [[0.0, 0.0], [3.0, 0.0]])

    def test_identity_fixed(self):
        np.testing.assert_array_equal(triu(np.eye(4)), np.eye(4))

    def test_partition(self, rng):
        m = random_matrix(rng, 7)
        np.testing.assert_allclose(triu(m) + tril_strict(m), m, atol=0)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            triu(np.zeros((2, 3)))

    def test_truncation_constants(self, rng):
        """Schatten-2 constant 1, Schatten-4 constant <= 2, spectral log bound."""
        for _ in range(200):
            n = int(rng.integers(2, 65))
            m = random_matrix(rng, n)
            u = triu(m)
            assert schatten_norm(u, 2) <= schatten_norm(m, 2) * (1 + 1e-12)
            assert schatten_norm(u, 4) <= 2.0 * schatten_norm(m, 4) * (1 + 1e-12)
            cap = math.ceil(math.log2(n)) + 1
            assert schatten_norm(u, math.inf) <= cap * schatten_norm(m, math.inf) * (1 + 1e-12)


class TestLuNormalized:
    def test_two_by_two(self):
        l, u = lu_normalized(np.array([[2.0, 1.0], [4.0, 5.0]]))
        np.testing.assert_allclose(l, [[1.0, 0.0], [2.0, 1.0]], atol=1e-15)
        np.testing.assert_allclose(u, [[2.0, 1.0], [0.0, 3.0]], atol=1e-15)

    def test_identity(self):
        l, u = lu_normalized(np.eye(3))
        np.testing.assert_array_equal(l, np.eye(3))
        np.testing.assert_array_equal(u, np.eye(3))

    def test_zero_pivot(self):
        with pytest.raises(SingularMinorError) as err:
            lu_normalized(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert err.value.index == 1

    def test_round_trip_and_shape(self, rng):
        for n in (5, 17, 64, 130):
            m = random_matrix(rng, n) + n * np.eye(n)
            l, u = lu_normalized(m)
            assert np.linalg.norm(l @ u - m) <= 1e-12 * np.linalg.norm(m)
            assert np.allclose(np.diag(l), 1.0)
            assert np.all(np.triu(l, 1) == 0)
            assert np.all(np.tril(u, -1) == 0)


class TestSpd:
    def test_identity_roundtrip(self, rng):
        f = spd_factor(np.eye(4))
        b = rng.standard_normal(4)
        np.testing.assert_allclose(spd_solve(f, b), b, atol=1e-14)

    def test_scalar(self):
        f = spd_factor(np.array([[4.0]]))
        np.testing.assert_allclose(spd_solve(f, np.array([8.0])), [2.0], atol=1e-14)

    def test_random_roundtrip(self, rng):
        a = rng.standard_normal((8, 8))
        g = a @ a.T + 8 * np.eye(8)
        f = spd_factor(g)
        b = rng.standard_normal(8)
        x = spd_solve(f, b)
        assert np.linalg.norm(g @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_not_symmetric(self):
        with pytest.raises(NotSpdError):
            spd_factor(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_indefinite(self):
        with pytest.raises(NotSpdError):
            spd_factor(np.diag([1.0, -1.0]))


class TestDualNorm:
    def test_euclidean(self):
        f = spd_factor(np.eye(2))
        assert dual_norm(f, np.array([3.0, 4.0])) == pytest.approx(5.0, rel=1e-14)

    def test_scalar_weight(self):
        f = spd_factor(np.array([[4.0]]))
        assert dual_norm(f, np.array([2.0])) == pytest.approx(1.0, rel=1e-14)

    def test_scaled_identity(self):
        f = spd_factor(2.0 * np.eye(2))
        assert dual_norm(f, np.array([1.0, 1.0])) == pytest.approx(1.0, rel=1e-14)

    def test_dimension_mismatch(self):
        f = spd_factor(np.eye(2))
        with pytest.raises(ValueError):
            dual_norm(f, np.ones(3))


class TestGramOrthonormalize:
    def test_identity(self):
        q, rank = gram_orthonormalize(np.eye(4), spd_factor(np.eye(4)))
        assert rank == 4
        np.testing.assert_allclose(q, np.eye(4), atol=1e-14)

    def test_duplicate_columns(self):
        v = np.array([[1.0, 1.0], [0.0, 0.0]])
        q, rank = gram_orthonormalize(v, spd_factor(np.eye(2)))
        assert rank == 1

    def test_weighted_normalization(self):
        q, rank = gram_orthonormalize(
            np.array([[1.0], [0.0]]), spd_factor(np.diag([4.0, 1.0]))
        )
        assert rank == 1
        np.testing.assert_allclose(q, [[0.5], [0.0]], atol=1e-14)

    def test_random_weighted(self, rng):
        a = rng.standard_normal((7, 7))
        g = a @ a.T + 7 * np.eye(7)
        f = spd_factor(g)
        v = rng.standard_normal((7, 5))
        q, rank = gram_orthonormalize(v, f)
        assert rank == 5
        np.testing.assert_allclose(q.T @ g @ q, np.eye(5), atol=1e-10)

    def test_empty(self):
        q, rank = gram_orthonormalize(np.zeros((3, 0)), spd_factor(np.eye(3)))
        assert rank == 0 and q.shape == (3, 0)


class TestFitExponent:
    def test_exact_line(self):
        assert fit_exponent([(1, 1), (2, 2), (4, 4)]) == pytest.approx(1.0, abs=1e-12)

    def test_constant(self):
        assert fit_exponent([(1, 5), (2, 5), (4, 5)]) == pytest.approx(0.0, abs=1e-12)

    def test_square_root(self):
        assert fit_exponent([(1, 1), (4, 2), (16, 4)]) == pytest.approx(0.5, abs=1e-12)

    def test_too_few(self):
        with pytest.raises(ValueError):
            fit_exponent([(1, 1)])

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            fit_exponent([(1, 1), (2, -1)])


def test_spectral_norm_large_matches_dense(rng):
    a = rng.standard_normal((600, 600))
    lanczos = spectral_norm(a)
    dense = float(np.linalg.svd(a, compute_uv=False)[0])
    assert lanczos == pytest.approx(dense, rel=1e-8)


def test_inverse_spectral_norm_matches_dense(rng):
    a = rng.standard_normal((40, 40)) + 40 * np.eye(40)
    assert inverse_spectral_norm(a) == pytest.approx(
        float(np.linalg.svd(np.linalg.inv(a), compute_uv=False)[0]), rel=1e-9
    )
