"""Symmetric-matrix layer: eigendecomposition, Loewner order, Weyl bound,
and the sampled matrix-convexity verifier."""

import numpy as np
import pytest

from loewner_shield.errors import (
    AsymmetricInputError,
    DimMismatchError,
    IndexOutOfRangeError,
    NonFiniteError,
)
from loewner_shield.symcone import (
    SymmetricMatrix,
    check_weyl_bound,
    eigendecompose,
    loewner_geq,
    sample_matrix_concavity,
    sample_matrix_convexity,
)


def charpoly_roots(M):
    """Oracle: eigenvalues as companion-matrix roots of det(M - lambda I).

    Coefficients come from the Faddeev-LeVerrier trace recursion, so this
    path never touches the symmetric eigensolver under test.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    N = np.eye(n)
    for k in range(1, n + 1):
        MN = M @ N
        a = -np.trace(MN) / k
        coeffs[k] = a
        N = MN + a * np.eye(n)
    return np.sort(np.roots(coeffs).real)


class TestEigendecompose:
    def test_identity(self):
        es = eigendecompose(SymmetricMatrix(np.eye(3)))
        assert np.allclose(es.values, [1.0, 1.0, 1.0])

    def test_diagonal_ordering(self):
        es = eigendecompose(SymmetricMatrix(np.diag([3.0, -1.0, 2.0])))
        assert np.allclose(es.values, [-1.0, 2.0, 3.0])

    def test_random_vs_charpoly_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            A = rng.normal(size=(5, 5))
            M = SymmetricMatrix(A + A.T)
            es = eigendecompose(M)
            expected = charpoly_roots(M.array)
            assert np.max(np.abs(es.values - expected)) < 1e-8

    def test_reconstruction_and_orthonormality(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            A = rng.normal(size=(6, 6))
            M = SymmetricMatrix(A + A.T)
            es = eigendecompose(M)
            rebuilt = es.vectors @ np.diag(es.values) @ es.vectors.T
            assert np.linalg.norm(rebuilt - M.array) <= 1e-10 * (1 + np.linalg.norm(M.array))
            assert np.linalg.norm(es.vectors.T @ es.vectors - np.eye(6)) <= 1e-10
            assert np.all(np.diff(es.values) >= -1e-14)

    def test_determinism_bitwise(self):
        rng = np.random.default_rng(11)
        A = rng.normal(size=(4, 4))
        M = SymmetricMatrix(A + A.T)
        v1 = eigendecompose(M).values
        v2 = eigendecompose(SymmetricMatrix(M.array + 0.0)).values
        assert v1.tobytes() == v2.tobytes()

    def test_nonfinite_rejected(self):
        bad = np.eye(3)
        bad[0, 0] = np.nan
        with pytest.raises(NonFiniteError):
            SymmetricMatrix(bad)

    def test_asymmetry_rejected(self):
        bad = np.eye(2)
        bad[0, 1] = 1e-6
        with pytest.raises(AsymmetricInputError):
            SymmetricMatrix(bad)

    def test_small_asymmetry_symmetrized(self):
        almost = np.eye(2)
        almost[0, 1] = 1e-12
        M = SymmetricMatrix(almost)
        assert M.array[0, 1] == M.array[1, 0]


class TestLoewner:
    def test_trivial_orderings(self):
        I2 = SymmetricMatrix(np.eye(2))
        twoI = SymmetricMatrix(2 * np.eye(2))
        assert loewner_geq(twoI, I2, 0.0)
        assert not loewner_geq(I2, twoI, 0.0)
        A = SymmetricMatrix(np.diag([1.0, 0.0]))
        B = SymmetricMatrix(np.diag([0.0, 1.0]))
        assert not loewner_geq(A, B, 0.0)

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatchError):
            loewner_geq(SymmetricMatrix(np.eye(2)), SymmetricMatrix(np.eye(3)), 0.0)

    def test_scalar_order_equivalence(self):
        # a <= b iff a*A <= b*A for PSD A (and strictness when A has a
        # positive eigenvalue).
        rng = np.random.default_rng(5)
        for _ in range(200):
            B = rng.normal(size=(3, 3))
            A = B @ B.T  # PSD, almost surely has a positive eigenvalue
            a, b = np.sort(rng.normal(size=2))
            assert loewner_geq(SymmetricMatrix(b * A), SymmetricMatrix(a * A), 1e-12)
            if np.max(np.linalg.eigvalsh(A)) > 1e-8:
                assert not loewner_geq(SymmetricMatrix(a * A), SymmetricMatrix(b * A), 1e-12) \
                    or np.isclose(a, b)

    def test_transitivity_with_tol_accumulation(self):
        rng = np.random.default_rng(9)
        tol = 1e-9
        for _ in range(100):
            X = rng.normal(size=(3, 3))
            C = SymmetricMatrix(X + X.T)
            D1 = rng.normal(size=(3, 3))
            D2 = rng.normal(size=(3, 3))
            B = SymmetricMatrix(C.array + D1 @ D1.T)
            A = SymmetricMatrix(B.array + D2 @ D2.T)
            assert loewner_geq(A, B, tol) and loewner_geq(B, C, tol)
            assert loewner_geq(A, C, 2 * tol)


class TestWeyl:
    def test_identity_case(self):
        I2 = SymmetricMatrix(np.eye(2))
        assert check_weyl_bound(I2, I2, 1, 1)

    def test_diagonal_case(self):
        A = SymmetricMatrix(np.diag([0.0, 1.0]))
        B = SymmetricMatrix(np.diag([1.0, 0.0]))
        assert check_weyl_bound(A, B, 2, 1)

    def test_random_pairs_all_valid_indices(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            p = int(rng.integers(2, 6))
            X = rng.normal(size=(p, p))
            Y = rng.normal(size=(p, p))
            A = SymmetricMatrix(X + X.T)
            B = SymmetricMatrix(Y + Y.T)
            i = int(rng.integers(1, p + 1))
            j = int(rng.integers(1, i + 1))
            assert check_weyl_bound(A, B, i, j)

    def test_index_out_of_range(self):
        I2 = SymmetricMatrix(np.eye(2))
        with pytest.raises(IndexOutOfRangeError):
            check_weyl_bound(I2, I2, 1, 2)
        with pytest.raises(IndexOutOfRangeError):
            check_weyl_bound(I2, I2, 3, 1)


class TestMatrixConvexitySampling:
    def test_psd_coefficient_square_is_convex(self):
        A = np.eye(2)
        H = lambda x: SymmetricMatrix(A * float(x[0]) ** 2)
        verdict = sample_matrix_convexity(H, (np.array([-1.0]), np.array([1.0])), samples=300)
        assert verdict.passed

    def test_affine_with_indefinite_coefficient_is_convex(self):
        A = np.diag([1.0, -1.0])
        H = lambda x: SymmetricMatrix(A * float(x[0]) + np.eye(2))
        verdict = sample_matrix_convexity(H, (np.array([-2.0]), np.array([2.0])), samples=300)
        assert verdict.passed

    def test_indefinite_coefficient_square_has_counterexample(self):
        # At x=1, y=-1, theta=0.5: 0.5 H(1) + 0.5 H(-1) - H(0) = diag(1,-1),
        # which is indefinite, so a violation must be found.
        A = np.diag([1.0, -1.0])
        H = lambda x: SymmetricMatrix(A * float(x[0]) ** 2)
        gap = 0.5 * A + 0.5 * A - A * 0.0
        assert np.linalg.eigvalsh(gap)[0] < 0
        verdict = sample_matrix_convexity(H, (np.array([-1.0]), np.array([1.0])), samples=400)
        assert not verdict.passed
        x, y, theta = verdict.counterexample
        mid = theta * x + (1 - theta) * y
        observed = theta * H(x).array + (1 - theta) * H(y).array - H(mid).array
        assert np.linalg.eigvalsh(observed)[0] < 0

    def test_concavity_wrapper(self):
        A = np.eye(2)
        H = lambda x: SymmetricMatrix(-A * float(x[0]) ** 2)
        assert sample_matrix_concavity(H, (np.array([-1.0]), np.array([1.0])), samples=200).passed

    def test_seeded_reproducibility(self):
        A = np.diag([1.0, -1.0])
        H = lambda x: SymmetricMatrix(A * float(x[0]) ** 2)
        box = (np.array([-1.0]), np.array([1.0]))
        v1 = sample_matrix_convexity(H, box, samples=50, seed=4)
        v2 = sample_matrix_convexity(H, box, samples=50, seed=4)
        assert v1.passed == v2.passed
        if v1.counterexample is not None:
            assert np.allclose(v1.counterexample[0], v2.counterexample[0])

    def test_nonfinite_h_rejected(self):
        H = lambda x: SymmetricMatrix(np.eye(2) * np.inf) if abs(x[0]) > 0.5 \
            else SymmetricMatrix(np.eye(2))
        with pytest.raises((NonFiniteError, Exception)):
            sample_matrix_convexity(H, (np.array([-1.0]), np.array([1.0])), samples=100)
