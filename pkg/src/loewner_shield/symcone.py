"""Symmetric-matrix algebra: eigendecomposition, Loewner-order predicates,
the Weyl eigenvalue bound, and a sampling verifier for matrix convexity.

Everything here is pure and operates on small dense matrices (p <= 8 in
practice).  Positive-semidefiniteness is always tested with the relative
tolerance convention ``tol * (1 + ||.||_F)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import (
    AsymmetricInputError,
    DimMismatchError,
    IndexOutOfRangeError,
    NonFiniteError,
)

DEFAULT_PSD_TOL = 1e-8
_SYMMETRY_TOL = 1e-10


class SymmetricMatrix:
    """Dense symmetric p x p real matrix.

    Construction symmetrizes the input as (M + M^T)/2; asymmetry larger than
    1e-10 (absolute, relative to the Frobenius scale) is rejected rather than
    silently averaged away.  The wrapped array is read-only.
    """

    __slots__ = ("array", "dim")

    def __init__(self, entries):
        arr = np.asarray(entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimMismatchError(f"expected a square matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("matrix entries must be finite")
        skew = np.max(np.abs(arr - arr.T)) if arr.size else 0.0
        scale = 1.0 + np.linalg.norm(arr)
        if skew > _SYMMETRY_TOL * scale:
            raise AsymmetricInputError(
                f"asymmetry {skew:.3e} exceeds tolerance {_SYMMETRY_TOL * scale:.3e}"
            )
        sym = 0.5 * (arr + arr.T)
        sym.flags.writeable = False
        self.array = sym
        self.dim = arr.shape[0]

    def __repr__(self):
        return f"SymmetricMatrix(dim={self.dim})"

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.array))


def symmetric(entries) -> SymmetricMatrix:
    """Coerce an array (or SymmetricMatrix) to SymmetricMatrix."""
    if isinstance(entries, SymmetricMatrix):
        return entries
    return SymmetricMatrix(entries)


def _as_array(M) -> np.ndarray:
    if isinstance(M, SymmetricMatrix):
        return M.array
    return symmetric(M).array


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray


def eigendecompose(M) -> EigenSystem:
    """Full symmetric eigendecomposition with ascending eigenvalue order.

    The reconstruction U diag(w) U^T agrees with the input to
    1e-10 * (1 + ||M||_F); deterministic for bitwise-identical inputs.
    """
    arr = _as_array(M)
    w, U = np.linalg.eigh(arr)
    w.flags.writeable = False
    U.flags.writeable = False
    return EigenSystem(values=w, vectors=U)


def min_eigenvalue(M) -> float:
    arr = _as_array(M)
    return float(np.linalg.eigvalsh(arr)[0])


def max_eigenvalue(M) -> float:
    arr = _as_array(M)
    return float(np.linalg.eigvalsh(arr)[-1])


def is_psd(M, tol: float = DEFAULT_PSD_TOL) -> bool:
    """M >= 0 in the Loewner order, up to tol * (1 + ||M||_F)."""
    arr = _as_array(M)
    scale = 1.0 + np.linalg.norm(arr)
    return float(np.linalg.eigvalsh(arr)[0]) >= -tol * scale


def loewner_geq(A, B, tol: float = DEFAULT_PSD_TOL) -> bool:
    """A >= B in the Loewner order: lambda_min(A - B) >= -tol * (1 + ||A-B||_F)."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    a = _as_array(A)
    b = _as_array(B)
    if a.shape != b.shape:
        raise DimMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    return is_psd(SymmetricMatrix(a - b), tol)


def check_weyl_bound(A, B, i: int, j: int) -> bool:
    """Weyl bound lambda_{i-j+1}(A) + lambda_j(B) <= lambda_i(A+B).

    Indices are 1-based with 1 <= j <= i <= p.  Used as a test oracle; the
    comparison carries a 1e-9 relative slack for eigensolver round-off.
    """
    a = _as_array(A)
    b = _as_array(B)
    if a.shape != b.shape:
        raise DimMismatchError(f"shape mismatch {a.shape} vs {b.shape}")
    p = a.shape[0]
    if not (1 <= j <= i <= p):
        raise IndexOutOfRangeError(f"need 1 <= j <= i <= p, got i={i}, j={j}, p={p}")
    wa = np.linalg.eigvalsh(a)
    wb = np.linalg.eigvalsh(b)
    wab = np.linalg.eigvalsh(a + b)
    scale = 1.0 + np.linalg.norm(a) + np.linalg.norm(b)
    return wa[i - j] + wb[j - 1] <= wab[i - 1] + 1e-9 * scale


@dataclass(frozen=True)
class ConvexityVerdict:
    """Outcome of sampled matrix-convexity testing.

    ``counterexample`` is a (x, y, theta) triple when a sampled violation of
    H(theta x + (1-theta) y) <= theta H(x) + (1-theta) H(y) was found.
    """

    passed: bool
    counterexample: Optional[Tuple[np.ndarray, np.ndarray, float]] = None
    worst_violation: float = 0.0

    def __bool__(self):
        return self.passed


def sample_matrix_convexity(
    H: Callable[[np.ndarray], SymmetricMatrix],
    box: Tuple[np.ndarray, np.ndarray],
    samples: int = 200,
    tol: float = DEFAULT_PSD_TOL,
    seed: int = 0,
) -> ConvexityVerdict:
    """Sampled check that H is matrix convex on an axis-aligned box.

    Matrix convexity requires, for all x, y and theta in [0, 1],

        H(theta x + (1-theta) y)  <=  theta H(x) + (1-theta) H(y)

    in the Loewner order.  Triples (x, y, theta) are drawn from a seeded
    generator so the verdict is reproducible; a violation larger than
    tol * (1 + scale) yields a counterexample.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError("box must be nondegenerate with lo < hi componentwise")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(lo, hi)
        y = rng.uniform(lo, hi)
        theta = float(rng.uniform(0.0, 1.0))
        Hx = _as_array(H(x))
        Hy = _as_array(H(y))
        Hm = _as_array(H(theta * x + (1.0 - theta) * y))
        if not (np.all(np.isfinite(Hx)) and np.all(np.isfinite(Hy)) and np.all(np.isfinite(Hm))):
            raise NonFiniteError("H returned non-finite entries")
        gap = theta * Hx + (1.0 - theta) * Hy - Hm
        lam = float(np.linalg.eigvalsh(gap)[0])
        scale = 1.0 + np.linalg.norm(gap)
        violation = max(0.0, -lam)
        worst = max(worst, violation)
        if lam < -tol * scale:
            return ConvexityVerdict(False, (x, y, theta), violation)
    return ConvexityVerdict(True, None, worst)


def sample_matrix_concavity(H, box, samples=200, tol=DEFAULT_PSD_TOL, seed=0) -> ConvexityVerdict:
    """Sampled matrix concavity: convexity of -H."""

    def neg(x):
        return SymmetricMatrix(-_as_array(H(x)))

    return sample_matrix_convexity(neg, box, samples=samples, tol=tol, seed=seed)
