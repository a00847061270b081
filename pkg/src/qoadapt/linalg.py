"""Dense linear-algebra kernels shared by the factorization and adaptivity modules.

Matrices and vectors are plain float64 numpy arrays.  Singular spectra are
returned as descending 1-D arrays.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, solve_triangular
from scipy.sparse.linalg import LinearOperator, svds

__all__ = [
    "SingularMinorError",
    "NotSpdError",
    "SpdFactor",
    "singular_values",
    "schatten_norm",
    "spectral_norm",
    "operator_spectral_norm",
    "inverse_spectral_norm",
    "triu",
    "tril_strict",
    "lu_normalized",
    "spd_factor",
    "spd_solve",
    "dual_norm",
    "gram_orthonormalize",
    "fit_exponent",
]

# Dense SVD below this size; Lanczos (ARPACK) above.
_DENSE_SVD_LIMIT = 512
# Fixed seed for iterative-solver start vectors: results must be reproducible.
_START_VECTOR_SEED = 1234


class SingularMinorError(ValueError):
    """A leading principal minor is (numerically) singular.

    ``index`` is 1-based for entrywise factorizations (order of the offending
    minor) and 0-based for block factorizations (offending block), matching
    the usual conventions for the two.
    """

    def __init__(self, index: int, message: str):
        super().__init__(message)
        self.index = index


class NotSpdError(ValueError):
    """Matrix is not symmetric positive definite."""


def _as_matrix(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _require_square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def singular_values(a) -> np.ndarray:
    """All min(rows, cols) singular values of ``a`` in descending order."""
    a = _as_matrix(a)
    if min(a.shape) == 0:
        return np.zeros(0)
    return np.linalg.svd(a, compute_uv=False)


def schatten_norm(a, p) -> float:
    """Schatten p-norm (l_p norm of the singular values), p in {1, 2, 4, inf}.

    p=2 is the Frobenius norm and p=inf the spectral norm.
    """
    a = _as_matrix(a)
    if p == 2:
        return float(np.linalg.norm(a))
    if p in (1, 4):
        s = singular_values(a)
        return float(np.sum(s ** p) ** (1.0 / p))
    if p == math.inf:
        return spectral_norm(a)
    raise ValueError(f"unsupported Schatten order {p!r}; use 1, 2, 4 or inf")


def spectral_norm(a, tol: float = 1e-10) -> float:
    """Largest singular value; dense SVD at small sizes, Lanczos beyond."""
    a = _as_matrix(a)
    if min(a.shape) == 0:
        return 0.0
    if max(a.shape) <= _DENSE_SVD_LIMIT:
        return float(np.linalg.svd(a, compute_uv=False)[0])
    return operator_spectral_norm(a.shape, lambda x: a @ x, lambda x: a.T @ x, tol=tol)


def operator_spectral_norm(
    shape: tuple[int, int],
    matvec: Callable[[np.ndarray], np.ndarray],
    rmatvec: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-10,
) -> float:
    """Largest singular value of a matrix-free operator via Lanczos.

    The start vector is fixed-seeded so repeated runs give identical results.
    """
    m, n = shape
    k = min(m, n)
    if k < 4:
        # Too small for ARPACK; materialize the operator instead.
        cols = [np.asarray(matvec(e)) for e in np.eye(n)]
        dense = np.column_stack(cols) if cols else np.zeros((m, 0))
        return 0.0 if dense.size == 0 else float(np.linalg.svd(dense, compute_uv=False)[0])
    op = LinearOperator((m, n), matvec=matvec, rmatvec=rmatvec, dtype=float)
    v0 = np.random.default_rng(_START_VECTOR_SEED).standard_normal(k)
    s = svds(op, k=1, v0=v0, tol=tol, return_singular_vectors=False)
    return float(s[0])


def inverse_spectral_norm(a, tol: float = 1e-10) -> float:
    """Spectral norm of a^-1 without forming the inverse (LU solves as matvecs)."""
    a = _require_square(_as_matrix(a))
    n = a.shape[0]
    if n <= _DENSE_SVD_LIMIT:
        return float(np.linalg.svd(np.linalg.inv(a), compute_uv=False)[0])
    lu_piv = lu_factor(a)
    return operator_spectral_norm(
        (n, n),
        lambda x: lu_solve(lu_piv, x),
        lambda x: lu_solve(lu_piv, x, trans=1),
        tol=tol,
    )


def triu(m) -> np.ndarray:
    """Upper-triangular truncation: keep entries with i <= j, zero the rest."""
    m = _require_square(_as_matrix(m))
    return np.triu(m)


def tril_strict(m) -> np.ndarray:
    """Strictly lower-triangular part, the complement of :func:`triu`."""
    m = _require_square(_as_matrix(m))
    return m - np.triu(m)


def lu_normalized(m) -> tuple[np.ndarray, np.ndarray]:
    """Normalized LU factorization M = LU with unit diagonal on L.

    No pivoting: the factorization exists iff every leading principal minor is
    invertible, and row exchanges would break the column identities the
    factor-growth analysis relies on.  Pivots below 1e-14 * max|M| raise
    :class:`SingularMinorError` with the 1-based order of the offending minor.
    """
    a = np.array(_require_square(_as_matrix(m)), dtype=float)
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 0))
    threshold = 1e-14 * float(np.max(np.abs(a)))
    panel = 64
    for k0 in range(0, n, panel):
        k1 = min(k0 + panel, n)
        for k in range(k0, k1):
            piv = a[k, k]
            if abs(piv) <= threshold:
                raise SingularMinorError(
                    k + 1, f"singular leading principal minor of order {k + 1}"
                )
            if k + 1 < n:
                a[k + 1 :, k] /= piv
                a[k + 1 :, k + 1 : k1] -= np.outer(a[k + 1 :, k], a[k, k + 1 : k1])
        if k1 < n:
            a[k0:k1, k1:] = solve_triangular(
                a[k0:k1, k0:k1], a[k0:k1, k1:], lower=True, unit_diagonal=True
            )
            a[k1:, k1:] -= a[k1:, k0:k1] @ a[k0:k1, k1:]
    lower = np.tril(a, -1) + np.eye(n)
    upper = np.triu(a)
    return lower, upper


class SpdFactor:
    """Immutable Cholesky handle for an SPD matrix; safe to share across threads."""

    __slots__ = ("matrix", "_cho")

    def __init__(self, matrix: np.ndarray, cho):
        self.matrix = matrix
        self._cho = cho

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: matrix is {self.n}, rhs is {b.shape[0]}")
        return cho_solve(self._cho, b)


def spd_factor(g) -> SpdFactor:
    """Factor a symmetric positive definite matrix for repeated solves."""
    g = _require_square(_as_matrix(g, "gram matrix"))
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if g.size and float(np.max(np.abs(g - g.T))) > 1e-12 * max(scale, 1e-300):
        raise NotSpdError("matrix is not symmetric within 1e-12 relative")
    sym = 0.5 * (g + g.T)
    try:
        cho = cho_factor(sym, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError(f"matrix is not positive definite: {exc}") from exc
    return SpdFactor(sym, cho)


def spd_solve(factor: SpdFactor, b) -> np.ndarray:
    """Solve G x = b for a factored SPD matrix G."""
    return factor.solve(b)


def dual_norm(factor: SpdFactor, w) -> float:
    """sqrt(w^T G^-1 w): the norm of the functional w in the G-dual pairing."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.shape[0] != factor.n:
        raise ValueError(f"dimension mismatch: matrix is {factor.n}, vector is {w.shape}")
    return math.sqrt(max(float(w @ factor.solve(w)), 0.0))


def _mgs_columns(
    v: np.ndarray, factor: SpdFactor, rank_tol: float, base: list[np.ndarray]
) -> list[np.ndarray]:
    """MGS sweep of the columns of ``v`` against ``base`` plus already-kept columns.

    A column counts as linearly dependent (and is dropped) when its G-norm
    after projection falls below ``rank_tol`` times its original G-norm.
    Returns only the newly accepted G-orthonormal columns.
    """
    gm = factor.matrix
    kept: list[np.ndarray] = []
    for j in range(v.shape[1]):
        w = v[:, j].copy()
        norm0 = math.sqrt(max(float(w @ gm @ w), 0.0))
        if norm0 == 0.0:
            continue
        for _ in range(2):
            gw = gm @ w
            for q in base:
                w = w - q * float(q @ gw)
                gw = gm @ w
            for q in kept:
                w = w - q * float(q @ gw)
                gw = gm @ w
        norm = math.sqrt(max(float(w @ gm @ w), 0.0))
        if norm < rank_tol * norm0:
            continue
        kept.append(w / norm)
    return kept


def gram_orthonormalize(
    v, factor: SpdFactor, rank_tol: float = 1e-8
) -> tuple[np.ndarray, int]:
    """Orthonormalize the columns of ``v`` in the inner product of ``factor``.

    Modified Gram-Schmidt with one re-orthogonalization pass.  Columns whose
    G-norm after projection drops below ``rank_tol`` times their original
    G-norm are treated as linearly dependent and dropped.  Returns (Q, rank)
    with Q^T G Q = I.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 2:
        raise ValueError("column matrix must be 2-D")
    if v.shape[0] != factor.n:
        raise ValueError(f"dimension mismatch: matrix is {factor.n}, columns are {v.shape[0]}")
    kept = _mgs_columns(v, factor, rank_tol, base=[])
    q = np.column_stack(kept) if kept else np.zeros((v.shape[0], 0))
    return q, len(kept)


def fit_exponent(samples: Iterable[Sequence[float]]) -> float:
    """Least-squares slope of log y versus log n for samples (n, y)."""
    pts = [(float(n), float(y)) for n, y in samples]
    if len(pts) < 2:
        raise ValueError("need at least two samples to fit an exponent")
    if any(n <= 0 or y <= 0 for n, y in pts):
        raise ValueError("samples must be strictly positive for a log-log fit")
    log_n = np.log([n for n, _ in pts])
    log_y = np.log([y for _, y in pts])
    return float(np.polyfit(log_n, log_y, 1)[0])
