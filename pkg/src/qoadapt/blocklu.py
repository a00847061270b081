"""Block matrices, normalized block-LU factorization, and factor-growth diagnostics.

A block structure is a strictly increasing list of boundaries 0 = n_0 < n_1 <
... < n_m partitioning the index range of a square matrix.  The block-LU
factors satisfy M = LU with identity diagonal blocks on L; no pivoting is
performed anywhere, since the column identity U^-1(0:j, j) = M[j]^-1(0:j, j)
requires the natural ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .linalg import (
    SingularMinorError,
    fit_exponent,
    inverse_spectral_norm,
    lu_normalized,
    schatten_norm,
    spectral_norm,
)

__all__ = [
    "BlockStructure",
    "BlockMatrix",
    "BlockLuFactors",
    "StabilityEstimate",
    "NoContractionError",
    "NeumannTruncationWarning",
    "block_lu",
    "block_triu",
    "stability_estimate",
    "u_inverse_columns",
    "a_star_direct",
    "a_star_recursive",
    "u_inverse_neumann",
    "bsnorm_2",
    "bsnorm_upper",
    "bsnorm_sample_lower",
    "hilbert_modified",
    "GrowthRow",
    "GrowthResult",
    "growth_experiment",
]


class NoContractionError(ValueError):
    """The Neumann iteration for U^-1 has no contraction for the given scaling."""


class NeumannTruncationWarning(UserWarning):
    """Neumann series stopped at the iteration cap before reaching tolerance."""


@dataclass(frozen=True)
class BlockStructure:
    """Boundaries 0 = n_0 < n_1 < ... < n_m of a block partition."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 2:
            raise ValueError("block structure needs at least one block")
        if b[0] != 0:
            raise ValueError("block structure must start at 0")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("block boundaries must be strictly increasing")

    @classmethod
    def uniform(cls, n: int, block_size: int) -> "BlockStructure":
        if block_size < 1 or n % block_size != 0:
            raise ValueError(f"size {n} is not a multiple of block size {block_size}")
        return cls(tuple(range(0, n + 1, block_size)))

    @property
    def m(self) -> int:
        """Number of blocks."""
        return len(self.boundaries) - 1

    @property
    def n(self) -> int:
        """Total side length."""
        return self.boundaries[-1]

    def block_slice(self, j: int) -> slice:
        return slice(self.boundaries[j], self.boundaries[j + 1])

    def index_map(self) -> np.ndarray:
        """Block index of every scalar index."""
        sizes = np.diff(self.boundaries)
        return np.repeat(np.arange(self.m), sizes)


@dataclass(frozen=True)
class BlockMatrix:
    """A square matrix together with a block structure."""

    data: np.ndarray
    structure: BlockStructure

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ValueError(f"block matrix data must be square, got {data.shape}")
        if data.shape[0] != self.structure.n:
            raise ValueError(
                f"matrix side {data.shape[0]} does not match block boundaries "
                f"(last boundary {self.structure.n})"
            )

    def principal(self, k: int) -> np.ndarray:
        """Leading principal submatrix M[k] spanning blocks 0..k."""
        end = self.structure.boundaries[k + 1]
        return self.data[:end, :end]


@dataclass(frozen=True)
class BlockLuFactors:
    l: np.ndarray
    u: np.ndarray
    structure: BlockStructure


@dataclass(frozen=True)
class StabilityEstimate:
    """Measured boundedness and inf-sup proxies of a block matrix.

    c_a_hat is the spectral norm, gamma_hat the smallest singular value over
    all leading principal (block) submatrices.
    """

    c_a_hat: float
    gamma_hat: float
    near_singular: bool = field(default=False)


def _smallest_singular_value(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[-1])


def block_lu(m: BlockMatrix) -> BlockLuFactors:
    """Normalized block-LU factorization by block forward elimination.

    Diagonal Schur blocks are inverted with dense solves.  A Schur block whose
    smallest singular value falls below 1e-12 * max|M| flags the (0-based)
    block index of the first singular principal submatrix.
    """
    bs = m.structure
    a = m.data.copy()
    n = bs.n
    threshold = 1e-12 * (float(np.max(np.abs(a))) if a.size else 0.0)
    for k in range(bs.m):
        s = bs.block_slice(k)
        diag = a[s, s]
        if _smallest_singular_value(diag) <= threshold:
            raise SingularMinorError(k, f"singular leading principal block submatrix M[{k}]")
        rest = slice(bs.boundaries[k + 1], n)
        if rest.start < n:
            lcol = np.linalg.solve(diag.T, a[rest, s].T).T
            a[rest, s] = lcol
            a[rest, rest] -= lcol @ a[s, rest]
    bi = bs.index_map()
    lower_mask = bi[:, None] > bi[None, :]
    lower = np.where(lower_mask, a, 0.0) + np.eye(n)
    upper = np.where(~lower_mask, a, 0.0)
    return BlockLuFactors(lower, upper, bs)


def _block_upper(a: np.ndarray, bs: BlockStructure) -> np.ndarray:
    bi = bs.index_map()
    return np.where(bi[:, None] <= bi[None, :], a, 0.0)


def block_triu(m: BlockMatrix) -> BlockMatrix:
    """Block-triangular truncation: keep blocks with i <= j, zero the rest."""
    return BlockMatrix(_block_upper(m.data, m.structure), m.structure)


def stability_estimate(m: BlockMatrix) -> StabilityEstimate:
    """Spectral norm and minimal principal-submatrix singular value of M.

    Computes an SVD per leading principal submatrix; intended for the desk
    scale at which the quasi-orthogonality analysis operates.
    """
    c_a = spectral_norm(m.data)
    gamma = min(_smallest_singular_value(m.principal(k)) for k in range(m.structure.m))
    return StabilityEstimate(c_a, gamma, near_singular=gamma < 1e-12 * c_a)


def u_inverse_columns(m: BlockMatrix) -> np.ndarray:
    """Spectral norms of the block columns of U^-1, computed without U.

    Block column j of U^-1 equals the last block column of M[j]^-1, so each
    column only needs one dense solve with the principal submatrix.
    """
    bs = m.structure
    norms = np.zeros(bs.m)
    for j in range(bs.m):
        p = m.principal(j)
        lo, hi = bs.boundaries[j], bs.boundaries[j + 1]
        rhs = np.eye(hi)[:, lo:hi]
        try:
            col = np.linalg.solve(p, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularMinorError(j, f"singular principal block submatrix M[{j}]") from exc
        norms[j] = spectral_norm(col)
    return norms


def a_star_direct(a: BlockMatrix, k: int) -> BlockMatrix:
    """Block-column-wise powers of I - A[j] A[j]^T, kept above the block diagonal."""
    if k < 1:
        raise ValueError("power must be >= 1")
    bs = a.structure
    out = np.zeros_like(a.data)
    for j in range(bs.m):
        hi = bs.boundaries[j + 1]
        aj = a.data[:hi, :hi]
        pk = np.linalg.matrix_power(np.eye(hi) - aj @ aj.T, k)
        out[:hi, bs.boundaries[j] : hi] = pk[:, bs.boundaries[j] : hi]
    return BlockMatrix(out, bs)


def _a_star_first(ad: np.ndarray, bs: BlockStructure) -> np.ndarray:
    return np.eye(bs.n) - _block_upper(ad @ _block_upper(ad.T, bs), bs)


def _a_star_next(ad: np.ndarray, bs: BlockStructure, prev: np.ndarray) -> np.ndarray:
    return prev - _block_upper(ad @ _block_upper(ad.T @ prev, bs), bs)


def a_star_recursive(a: BlockMatrix, k: int) -> BlockMatrix:
    """Same quantity as :func:`a_star_direct`, via the truncated-product recursion."""
    if k < 1:
        raise ValueError("power must be >= 1")
    bs = a.structure
    term = _a_star_first(a.data, bs)
    for _ in range(k - 1):
        term = _a_star_next(a.data, bs, term)
    return BlockMatrix(term, bs)


def u_inverse_neumann(
    m: BlockMatrix,
    tol: float = 1e-12,
    k_max: int = 500,
    alpha: float | None = None,
) -> np.ndarray:
    """U^-1 through the truncated Neumann series U^-1 = alpha * triu_b(M^T (I + sum A*^k)).

    The scaling defaults to alpha = gamma^2 / C^4 with (C, gamma) measured
    from the matrix, which makes every I - alpha M[j] M[j]^T a contraction
    with factor at most sqrt(1 - gamma^4/C^4).  Terms are summed until their
    spectral norm drops below ``tol`` or ``k_max`` terms are reached; hitting
    the cap emits :class:`NeumannTruncationWarning` with the residual norm.
    """
    est = stability_estimate(m)
    if est.gamma_hat <= 0.0:
        raise NoContractionError("matrix has a singular principal submatrix")
    if alpha is None:
        alpha = est.gamma_hat**2 / est.c_a_hat**4
    bs = m.structure
    contraction = max(
        spectral_norm(np.eye(bs.boundaries[j + 1]) - alpha * (m.principal(j) @ m.principal(j).T))
        for j in range(bs.m)
    )
    if contraction >= 1.0 - 1e-12:
        raise NoContractionError(
            f"no contraction: max_j |I - alpha M[j] M[j]^T| = {contraction:.17g}"
        )
    ad = math.sqrt(alpha) * m.data
    total = np.eye(bs.n)
    term = _a_star_first(ad, bs)
    residual = spectral_norm(term)
    terms_used = 0
    while residual >= tol and terms_used < k_max:
        total += term
        term = _a_star_next(ad, bs, term)
        residual = spectral_norm(term)
        terms_used += 1
    if residual >= tol:
        warnings.warn(
            f"Neumann series truncated after {k_max} terms; last term norm {residual:.3e}",
            NeumannTruncationWarning,
            stacklevel=2,
        )
    return alpha * _block_upper(m.data.T @ total, bs)


def bsnorm_2(a, bs: BlockStructure) -> float:
    """Exact block-column norm at p = 2: sqrt(sum_j sigma_max(A(:, block j))^2)."""
    a = np.asarray(a, dtype=float)
    total = 0.0
    for j in range(bs.m):
        total += spectral_norm(a[:, bs.block_slice(j)]) ** 2
    return math.sqrt(total)


def bsnorm_upper(a, bs: BlockStructure, p) -> float:
    """Analytic upper bound m^(1/p) * |A| for the block norm at order p."""
    a = np.asarray(a, dtype=float)
    if p == math.inf:
        return spectral_norm(a)
    return bs.m ** (1.0 / p) * spectral_norm(a)


def bsnorm_sample_lower(a, bs: BlockStructure, p, samples: int, seed: int) -> float:
    """Monte-Carlo lower bound for the block norm: max |A X|_p over random X.

    Each sampled X carries one random unit column per block, which is exactly
    the admissible set of the supremum, so every sample gives a valid lower
    bound.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    a = np.asarray(a, dtype=float)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        x = np.zeros((bs.n, bs.m))
        for j in range(bs.m):
            v = rng.standard_normal(bs.boundaries[j + 1] - bs.boundaries[j])
            norm = np.linalg.norm(v)
            if norm == 0.0:
                v[0] = 1.0
                norm = 1.0
            x[bs.block_slice(j), j] = v / norm
        best = max(best, schatten_norm(a @ x, p))
    return best


def hilbert_modified(n: int) -> np.ndarray:
    """Unit-diagonal matrix with entries 1/(j-i+1) above and -1/(i-j+1) below.

    The off-diagonal part is skew-symmetric, so x^T M x = |x|^2 and every
    principal submatrix has smallest singular value >= 1, while the LU factors
    still grow with n.
    """
    if n < 1:
        raise ValueError("matrix size must be >= 1")
    d = np.arange(n)[None, :] - np.arange(n)[:, None]
    return np.where(d >= 0, 1.0, -1.0) / (np.abs(d) + 1.0)


@dataclass(frozen=True)
class GrowthRow:
    n: int
    l_norm: float
    u_norm: float
    l_inv_norm: float
    u_inv_norm: float
    m_norm: float


@dataclass(frozen=True)
class GrowthResult:
    rows: tuple[GrowthRow, ...]
    exponents: dict[str, float] | None

    def ratios(self, key: str) -> list[tuple[int, float]]:
        return [(r.n, getattr(r, key) / r.m_norm) for r in self.rows]


def growth_experiment(
    family: Callable[[int], np.ndarray],
    sizes: Sequence[int],
    block_size: int = 1,
) -> GrowthResult:
    """Factor-norm growth of a matrix family: |L|, |U|, |L^-1|, |U^-1| versus n.

    Exponents are least-squares log-log slopes of each factor norm divided by
    |M|, matching the normalized axes of the growth plots; they are omitted
    when fewer than two sizes are given.
    """
    sizes = [int(n) for n in sizes]
    if not sizes:
        raise ValueError("need at least one size")
    rows = []
    for n in sizes:
        if n % block_size != 0:
            raise ValueError(f"size {n} is not a multiple of block size {block_size}")
        mat = np.asarray(family(n), dtype=float)
        if mat.shape != (n, n):
            raise ValueError(f"family returned shape {mat.shape} for size {n}")
        if block_size == 1:
            lower, upper = lu_normalized(mat)
        else:
            factors = block_lu(BlockMatrix(mat, BlockStructure.uniform(n, block_size)))
            lower, upper = factors.l, factors.u
        rows.append(
            GrowthRow(
                n=n,
                l_norm=spectral_norm(lower),
                u_norm=spectral_norm(upper),
                l_inv_norm=inverse_spectral_norm(lower),
                u_inv_norm=inverse_spectral_norm(upper),
                m_norm=spectral_norm(mat),
            )
        )
    result = GrowthResult(tuple(rows), None)
    if len(rows) >= 2:
        exponents = {
            key: fit_exponent(result.ratios(key))
            for key in ("l_norm", "u_norm", "l_inv_norm", "u_inv_norm")
        }
        result = GrowthResult(tuple(rows), exponents)
    return result
