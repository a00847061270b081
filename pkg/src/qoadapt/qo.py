"""Quasi-orthogonality analysis of nested Galerkin hierarchies.

Builds a blockwise orthonormal basis for a sequence of nested trial/test
spaces, assembles the bilinear form in that basis, and compares the measured
summed-increment ratios against the factorization-based bound
(C_a^2/gamma^2) |U|^2 max_k |U^-1(:,k)|^2.  The linear-convergence helper
turns a growth sequence C(N) into the contraction pair (q, C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .blocklu import (
    BlockMatrix,
    BlockStructure,
    block_lu,
    stability_estimate,
    u_inverse_columns,
)
from .linalg import (
    SingularMinorError,
    SpdFactor,
    _mgs_columns,
    gram_orthonormalize,
    spd_factor,
    spectral_norm,
)

__all__ = [
    "NestingError",
    "SpaceHierarchy",
    "HierarchicalBasis",
    "LinearConvergence",
    "QoReport",
    "build_hierarchical_basis",
    "assemble_m",
    "galerkin_sequence",
    "qo_bound",
    "qo_empirical",
    "linear_convergence_params",
    "analyze_hierarchy",
]


class NestingError(ValueError):
    """The supplied spaces are not nested (or a complement is rank deficient)."""


@dataclass(frozen=True)
class SpaceHierarchy:
    """Nested trial/test spaces with their ambient Gram matrices and bilinear form.

    ``form`` realizes a(u, v) = y^T form x for coefficient vectors x (trial)
    and y (test); ``rhs`` realizes f(v) = rhs^T y.  ``x_spaces[j]`` holds the
    columns spanning trial space j in ambient coordinates, and the spans must
    grow with j; ``y_spaces`` mirrors this for the test spaces with matching
    ranks per level.
    """

    gram_x: np.ndarray
    gram_y: np.ndarray
    form: np.ndarray
    rhs: np.ndarray
    x_spaces: tuple[np.ndarray, ...]
    y_spaces: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "gram_x", np.asarray(self.gram_x, dtype=float))
        object.__setattr__(self, "gram_y", np.asarray(self.gram_y, dtype=float))
        object.__setattr__(self, "form", np.asarray(self.form, dtype=float))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "x_spaces", tuple(np.asarray(v, dtype=float) for v in self.x_spaces))
        object.__setattr__(self, "y_spaces", tuple(np.asarray(v, dtype=float) for v in self.y_spaces))
        if len(self.x_spaces) != len(self.y_spaces):
            raise ValueError("x_spaces and y_spaces must have the same number of levels")
        if not self.x_spaces:
            raise ValueError("hierarchy needs at least one level")
        dx, dy = self.gram_x.shape[0], self.gram_y.shape[0]
        if self.form.shape != (dy, dx):
            raise ValueError(f"form shape {self.form.shape} does not match grams ({dy}, {dx})")
        if self.rhs.shape != (dy,):
            raise ValueError(f"rhs shape {self.rhs.shape} does not match test dimension {dy}")

    @property
    def levels(self) -> int:
        return len(self.x_spaces)

    def verify_nesting(self, tol: float = 1e-8) -> None:
        """Check span(spaces[j]) is contained in span(spaces[j+1]) via least squares."""
        for name, spaces in (("x", self.x_spaces), ("y", self.y_spaces)):
            for j in range(len(spaces) - 1):
                v, w = spaces[j], spaces[j + 1]
                coeff, *_ = np.linalg.lstsq(w, v, rcond=None)
                scale = np.linalg.norm(v)
                residual = np.linalg.norm(w @ coeff - v) / max(scale, 1e-300)
                if residual > tol:
                    raise NestingError(
                        f"{name}_spaces[{j}] is not contained in {name}_spaces[{j + 1}]: "
                        f"projection residual {residual:.3e}"
                    )


@dataclass(frozen=True)
class HierarchicalBasis:
    """Blockwise orthonormal bases: block j spans the new directions of level j."""

    basis_x: np.ndarray
    basis_y: np.ndarray
    structure: BlockStructure


def _nested_basis(
    spaces: Sequence[np.ndarray], factor: SpdFactor, rank_tol: float, name: str
) -> tuple[np.ndarray, list[int]]:
    kept: list[np.ndarray] = []
    boundaries = [0]
    prev_rank = 0
    for j, v in enumerate(spaces):
        _, rank_j = gram_orthonormalize(v, factor, rank_tol)
        new = _mgs_columns(v, factor, rank_tol, base=kept)
        if len(new) != rank_j - prev_rank:
            raise NestingError(
                f"complement of {name}-level {j - 1} inside level {j} has rank "
                f"{len(new)}, expected {rank_j - prev_rank}"
            )
        if not new:
            raise NestingError(f"{name}-level {j} adds no new directions")
        kept.extend(new)
        prev_rank = rank_j
        boundaries.append(prev_rank)
    return np.column_stack(kept), boundaries


def build_hierarchical_basis(h: SpaceHierarchy, rank_tol: float = 1e-8) -> HierarchicalBasis:
    """Orthonormal basis ordered blockwise: level-0 span, then each new complement.

    Block j of the trial basis spans the G_X-orthogonal complement of level
    j-1 inside level j (and analogously for the test basis with G_Y).  Raises
    :class:`NestingError` when the spaces are not nested or the X/Y ranks
    disagree on some level.
    """
    h.verify_nesting()
    gx = spd_factor(h.gram_x)
    gy = spd_factor(h.gram_y)
    basis_x, bounds_x = _nested_basis(h.x_spaces, gx, rank_tol, "x")
    basis_y, bounds_y = _nested_basis(h.y_spaces, gy, rank_tol, "y")
    if bounds_x != bounds_y:
        raise NestingError(
            f"trial and test hierarchies have different block sizes: {bounds_x} vs {bounds_y}"
        )
    return HierarchicalBasis(basis_x, basis_y, BlockStructure(tuple(bounds_x)))


def assemble_m(h: SpaceHierarchy, b: HierarchicalBasis) -> BlockMatrix:
    """The bilinear form in the orthonormal bases: rows test, columns trial."""
    if b.basis_x.shape[0] != h.form.shape[1] or b.basis_y.shape[0] != h.form.shape[0]:
        raise ValueError("basis dimensions do not match the form")
    return BlockMatrix(b.basis_y.T @ h.form @ b.basis_x, b.structure)


def galerkin_sequence(h: SpaceHierarchy, b: HierarchicalBasis) -> list[np.ndarray]:
    """Coefficients of the level-k Galerkin solutions: M[k] lambda(k) = F[k]."""
    m = assemble_m(h, b)
    f = b.basis_y.T @ h.rhs
    out = []
    for k in range(b.structure.m):
        nk = b.structure.boundaries[k + 1]
        try:
            out.append(np.linalg.solve(m.data[:nk, :nk], f[:nk]))
        except np.linalg.LinAlgError as exc:
            raise SingularMinorError(k, f"singular Galerkin system at level {k}") from exc
    return out


def qo_bound(m: BlockMatrix) -> float:
    """Factorization bound (C_a^2/gamma^2) |U|^2 max_k |U^-1(:,k)|^2.

    C_a and gamma are measured from the matrix itself (spectral norm and
    minimal principal-submatrix singular value).
    """
    est = stability_estimate(m)
    factors = block_lu(m)
    u_norm = spectral_norm(factors.u)
    col_max = float(np.max(u_inverse_columns(m)))
    return (est.c_a_hat**2 / est.gamma_hat**2) * u_norm**2 * col_max**2


def _pad(vec: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros(dim)
    out[: vec.shape[0]] = vec
    return out


def qo_empirical(
    h: SpaceHierarchy,
    b: HierarchicalBasis,
    lambdas: Sequence[np.ndarray],
    reference: np.ndarray,
) -> np.ndarray:
    """Measured ratios sum_{k=l}^{l+N} |u_{k+1}-u_k|^2 / |u_ref - u_l|^2.

    Norms are Euclidean on the orthonormal coefficients, which is exactly the
    trial-space norm.  Entry [l, N] is NaN when it is out of range or the
    denominator vanishes (flagged rather than divided).
    """
    levels = len(lambdas)
    if levels < 2:
        raise ValueError("need at least two levels for increment ratios")
    dim = int(np.asarray(reference).shape[0])
    padded = [_pad(np.asarray(lam, dtype=float), dim) for lam in lambdas]
    ref = np.asarray(reference, dtype=float)
    increments = [
        float(np.sum((padded[k + 1] - padded[k]) ** 2)) for k in range(levels - 1)
    ]
    table = np.full((levels - 1, levels - 1), np.nan)
    for ell in range(levels - 1):
        den = float(np.sum((ref - padded[ell]) ** 2))
        run = 0.0
        for nn in range(levels - 1 - ell):
            run += increments[ell + nn]
            table[ell, nn] = run / den if den > 0.0 else np.nan
    return table


@dataclass(frozen=True)
class LinearConvergence:
    """Summed-estimator bound D(N) and the contraction constants derived from it."""

    d_of_n: np.ndarray
    n0: int | None
    q_log: float | None
    q: float | None
    c_lin: float | None


def linear_convergence_params(
    c_of_n: Sequence[float],
    kappa: float,
    c_est: float,
    c_rel: float,
    c_mon: float,
    n_max: int | None = None,
) -> LinearConvergence:
    """Turn a quasi-orthogonality growth sequence into contraction constants.

    D(N) = 1 + (kappa + C_est C(N-1) C_rel^2) / (1 - kappa) for N >= 1.  The
    smallest N0 with q_log = log D(N0) - sum_{j<=N0} 1/D(j) < 0 yields
    q = exp(q_log / N0) < 1 and C = C_mon exp(-q_log); if no N0 up to n_max
    qualifies, the contraction fields are reported as None.
    """
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    if min(c_est, c_rel, c_mon) <= 0.0:
        raise ValueError("constants c_est, c_rel, c_mon must be positive")
    c_seq = [float(c) for c in c_of_n]
    if not c_seq:
        raise ValueError("need at least one C(N) value")
    limit = len(c_seq) if n_max is None else min(int(n_max), len(c_seq))
    d = np.array(
        [1.0 + (kappa + c_est * c_seq[i] * c_rel**2) / (1.0 - kappa) for i in range(limit)]
    )
    inv_sum = 0.0
    for n0 in range(1, limit + 1):
        inv_sum += 1.0 / d[n0 - 1]
        q_log = math.log(d[n0 - 1]) - inv_sum
        if q_log < 0.0:
            return LinearConvergence(
                d_of_n=d,
                n0=n0,
                q_log=q_log,
                q=math.exp(q_log / n0),
                c_lin=c_mon * math.exp(-q_log),
            )
    return LinearConvergence(d_of_n=d, n0=None, q_log=None, q=None, c_lin=None)


@dataclass(frozen=True)
class QoReport:
    """Everything the quasi-orthogonality analysis measures on one hierarchy."""

    c_a_hat: float
    gamma_hat: float
    u_norm: float
    u_inv_col_max: float
    c_bound: float
    c_empirical: np.ndarray
    c_of_n: np.ndarray
    d_of_n: np.ndarray
    n0: int | None
    q_log: float | None
    q: float | None
    c_lin: float | None
    structure: BlockStructure


def analyze_hierarchy(
    h: SpaceHierarchy,
    rank_tol: float = 1e-8,
    kappa: float = 0.5,
    c_est: float = 1.0,
    c_rel: float = 1.0,
    c_mon: float = 1.0,
    n_max: int | None = None,
) -> QoReport:
    """Full pipeline: basis, matrix, bound, empirical table, contraction constants.

    The exact solution is replaced by the finest-level Galerkin solution, so
    the empirical table is valid for windows ending strictly below the finest
    level.  C(N) is reported as the maximum of the table over the start level.
    """
    basis = build_hierarchical_basis(h, rank_tol)
    m = assemble_m(h, basis)
    est = stability_estimate(m)
    factors = block_lu(m)
    u_norm = spectral_norm(factors.u)
    col_norms = u_inverse_columns(m)
    col_max = float(np.max(col_norms))
    bound = (est.c_a_hat**2 / est.gamma_hat**2) * u_norm**2 * col_max**2
    lambdas = galerkin_sequence(h, basis)
    reference = _pad(lambdas[-1], basis.structure.n)
    table = qo_empirical(h, basis, lambdas, reference)
    with np.errstate(invalid="ignore"):
        c_of_n = np.nanmax(table, axis=0)
    valid = ~np.isnan(c_of_n)
    c_valid = c_of_n[valid] if np.any(valid) else np.array([1.0])
    lin = linear_convergence_params(c_valid, kappa, c_est, c_rel, c_mon, n_max)
    return QoReport(
        c_a_hat=est.c_a_hat,
        gamma_hat=est.gamma_hat,
        u_norm=u_norm,
        u_inv_col_max=col_max,
        c_bound=bound,
        c_empirical=table,
        c_of_n=c_of_n,
        d_of_n=lin.d_of_n,
        n0=lin.n0,
        q_log=lin.q_log,
        q=lin.q,
        c_lin=lin.c_lin,
        structure=basis.structure,
    )
