"""Generic solve -> estimate -> mark -> refine loop with Doerfler marking.

The driver is problem agnostic: anything exposing ``initial_mesh``, ``solve``,
``estimate`` and ``refine`` can be run adaptively or uniformly.  Marked sets
have minimal cardinality for the requested estimator fraction, with ties
broken by ascending element index so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Protocol, Sequence

import numpy as np

__all__ = [
    "Indicators",
    "MarkResult",
    "TraceRecord",
    "AdaptiveTrace",
    "StopRule",
    "AdaptiveProblem",
    "AdaptiveSolveError",
    "ReductionConstants",
    "dorfler_mark",
    "run_adaptive",
    "run_uniform",
    "measure_reduction_constants",
    "theta_star",
    "trace_csv_rows",
]


@dataclass(frozen=True)
class Indicators:
    """Per-element refinement indicators with the cached squared total."""

    values: np.ndarray
    total_sq: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise ValueError("indicator values must be a 1-D sequence")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("indicators must be finite and nonnegative")
        actual = float(np.sum(values**2))
        if abs(self.total_sq - actual) > 1e-12 * max(actual, 1e-300):
            raise ValueError("cached squared total is inconsistent with the values")

    @classmethod
    def from_values(cls, values) -> "Indicators":
        values = np.asarray(values, dtype=float)
        return cls(values, float(np.sum(values**2)))

    @property
    def estimator(self) -> float:
        return math.sqrt(max(self.total_sq, 0.0))


@dataclass(frozen=True)
class MarkResult:
    """Sorted marked element indices and the estimator fraction they carry."""

    marked: tuple[int, ...]
    achieved_fraction: float


@dataclass(frozen=True)
class TraceRecord:
    """One loop iteration: mesh size, estimator, indicators, marking, solution."""

    n_elements: int
    eta: float
    indicators: Indicators
    marked: tuple[int, ...]
    solution: Any
    mesh: Any


@dataclass(frozen=True)
class AdaptiveTrace:
    records: tuple[TraceRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.records])

    @property
    def element_counts(self) -> np.ndarray:
        return np.array([r.n_elements for r in self.records])


class AdaptiveSolveError(RuntimeError):
    """Solver or estimator failure; carries the trace accumulated so far."""

    def __init__(self, message: str, trace: AdaptiveTrace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class StopRule:
    """Stop criteria for the loop; at least one hard bound must be set."""

    max_iters: int | None = None
    max_elements: int | None = None
    estimator_floor: float = 0.0

    def __post_init__(self):
        if self.max_iters is None and self.max_elements is None:
            raise ValueError("set max_iters or max_elements; the loop never stops otherwise")


class AdaptiveProblem(Protocol):
    def initial_mesh(self) -> Any: ...

    def solve(self, mesh: Any) -> Any: ...

    def estimate(self, mesh: Any, solution: Any) -> Indicators: ...

    def refine(self, mesh: Any, marked: Sequence[int]) -> Any: ...


def dorfler_mark(ind: Indicators, theta: float) -> MarkResult:
    """Minimal-cardinality set carrying at least a theta fraction of the squared total.

    Indicators are sorted descending (ties by ascending index) and the
    shortest qualifying prefix is taken, which is the minimal-cardinality
    choice.  All-zero indicators are an error: the caller has converged.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError(f"marking fraction must lie in (0, 1), got {theta}")
    if ind.total_sq <= 0.0:
        raise ValueError("all indicators are zero; nothing to mark")
    order = np.argsort(-ind.values, kind="stable")
    csum = np.cumsum(ind.values[order] ** 2)
    target = theta * ind.total_sq
    count = int(np.searchsorted(csum, target)) + 1
    count = min(count, len(order))
    return MarkResult(
        marked=tuple(sorted(int(i) for i in order[:count])),
        achieved_fraction=float(csum[count - 1] / ind.total_sq),
    )


def theta_star(c_stab: float, c_dlr: float) -> float:
    """Admissibility ceiling (1 + C_stab^2 C_dlr^2)^-1 for the marking fraction.

    Reported for diagnostics only; marking never enforces it.
    """
    return 1.0 / (1.0 + c_stab**2 * c_dlr**2)


def _loop(problem: AdaptiveProblem, pick_marked, stop: StopRule) -> AdaptiveTrace:
    mesh = problem.initial_mesh()
    records: list[TraceRecord] = []
    while True:
        try:
            solution = problem.solve(mesh)
            ind = problem.estimate(mesh, solution)
        except Exception as exc:
            raise AdaptiveSolveError(
                f"solver failed at iteration {len(records)}: {exc}",
                AdaptiveTrace(tuple(records)),
            ) from exc
        eta = ind.estimator
        record = TraceRecord(
            n_elements=len(ind.values),
            eta=eta,
            indicators=ind,
            marked=(),
            solution=solution,
            mesh=mesh,
        )
        records.append(record)
        if stop.max_iters is not None and len(records) >= stop.max_iters:
            break
        if stop.max_elements is not None and record.n_elements >= stop.max_elements:
            break
        if eta <= stop.estimator_floor or ind.total_sq <= 0.0:
            break
        marked = pick_marked(ind)
        if not marked:
            break
        records[-1] = replace(record, marked=marked)
        mesh = problem.refine(mesh, marked)
    return AdaptiveTrace(tuple(records))


def run_adaptive(problem: AdaptiveProblem, theta: float, stop: StopRule) -> AdaptiveTrace:
    """Doerfler-marked adaptive loop; the trace records every iteration."""
    return _loop(problem, lambda ind: dorfler_mark(ind, theta).marked, stop)


def run_uniform(problem: AdaptiveProblem, steps: int) -> AdaptiveTrace:
    """Refine every element for ``steps`` rounds; same trace format as adaptive."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    return _loop(
        problem,
        lambda ind: tuple(range(len(ind.values))),
        StopRule(max_iters=steps + 1),
    )


@dataclass(frozen=True)
class ReductionConstants:
    """Measured estimator-reduction and quasi-monotonicity constants."""

    kappa_hat: float
    c_est_hat: float
    c_mon_hat: float
    unbounded: bool = field(default=False)


def measure_reduction_constants(
    trace: AdaptiveTrace, distances: Sequence[float]
) -> ReductionConstants:
    """Fit eta_{l+1}^2 <= kappa eta_l^2 + C_est d_l^2 and eta_{l+k}^2 <= C_mon eta_l^2.

    kappa is scanned over {0.01, ..., 0.99}; for each candidate the smallest
    feasible C_est is max_l (eta_{l+1}^2 - kappa eta_l^2)/d_l^2 clamped at
    zero, and the (kappa, C_est) pair minimizing C_est is returned (smallest
    kappa on ties).  Estimator growth across a step of zero distance makes the
    constant unbounded, which is flagged.
    """
    eta2 = trace.etas**2
    if len(eta2) < 2:
        raise ValueError("need a trace of length >= 2")
    d = np.asarray(distances, dtype=float)
    if d.shape != (len(eta2) - 1,):
        raise ValueError(f"need {len(eta2) - 1} distances, got {d.shape}")
    best_kappa, best_cest = None, math.inf
    for step in range(1, 100):
        kappa = step / 100.0
        c_est = 0.0
        for ell in range(len(eta2) - 1):
            excess = eta2[ell + 1] - kappa * eta2[ell]
            if excess <= 0.0:
                continue
            if d[ell] == 0.0:
                c_est = math.inf
                break
            c_est = max(c_est, excess / d[ell] ** 2)
        if c_est < best_cest:
            best_kappa, best_cest = kappa, c_est
    c_mon = 0.0
    for ell in range(len(eta2)):
        for later in range(ell + 1, len(eta2)):
            if eta2[ell] > 0.0:
                c_mon = max(c_mon, eta2[later] / eta2[ell])
            elif eta2[later] > 0.0:
                c_mon = math.inf
    unbounded = not math.isfinite(best_cest) or not math.isfinite(c_mon)
    return ReductionConstants(
        kappa_hat=best_kappa if best_kappa is not None else 0.99,
        c_est_hat=best_cest,
        c_mon_hat=c_mon,
        unbounded=unbounded,
    )


def trace_csv_rows(trace: AdaptiveTrace) -> list[tuple[int, int, float, int]]:
    """Rows (iter, n_elements, eta, n_marked) for CSV export."""
    return [
        (i, r.n_elements, r.eta, len(r.marked)) for i, r in enumerate(trace.records)
    ]
