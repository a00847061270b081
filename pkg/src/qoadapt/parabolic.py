"""Adaptive Crank-Nicolson time stepping for semi-discrete parabolic systems.

A system is given by dense matrices on a fixed spatial space V: the mass
matrix realizes the H-inner product, ``op`` the operator pairing
<A u, v> = v^T op u, and ``gram_v`` the V-norm.  Trial functions are affine
in time on a mesh of [0, t_end]; the scheme matches the midpoint collocation
equations exactly, so the piecewise-constant-in-time Galerkin residual of a
solve vanishes elementwise.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag, eigh, lu_factor, lu_solve

from .adaptive import AdaptiveTrace, Indicators, StopRule, run_adaptive, run_uniform
from .linalg import SpdFactor, fit_exponent, spd_factor
from .qo import SpaceHierarchy

__all__ = [
    "SemiDiscreteSystem",
    "TimeMesh",
    "TimeAffineFunction",
    "StepSolveError",
    "cn_solve",
    "galerkin_residual_check",
    "residual_indicators",
    "xnorm_diff",
    "project_initial",
    "cfl_ratio",
    "build_heat_1d",
    "build_heat_2d_tensor",
    "TimeSteppingProblem",
    "build_time_hierarchy",
    "HeatExperimentConfig",
    "HeatRow",
    "HeatExperimentReport",
    "heat_experiment",
    "heat_qo_hierarchy",
]

_POWER_SEED = 1234


class StepSolveError(RuntimeError):
    """A time-step system could not be solved."""


@dataclass(frozen=True)
class TimeMesh:
    """Partition of [0, t_end] into intervals; breakpoints strictly increase."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        object.__setattr__(self, "breakpoints", bp)
        if bp.ndim != 1 or bp.shape[0] < 2:
            raise ValueError("a time mesh needs at least two breakpoints")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")

    @property
    def n_intervals(self) -> int:
        return self.breakpoints.shape[0] - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    def contains(self, other: "TimeMesh") -> bool:
        """True when every breakpoint of ``other`` appears in this mesh.

        Bisection reuses parent breakpoints verbatim, so membership along a
        refinement chain is exact floating-point equality.
        """
        return bool(np.isin(other.breakpoints, self.breakpoints).all())

    def refine(self, marked: Sequence[int]) -> "TimeMesh":
        """Bisect the marked intervals; all old breakpoints are kept."""
        marked = sorted(set(int(i) for i in marked))
        if marked and (marked[0] < 0 or marked[-1] >= self.n_intervals):
            raise ValueError("marked interval index out of range")
        mids = self.midpoints[marked]
        return TimeMesh(np.sort(np.concatenate([self.breakpoints, mids])))

    def refine_all(self) -> "TimeMesh":
        return self.refine(range(self.n_intervals))


@dataclass(frozen=True)
class TimeAffineFunction:
    """Piecewise-affine-in-time V-valued function: one node value per breakpoint."""

    mesh: TimeMesh
    node_values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.node_values, dtype=float)
        object.__setattr__(self, "node_values", vals)
        if vals.ndim != 2 or vals.shape[0] != self.mesh.breakpoints.shape[0]:
            raise ValueError("need one node value per mesh breakpoint")

    @property
    def dim_v(self) -> int:
        return self.node_values.shape[1]

    @property
    def slopes(self) -> np.ndarray:
        """Elementwise-constant time derivative, one row per interval."""
        return np.diff(self.node_values, axis=0) / self.mesh.lengths[:, None]


def _interp_rows(points: np.ndarray, values: np.ndarray, at: np.ndarray) -> np.ndarray:
    """Affine interpolation of rowwise data; exact at the given points."""
    idx = np.clip(np.searchsorted(points, at, side="right") - 1, 0, points.shape[0] - 2)
    w = (at - points[idx]) / (points[idx + 1] - points[idx])
    return values[idx] * (1.0 - w)[:, None] + values[idx + 1] * w[:, None]


@dataclass(frozen=True)
class SemiDiscreteSystem:
    """du/dt + A u = f on [0, t_end] over a fixed spatial space.

    ``rhs_nodes`` holds f at the breakpoints of the initial time mesh
    (``rhs_breakpoints``); f is affine in between, and admissible time meshes
    must refine that initial mesh so f stays elementwise affine.
    """

    mass: np.ndarray
    gram_v: np.ndarray
    op: np.ndarray
    rhs_breakpoints: np.ndarray
    rhs_nodes: np.ndarray
    u0: np.ndarray
    t_end: float
    u0_moments: np.ndarray | None = None

    def __post_init__(self):
        for name in ("mass", "gram_v", "op", "rhs_nodes", "u0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(
            self, "rhs_breakpoints", np.asarray(self.rhs_breakpoints, dtype=float)
        )
        if self.u0_moments is not None:
            object.__setattr__(self, "u0_moments", np.asarray(self.u0_moments, dtype=float))
        d = self.mass.shape[0]
        if self.mass.shape != (d, d) or self.gram_v.shape != (d, d) or self.op.shape != (d, d):
            raise ValueError("mass, gram_v and op must be square matrices of equal size")
        if self.u0.shape != (d,):
            raise ValueError(f"initial value has shape {self.u0.shape}, expected ({d},)")
        if self.u0_moments is not None and self.u0_moments.shape != (d,):
            raise ValueError("initial-value moments do not match the space dimension")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        bp = self.rhs_breakpoints
        if bp.ndim != 1 or bp.shape[0] < 2 or bp[0] != 0.0 or abs(bp[-1] - self.t_end) > 1e-12 * self.t_end:
            raise ValueError("rhs breakpoints must run from 0 to t_end")
        if self.rhs_nodes.shape != (bp.shape[0], d):
            raise ValueError("need one rhs vector per rhs breakpoint")
        sym = 0.5 * (self.op + self.op.T)
        floor = eigh(sym, self.gram_v, eigvals_only=True, subset_by_index=(0, 0))[0]
        if floor <= 0.0:
            raise ValueError(f"operator is not coercive w.r.t. gram_v (floor {floor:.3e})")

    @property
    def dim_v(self) -> int:
        return self.mass.shape[0]

    @cached_property
    def gram_factor(self) -> SpdFactor:
        return spd_factor(self.gram_v)

    @cached_property
    def mass_factor(self) -> SpdFactor:
        return spd_factor(self.mass)

    def initial_time_mesh(self) -> TimeMesh:
        return TimeMesh(self.rhs_breakpoints.copy())

    def rhs_at(self, t: np.ndarray) -> np.ndarray:
        """f evaluated at times t (rowwise), affine between the rhs breakpoints."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return _interp_rows(self.rhs_breakpoints, self.rhs_nodes, t)

    def require_admissible(self, mesh: TimeMesh) -> None:
        bp = mesh.breakpoints
        if bp[0] != 0.0 or abs(bp[-1] - self.t_end) > 1e-12 * self.t_end:
            raise ValueError("time mesh must run from 0 to t_end")
        if not mesh.contains(self.initial_time_mesh()):
            raise ValueError("time mesh must refine the initial mesh of the data")


def cn_solve(sys: SemiDiscreteSystem, mesh: TimeMesh) -> TimeAffineFunction:
    """Crank-Nicolson sweep: (M + h/2 A) u_{i+1} = (M - h/2 A) u_i + h f(mid).

    Step matrices are factored once per distinct step size; adaptive meshes
    are dyadic so only a handful of factorizations occur.
    """
    sys.require_admissible(mesh)
    d = sys.dim_v
    values = np.empty((mesh.n_intervals + 1, d))
    values[0] = sys.u0
    fmids = sys.rhs_at(mesh.midpoints)
    factors: dict[float, tuple] = {}
    for i, h in enumerate(mesh.lengths):
        key = float(h)
        if key not in factors:
            try:
                factors[key] = lu_factor(sys.mass + 0.5 * h * sys.op)
            except np.linalg.LinAlgError as exc:
                raise StepSolveError(f"singular step matrix for step size {h}") from exc
        rhs = (sys.mass - 0.5 * h * sys.op) @ values[i] + h * fmids[i]
        values[i + 1] = lu_solve(factors[key], rhs)
    return TimeAffineFunction(mesh, values)


def galerkin_residual_check(sys: SemiDiscreteSystem, u: TimeAffineFunction) -> float:
    """Max relative elementwise mean residual |f(mid) - M du/dt - A u(mid)|.

    Zero (to rounding) exactly when ``u`` solves the midpoint equations, which
    is what makes the collocation and Galerkin forms of the scheme the same.
    """
    mids = sys.rhs_at(u.mesh.midpoints)
    deltas = u.slopes
    umid = 0.5 * (u.node_values[:-1] + u.node_values[1:])
    worst = 0.0
    for i in range(u.mesh.n_intervals):
        terms = (mids[i], sys.mass @ deltas[i], sys.op @ umid[i])
        residual = np.linalg.norm(terms[0] - terms[1] - terms[2])
        scale = max(max(np.linalg.norm(t) for t in terms), 1e-300)
        worst = max(worst, residual / scale)
    return worst


def residual_indicators(sys: SemiDiscreteSystem, u: TimeAffineFunction) -> Indicators:
    """eta_i = |T_i|^{3/2} |df/dt - A du/dt|_{V*} per interval.

    Both slopes are constant on each interval (f is elementwise affine on any
    admissible mesh), so the estimator integral is evaluated exactly.
    """
    sys.require_admissible(u.mesh)
    bp = u.mesh.breakpoints
    f_nodes = sys.rhs_at(bp)
    fdot = np.diff(f_nodes, axis=0) / u.mesh.lengths[:, None]
    rho = fdot - u.slopes @ sys.op.T
    dual_sq = np.maximum(np.sum(rho * sys.gram_factor.solve(rho.T).T, axis=1), 0.0)
    values = u.mesh.lengths**1.5 * np.sqrt(dual_sq)
    return Indicators.from_values(values)


def xnorm_diff(
    sys: SemiDiscreteSystem, u: TimeAffineFunction, v: TimeAffineFunction
) -> float:
    """Space-time norm of u - v: L2 in the V-norm plus L2 of d/dt in the V*-norm.

    Both functions are merged onto the union of their meshes, where all
    integrands are polynomial per interval and integrated exactly.
    """
    if u.dim_v != sys.dim_v or v.dim_v != sys.dim_v:
        raise ValueError("functions do not match the system dimension")
    common = np.union1d(u.mesh.breakpoints, v.mesh.breakpoints)
    wu = _interp_rows(u.mesh.breakpoints, u.node_values, common)
    wv = _interp_rows(v.mesh.breakpoints, v.node_values, common)
    w = wu - wv
    h = np.diff(common)
    a, b = w[:-1], w[1:]
    ga = a @ sys.gram_v
    gb = b @ sys.gram_v
    l2_part = np.sum(
        h / 3.0 * (np.sum(ga * a, axis=1) + np.sum(ga * b, axis=1) + np.sum(gb * b, axis=1))
    )
    deltas = (b - a) / h[:, None]
    md = deltas @ sys.mass.T
    dual_sq = np.maximum(np.sum(md * sys.gram_factor.solve(md.T).T, axis=1), 0.0)
    dual_part = np.sum(h * dual_sq)
    return math.sqrt(max(l2_part + dual_part, 0.0))


def project_initial(
    sys: SemiDiscreteSystem, u0_moments: np.ndarray, first_step: float
) -> np.ndarray:
    """Initial value from moments of the scalar product <.,.> + h/2 <A .,.>."""
    if first_step <= 0.0:
        raise ValueError("first step must be positive")
    moments = np.asarray(u0_moments, dtype=float)
    if moments.shape != (sys.dim_v,):
        raise ValueError(f"moments have shape {moments.shape}, expected ({sys.dim_v},)")
    return np.linalg.solve(sys.mass + 0.5 * first_step * sys.op, moments)


def cfl_ratio(sys: SemiDiscreteSystem, mesh: TimeMesh) -> tuple[float, float]:
    """Measured inverse-inequality constant and its ratio to the coarsest step.

    c_inv = max_v |v|_V / |v|_{V*} is the square root of the largest
    generalized eigenvalue of (G_V, M G_V^-1 M), found by power iteration with
    relative tolerance 1e-8 on the Rayleigh quotient.  The ratio
    1 / (c_inv * max|T|) is the computable stand-in for the CFL quantity; it
    is reported, never enforced.
    """
    gf, mf = sys.gram_factor, sys.mass
    x = np.random.default_rng(_POWER_SEED).standard_normal(sys.dim_v)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(10_000):
        y = np.linalg.solve(mf, sys.gram_v @ np.linalg.solve(mf, sys.gram_v @ x))
        norm = np.linalg.norm(y)
        if norm == 0.0:
            break
        y /= norm
        num = float(y @ sys.gram_v @ y)
        den = float((mf @ y) @ gf.solve(mf @ y))
        new_lam = num / den
        if lam > 0.0 and abs(new_lam - lam) <= 1e-8 * new_lam:
            lam = new_lam
            break
        lam, x = new_lam, y
    c_inv = math.sqrt(lam)
    return c_inv, 1.0 / (c_inv * float(np.max(mesh.lengths)))


def _heat_matrices_1d(n_space: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = 1.0 / n_space
    d = n_space - 1
    mass = (h / 6.0) * (4.0 * np.eye(d) + np.eye(d, k=1) + np.eye(d, k=-1))
    stiff = (1.0 / h) * (2.0 * np.eye(d) - np.eye(d, k=1) - np.eye(d, k=-1))
    moments = h * np.ones(d)
    return mass, stiff, moments


def _finish_heat_system(
    mass: np.ndarray,
    stiff: np.ndarray,
    moments: np.ndarray,
    h_space: float,
    t_end: float,
    first_step: float | None,
    v_seminorm: bool,
) -> SemiDiscreteSystem:
    gram_v = stiff.copy() if v_seminorm else stiff + mass
    # Default projection step: the spatial scale h^2 below which the time
    # stepping cannot resolve transients anyway.  Larger steps smooth the
    # non-matching data and lose the startup singularity.
    step = h_space**2 if first_step is None else first_step
    u0 = np.linalg.solve(mass + 0.5 * step * stiff, moments)
    breakpoints = np.array([0.0, t_end])
    rhs_nodes = np.zeros((2, mass.shape[0]))
    return SemiDiscreteSystem(
        mass=mass,
        gram_v=gram_v,
        op=stiff,
        rhs_breakpoints=breakpoints,
        rhs_nodes=rhs_nodes,
        u0=u0,
        t_end=t_end,
        u0_moments=moments,
    )


def build_heat_1d(
    n_space: int,
    t_end: float = 1.0,
    first_step: float | None = None,
    v_seminorm: bool = False,
) -> SemiDiscreteSystem:
    """Heat equation on (0, 1): P1 elements, zero boundary values, u0 = 1, f = 0.

    The non-matching initial condition is projected with the scalar product
    <.,.> + h/2 <A .,.> using the first step of the initial time mesh (one
    interval [0, t_end] unless ``first_step`` overrides it).
    """
    if n_space < 2:
        raise ValueError("need at least two spatial elements")
    mass, stiff, moments = _heat_matrices_1d(n_space)
    return _finish_heat_system(
        mass, stiff, moments, 1.0 / n_space, t_end, first_step, v_seminorm
    )


def build_heat_2d_tensor(
    n_side: int,
    t_end: float = 1.0,
    first_step: float | None = None,
    v_seminorm: bool = False,
) -> SemiDiscreteSystem:
    """Heat equation on the unit square with tensor bilinear elements."""
    if n_side < 2:
        raise ValueError("need at least two elements per side")
    mass1, stiff1, mom1 = _heat_matrices_1d(n_side)
    mass = np.kron(mass1, mass1)
    stiff = np.kron(stiff1, mass1) + np.kron(mass1, stiff1)
    moments = np.kron(mom1, mom1)
    return _finish_heat_system(
        mass, stiff, moments, 1.0 / n_side, t_end, first_step, v_seminorm
    )


class TimeSteppingProblem:
    """Adaptive-loop adapter: CN solve, residual indicators, interval bisection.

    When the system carries moments of the undiscretized initial data, each
    solve projects the initial value with the scalar product
    <.,.> + |T_0|/2 <A .,.> of the current mesh's first interval, so coarse
    meshes see data exactly as rough as they can resolve.  Pass
    ``reproject_initial=False`` to always start from the system's fixed u0.
    """

    def __init__(
        self,
        system: SemiDiscreteSystem,
        start_mesh: TimeMesh | None = None,
        reproject_initial: bool | None = None,
    ):
        self.system = system
        self._start = start_mesh if start_mesh is not None else system.initial_time_mesh()
        system.require_admissible(self._start)
        if reproject_initial is None:
            reproject_initial = system.u0_moments is not None
        if reproject_initial and system.u0_moments is None:
            raise ValueError("re-projection requested but the system has no u0 moments")
        self.reproject_initial = reproject_initial

    def initial_mesh(self) -> TimeMesh:
        return self._start

    def system_for(self, mesh: TimeMesh) -> SemiDiscreteSystem:
        if not self.reproject_initial:
            return self.system
        u0 = project_initial(self.system, self.system.u0_moments, float(mesh.lengths[0]))
        return dataclasses.replace(self.system, u0=u0)

    def solve(self, mesh: TimeMesh) -> TimeAffineFunction:
        return cn_solve(self.system_for(mesh), mesh)

    def estimate(self, mesh: TimeMesh, solution: TimeAffineFunction) -> Indicators:
        return residual_indicators(self.system, solution)

    def refine(self, mesh: TimeMesh, marked: Sequence[int]) -> TimeMesh:
        return mesh.refine(marked)


def build_time_hierarchy(
    sys: SemiDiscreteSystem, meshes: Sequence[TimeMesh]
) -> SpaceHierarchy:
    """Embed a nested sequence of time meshes into one ambient space-time problem.

    Trial coordinates are node values on the finest mesh (affine in time), test
    coordinates one constant per fine interval plus the initial-value block.
    The Galerkin solutions of the assembled hierarchy reproduce the
    Crank-Nicolson solutions of the individual meshes.
    """
    if not meshes:
        raise ValueError("need at least one mesh")
    fine = meshes[-1]
    for coarse in meshes:
        sys.require_admissible(coarse)
        if not fine.contains(coarse):
            raise ValueError("meshes must be nested with the finest mesh last")
    d = sys.dim_v
    bp = fine.breakpoints
    n = fine.n_intervals
    lengths = fine.lengths
    dim_x = d * (n + 1)
    dim_y = d * n + d

    g = sys.gram_v
    m = sys.mass
    dual_w = m @ sys.gram_factor.solve(m)

    gram_x = np.zeros((dim_x, dim_x))
    gram_y = np.zeros((dim_y, dim_y))
    form = np.zeros((dim_y, dim_x))
    rhs = np.zeros(dim_y)
    fmids = sys.rhs_at(fine.midpoints)
    for i in range(n):
        h = lengths[i]
        s0 = slice(i * d, (i + 1) * d)
        s1 = slice((i + 1) * d, (i + 2) * d)
        gram_x[s0, s0] += h / 3.0 * g + dual_w / h
        gram_x[s1, s1] += h / 3.0 * g + dual_w / h
        gram_x[s0, s1] += h / 6.0 * g - dual_w / h
        gram_x[s1, s0] += h / 6.0 * g - dual_w / h
        gram_y[s0, s0] = h * g
        form[s0, s0] = -m + 0.5 * h * sys.op
        form[s0, s1] = m + 0.5 * h * sys.op
        rhs[s0] = h * fmids[i]
    s_h = slice(d * n, dim_y)
    gram_y[s_h, s_h] = m
    form[s_h, 0:d] = m
    rhs[s_h] = m @ sys.u0

    x_spaces = []
    y_spaces = []
    eye_d = np.eye(d)
    for mesh in meshes:
        cb = mesh.breakpoints
        nodes = np.clip(np.searchsorted(cb, bp, side="right") - 1, 0, cb.shape[0] - 2)
        w = (bp - cb[nodes]) / (cb[nodes + 1] - cb[nodes])
        p = np.zeros((n + 1, cb.shape[0]))
        p[np.arange(n + 1), nodes] = 1.0 - w
        p[np.arange(n + 1), nodes + 1] += w
        x_spaces.append(np.kron(p, eye_d))
        owner = np.searchsorted(cb, fine.midpoints, side="right") - 1
        q = np.zeros((n, mesh.n_intervals))
        q[np.arange(n), owner] = 1.0
        y_spaces.append(block_diag(np.kron(q, eye_d), eye_d))
    return SpaceHierarchy(
        gram_x=gram_x,
        gram_y=gram_y,
        form=form,
        rhs=rhs,
        x_spaces=tuple(x_spaces),
        y_spaces=tuple(y_spaces),
    )


@dataclass(frozen=True)
class HeatExperimentConfig:
    """Settings for the adaptive/uniform time-stepping comparison.

    Slopes are fitted on log-log data restricted to meshes with at least
    ``fit_min_elements`` intervals (and, for the uniform run, at most
    ``fit_max_elements_uniform``, the pre-asymptotic window in which the
    startup singularity governs the rate).
    """

    spatial: str = "1d"
    n_space: int = 64
    theta: float = 0.5
    steps_adaptive: int = 24
    steps_uniform: int = 10
    seed: int = 0
    t_end: float = 1.0
    fit_min_elements: int = 8
    fit_max_elements_uniform: int = 512


@dataclass(frozen=True)
class HeatRow:
    method: str
    iteration: int
    n_intervals: int
    eta: float
    err_x: float
    cfl_ratio: float


@dataclass(frozen=True)
class HeatExperimentReport:
    config: HeatExperimentConfig
    rows: tuple[HeatRow, ...]
    slopes: dict
    c_inv: float
    step_profile: tuple[tuple[float, float], ...]
    min_step_location: float
    adaptive_trace: AdaptiveTrace
    uniform_trace: AdaptiveTrace

    def method_rows(self, method: str) -> list[HeatRow]:
        return [r for r in self.rows if r.method == method]


def _fit_window(points, n_min: int, n_max: int | None):
    window = [(n, y) for n, y in points if n >= n_min and (n_max is None or n <= n_max)]
    distinct = len({n for n, _ in window})
    if distinct < 2 or any(y <= 0 for _, y in window):
        return None
    return fit_exponent(window)


def heat_experiment(config: HeatExperimentConfig) -> HeatExperimentReport:
    """Adaptive versus uniform time refinement for the heat equation.

    The error reference is the solution on the final adaptive mesh refined
    once more uniformly, guarding the last iterate against self-comparison.
    """
    if config.spatial == "1d":
        system = build_heat_1d(config.n_space, t_end=config.t_end)
    elif config.spatial == "2d":
        system = build_heat_2d_tensor(config.n_space, t_end=config.t_end)
    else:
        raise ValueError(f"unknown spatial build {config.spatial!r}")
    if config.steps_adaptive < 0 or config.steps_uniform < 0:
        raise ValueError("step counts must be >= 0")
    problem = TimeSteppingProblem(system)
    adaptive = run_adaptive(problem, config.theta, StopRule(max_iters=max(config.steps_adaptive, 1)))
    uniform = run_uniform(problem, config.steps_uniform)
    final_mesh = adaptive.records[-1].mesh
    reference = problem.solve(final_mesh.refine_all())
    c_inv, _ = cfl_ratio(system, final_mesh)
    rows: list[HeatRow] = []
    for method, trace in (("adaptive", adaptive), ("uniform", uniform)):
        for i, rec in enumerate(trace.records):
            rows.append(
                HeatRow(
                    method=method,
                    iteration=i,
                    n_intervals=rec.n_elements,
                    eta=rec.eta,
                    err_x=xnorm_diff(system, reference, rec.solution),
                    cfl_ratio=1.0 / (c_inv * float(np.max(rec.mesh.lengths))),
                )
            )
    n_min = config.fit_min_elements
    n_uni = config.fit_max_elements_uniform
    per = {m: [(r.n_intervals, r) for r in rows if r.method == m] for m in ("adaptive", "uniform")}
    slopes = {
        "adaptive_eta": _fit_window([(n, r.eta) for n, r in per["adaptive"]], n_min, None),
        "adaptive_err": _fit_window([(n, r.err_x) for n, r in per["adaptive"]], n_min, None),
        "uniform_eta": _fit_window([(n, r.eta) for n, r in per["uniform"]], n_min, n_uni),
        "uniform_err": _fit_window([(n, r.err_x) for n, r in per["uniform"]], n_min, n_uni),
    }
    profile = tuple(zip(final_mesh.midpoints.tolist(), final_mesh.lengths.tolist()))
    min_step_location = float(final_mesh.midpoints[int(np.argmin(final_mesh.lengths))])
    return HeatExperimentReport(
        config=config,
        rows=tuple(rows),
        slopes=slopes,
        c_inv=c_inv,
        step_profile=profile,
        min_step_location=min_step_location,
        adaptive_trace=adaptive,
        uniform_trace=uniform,
    )


def heat_qo_hierarchy(
    n_space: int = 17,
    levels: int = 6,
    theta: float = 0.5,
    spatial: str = "1d",
    t_end: float = 1.0,
) -> SpaceHierarchy:
    """Space hierarchy from an adaptive heat run, ready for the QO analyzer."""
    if spatial == "1d":
        system = build_heat_1d(n_space, t_end=t_end)
    elif spatial == "2d":
        system = build_heat_2d_tensor(n_space, t_end=t_end)
    else:
        raise ValueError(f"unknown spatial build {spatial!r}")
    problem = TimeSteppingProblem(system)
    trace = run_adaptive(problem, theta, StopRule(max_iters=max(levels, 1)))
    return build_time_hierarchy(system, [rec.mesh for rec in trace.records])
