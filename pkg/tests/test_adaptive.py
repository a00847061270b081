import numpy as np
import pytest

from qoadapt.adaptive import (
    AdaptiveSolveError,
    AdaptiveTrace,
    Indicators,
    StopRule,
    TraceRecord,
    dorfler_mark,
    measure_reduction_constants,
    run_adaptive,
    run_uniform,
    theta_star,
    trace_csv_rows,
)


def brute_force_min_cardinality(values, theta):
    """Exhaustive subset search; oracle for the greedy marking."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    total = float(np.sum(values**2))
    masks = np.arange(1, 2**n)[:, None]
    picked = (masks >> np.arange(n)) & 1
    sums = picked @ (values**2)
    feasible = sums >= theta * total
    return int(np.min(picked[feasible].sum(axis=1)))


class CountingProblem:
    """1-D interval toy: indicator = element length, refine bisects."""

    def __init__(self, n0=4, fail_at=None):
        self.n0 = n0
        self.fail_at = fail_at
        self.solves = 0

    def initial_mesh(self):
        return tuple(1.0 / self.n0 for _ in range(self.n0))

    def solve(self, mesh):
        self.solves += 1
        if self.fail_at is not None and self.solves >= self.fail_at:
            raise RuntimeError("synthetic solver failure")
        return sum(mesh)

    def estimate(self, mesh, solution):
        return Indicators.from_values(np.array(mesh))

    def refine(self, mesh, marked):
        out = []
        marked = set(marked)
        for i, h in enumerate(mesh):
            if i in marked:
                out.extend([h / 2, h / 2])
            else:
                out.append(h)
        return tuple(out)


class TestDorflerMark:
    def test_documented_case(self):
        ind = Indicators.from_values([4.0, 3.0, 2.0, 1.0])
        res = dorfler_mark(ind, 0.5)
        assert res.marked == (0,)
        assert res.achieved_fraction >= 0.5
        assert brute_force_min_cardinality(ind.values, 0.5) == 1

    def test_small_theta_single_dominant(self):
        ind = Indicators.from_values([10.0, 0.1, 0.1])
        assert dorfler_mark(ind, 0.05).marked == (0,)

    def test_theta_near_one_marks_all(self):
        ind = Indicators.from_values([1.0, 1.0, 1.0, 1.0])
        res = dorfler_mark(ind, 1 - 1e-12)
        assert res.marked == (0, 1, 2, 3)

    def test_matches_brute_force(self, rng):
        for case in range(500):
            n = int(rng.integers(1, 13))
            values = rng.uniform(0.0, 1.0, size=n)
            values[rng.integers(0, n)] += 0.5  # ensure a positive total
            ind = Indicators.from_values(values)
            for theta in (0.3, 0.5, 0.7):
                res = dorfler_mark(ind, theta)
                assert len(res.marked) == brute_force_min_cardinality(values, theta)
                marked_sum = float(np.sum(values[list(res.marked)] ** 2))
                assert marked_sum >= theta * ind.total_sq
                # dropping the smallest marked indicator violates the bound
                smallest = min(res.marked, key=lambda i: (values[i], -i))
                rest = marked_sum - values[smallest] ** 2
                assert rest < theta * ind.total_sq

    def test_deterministic_with_ties(self):
        ind = Indicators.from_values([1.0, 2.0, 2.0, 1.0])
        res1 = dorfler_mark(ind, 0.6)
        res2 = dorfler_mark(ind, 0.6)
        assert res1.marked == res2.marked == (1, 2)

    def test_all_zero_is_error(self):
        with pytest.raises(ValueError):
            dorfler_mark(Indicators.from_values([0.0, 0.0]), 0.5)

    def test_theta_range(self):
        ind = Indicators.from_values([1.0])
        for theta in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValueError):
                dorfler_mark(ind, theta)


class TestRunAdaptive:
    def test_max_iters_contract(self):
        trace = run_adaptive(CountingProblem(), 0.5, StopRule(max_iters=3))
        assert len(trace) == 3
        assert trace.records[-1].marked == ()

    def test_element_counts_strictly_increase_while_marking(self):
        trace = run_adaptive(CountingProblem(), 0.5, StopRule(max_iters=6))
        counts = trace.element_counts
        assert np.all(np.diff(counts) > 0)

    def test_zero_estimator_stops(self):
        class Converged(CountingProblem):
            def estimate(self, mesh, solution):
                return Indicators.from_values(np.zeros(len(mesh)))

        trace = run_adaptive(Converged(), 0.5, StopRule(max_iters=10))
        assert len(trace) == 1

    def test_max_elements(self):
        trace = run_adaptive(CountingProblem(n0=2), 0.5, StopRule(max_iters=50, max_elements=10))
        assert trace.records[-1].n_elements >= 10
        assert trace.records[-2].n_elements < 10

    def test_estimator_floor(self):
        trace = run_adaptive(
            CountingProblem(n0=2), 0.9, StopRule(max_iters=100, estimator_floor=0.3)
        )
        assert trace.records[-1].eta <= 0.3

    def test_solver_failure_keeps_partial_trace(self):
        with pytest.raises(AdaptiveSolveError) as err:
            run_adaptive(CountingProblem(fail_at=3), 0.5, StopRule(max_iters=10))
        assert len(err.value.trace) == 2

    def test_stop_rule_requires_bound(self):
        with pytest.raises(ValueError):
            StopRule()


class TestRunUniform:
    def test_zero_steps(self):
        trace = run_uniform(CountingProblem(), 0)
        assert len(trace) == 1

    def test_dyadic_growth(self):
        trace = run_uniform(CountingProblem(n0=4), 2)
        assert list(trace.element_counts) == [4, 8, 16]

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            run_uniform(CountingProblem(), -1)


def _trace_from_etas(etas):
    records = tuple(
        TraceRecord(
            n_elements=i + 1,
            eta=float(e),
            indicators=Indicators.from_values([float(e)]),
            marked=(),
            solution=None,
            mesh=None,
        )
        for i, e in enumerate(etas)
    )
    return AdaptiveTrace(records)


class TestMeasureReductionConstants:
    def test_geometric_with_huge_distances(self):
        etas = [2.0**-k for k in range(6)]
        trace = _trace_from_etas(etas)
        out = measure_reduction_constants(trace, [1e6] * 5)
        assert out.kappa_hat <= 0.25 + 1e-12
        assert out.c_est_hat <= 1e-10
        assert not out.unbounded

    def test_constant_estimator(self):
        trace = _trace_from_etas([1.0, 1.0, 1.0])
        out = measure_reduction_constants(trace, [1.0, 1.0])
        assert out.c_mon_hat == pytest.approx(1.0, rel=1e-12)

    def test_growth_with_zero_distance_flags_unbounded(self):
        trace = _trace_from_etas([1.0, 2.0])
        out = measure_reduction_constants(trace, [0.0])
        assert out.unbounded

    def test_alignment_validated(self):
        trace = _trace_from_etas([1.0, 0.5])
        with pytest.raises(ValueError):
            measure_reduction_constants(trace, [1.0, 1.0])


def test_theta_star_upper_bound():
    assert theta_star(1.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert theta_star(2.0, 3.0) == pytest.approx(1.0 / 37.0, rel=1e-12)


def test_trace_csv_rows():
    trace = run_adaptive(CountingProblem(), 0.5, StopRule(max_iters=2))
    rows = trace_csv_rows(trace)
    assert rows[0][0] == 0 and rows[0][1] == 4
    assert rows[-1][3] == 0  # final record is not marked


class TestIndicators:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Indicators.from_values([-1.0])

    def test_inconsistent_total_rejected(self):
        with pytest.raises(ValueError):
            Indicators(np.array([1.0, 1.0]), 5.0)

    def test_estimator(self):
        assert Indicators.from_values([3.0, 4.0]).estimator == pytest.approx(5.0)
