"""Command-line front end: LU growth, adaptive heat stepping, QO analysis.

Exit codes: 0 success, 1 usage/validation, 2 numerical failure.  All CSV
output is written atomically with 17 significant digits so identical
configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .adaptive import measure_reduction_constants
from .blocklu import growth_experiment, hilbert_modified
from .bundle import BundleFormatError, load_bundle
from .linalg import SingularMinorError
from .parabolic import (
    HeatExperimentConfig,
    TimeSteppingProblem,
    build_heat_1d,
    build_heat_2d_tensor,
    build_time_hierarchy,
    cn_solve,
    heat_experiment,
    xnorm_diff,
)
from .adaptive import StopRule, run_adaptive
from .qo import NestingError, analyze_hierarchy
from .svgplot import RefSlope, Series, loglog_svg

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant using exit code 1 for usage errors (default is 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    """Single-header CSV written via a temp file and atomic rename."""
    text_rows = ["".join((",".join(_fmt(v) for v in row), "\n")) for row in rows]
    text = ",".join(header) + "\n" + "".join(text_rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    if not sizes or any(n < 1 for n in sizes):
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def _cmd_hilbert_lu(args) -> int:
    if any(n % args.block_size != 0 for n in args.sizes):
        print("error: every size must be a multiple of --block-size", file=sys.stderr)
        return EXIT_USAGE
    family = np.eye if args.identity else hilbert_modified
    try:
        result = growth_experiment(family, args.sizes, args.block_size)
    except (SingularMinorError, np.linalg.LinAlgError) as exc:
        print(f"factorization failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = Path(args.out_dir)
    rows = [
        (
            r.n,
            r.l_norm / r.m_norm,
            r.u_norm / r.m_norm,
            r.l_inv_norm / r.m_norm,
            r.u_inv_norm / r.m_norm,
        )
        for r in result.rows
    ]
    csv_path = out_dir / "lu_growth.csv"
    _write_csv(
        csv_path,
        ["n", "l_norm_ratio", "u_norm_ratio", "l_inv_norm_ratio", "u_inv_norm_ratio"],
        rows,
    )
    print(f"wrote {csv_path}")
    if result.exponents is None:
        print("fitted exponents: n/a (need at least two sizes)")
    else:
        for key in ("l_norm", "u_norm", "l_inv_norm", "u_inv_norm"):
            print(f"exponent {key}/m_norm vs n: {result.exponents[key]:+.4f}")
    if args.svg:
        ns = [r.n for r in result.rows]
        svg_path = out_dir / "lu_growth.svg"
        anchor = rows[-1]
        loglog_svg(
            svg_path,
            [
                Series("|L|/|M|", ns, [r[1] for r in rows]),
                Series("|U|/|M|", ns, [r[2] for r in rows]),
            ],
            ref_slopes=[RefSlope(0.35, anchor[0], anchor[2], "n^0.35")],
            title="normalized LU factor growth",
            xlabel="n",
            ylabel="factor norm / |M|",
        )
        print(f"wrote {svg_path}")
    return EXIT_OK


def _cmd_heat_adaptive(args) -> int:
    config = HeatExperimentConfig(
        spatial=args.spatial,
        n_space=args.n_space,
        theta=args.theta,
        steps_adaptive=args.steps,
        steps_uniform=args.steps_uniform,
        seed=args.seed,
        t_end=args.t_end,
    )
    try:
        report = heat_experiment(config)
    except (np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"heat experiment failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = Path(args.out_dir)
    conv_path = out_dir / "heat_convergence.csv"
    _write_csv(
        conv_path,
        ["method", "iter", "n_intervals", "eta", "err_x", "cfl_ratio"],
        [
            (r.method, r.iteration, r.n_intervals, r.eta, r.err_x, r.cfl_ratio)
            for r in report.rows
        ],
    )
    steps_path = out_dir / "heat_steps.csv"
    _write_csv(steps_path, ["t_mid", "step_size"], list(report.step_profile))
    print(f"wrote {conv_path}")
    print(f"wrote {steps_path}")
    for key, slope in report.slopes.items():
        print(f"slope {key}: " + ("n/a" if slope is None else f"{slope:+.4f}"))
    print(f"inverse-inequality constant c_inv: {report.c_inv:.6g}")
    final = report.method_rows("adaptive")[-1]
    print(f"final cfl ratio: {final.cfl_ratio:.6g}")
    print(f"smallest final step centered at t = {report.min_step_location:.6g}")
    if args.svg:
        svg_path = out_dir / "heat_convergence.svg"
        ad = report.method_rows("adaptive")
        un = report.method_rows("uniform")
        series = [
            Series("adaptive (estimator)", [r.n_intervals for r in ad], [r.eta for r in ad]),
            Series("adaptive (error)", [r.n_intervals for r in ad], [r.err_x for r in ad]),
            Series("uniform (estimator)", [r.n_intervals for r in un], [r.eta for r in un]),
            Series("uniform (error)", [r.n_intervals for r in un], [r.err_x for r in un]),
        ]
        refs = [
            RefSlope(-1.0, ad[-1].n_intervals, ad[-1].eta, "#T^-1"),
            RefSlope(-0.25, un[-1].n_intervals, un[-1].eta, "#T^-1/4"),
        ]
        loglog_svg(
            svg_path,
            series,
            refs,
            title="adaptive vs uniform time refinement",
            xlabel="number of time steps",
            ylabel="estimator / error",
        )
        print(f"wrote {svg_path}")
    return EXIT_OK


def _heat_qo_source(args):
    """Hierarchy plus measured loop constants from an adaptive heat run."""
    if args.spatial == "1d":
        system = build_heat_1d(args.n_space, t_end=args.t_end)
    else:
        system = build_heat_2d_tensor(args.n_space, t_end=args.t_end)
    problem = TimeSteppingProblem(system)
    trace = run_adaptive(problem, args.theta, StopRule(max_iters=max(args.levels, 1)))
    hierarchy = build_time_hierarchy(system, [rec.mesh for rec in trace.records])
    solutions = [rec.solution for rec in trace.records]
    distances = [
        xnorm_diff(system, solutions[i + 1], solutions[i]) for i in range(len(solutions) - 1)
    ]
    measured = {"kappa": 0.5, "c_est": 1.0, "c_rel": 1.0, "c_mon": 1.0}
    if len(solutions) >= 2:
        red = measure_reduction_constants(trace, distances)
        reference = cn_solve(system, trace.records[-1].mesh.refine_all())
        rel = max(
            xnorm_diff(system, reference, rec.solution) / rec.eta
            for rec in trace.records
            if rec.eta > 0
        )
        if not red.unbounded:
            measured = {
                "kappa": red.kappa_hat,
                "c_est": red.c_est_hat if red.c_est_hat > 0 else 1.0,
                "c_mon": max(red.c_mon_hat, 1.0),
                "c_rel": rel,
            }
    return hierarchy, measured


def _cmd_qo_analyze(args) -> int:
    if args.bundle is not None:
        try:
            hierarchy = load_bundle(args.bundle)
        except (OSError, BundleFormatError) as exc:
            print(f"cannot read bundle: {exc}", file=sys.stderr)
            return EXIT_USAGE
        measured = {"kappa": 0.5, "c_est": 1.0, "c_rel": 1.0, "c_mon": 1.0}
    else:
        hierarchy, measured = _heat_qo_source(args)
    constants = {
        "kappa": args.kappa if args.kappa is not None else measured["kappa"],
        "c_est": args.c_est if args.c_est is not None else measured["c_est"],
        "c_rel": args.c_rel if args.c_rel is not None else measured["c_rel"],
        "c_mon": args.c_mon if args.c_mon is not None else measured["c_mon"],
    }
    try:
        report = analyze_hierarchy(
            hierarchy,
            rank_tol=args.tol,
            kappa=constants["kappa"],
            c_est=constants["c_est"],
            c_rel=constants["c_rel"],
            c_mon=constants["c_mon"],
        )
    except (NestingError, SingularMinorError, np.linalg.LinAlgError) as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"levels: {report.structure.m}, block boundaries: {list(report.structure.boundaries)}")
    print(f"c_a_hat (|M|):        {report.c_a_hat:.10g}")
    print(f"gamma_hat:            {report.gamma_hat:.10g}")
    print(f"|U|:                  {report.u_norm:.10g}")
    print(f"max_k |U^-1(:,k)|:    {report.u_inv_col_max:.10g}")
    print(f"C(N) bound (Lemma):   {report.c_bound:.10g}")
    print(
        "constants: kappa={kappa:.4g} c_est={c_est:.4g} c_rel={c_rel:.4g} "
        "c_mon={c_mon:.4g}".format(**constants)
    )
    print("empirical C(l, N) table (rows l, columns N, nan = out of range):")
    for ell, row in enumerate(report.c_empirical):
        cells = " ".join(f"{v:12.6g}" for v in row)
        print(f"  l={ell}: {cells}")
    print("max over l:", " ".join(f"{v:12.6g}" for v in report.c_of_n))
    if report.n0 is None:
        print("no N0 with q_log < 0 within range")
    else:
        print(f"N0 = {report.n0}, q_log = {report.q_log:.10g}, q = {report.q:.10g}, "
              f"C_lin = {report.c_lin:.10g}")
    out_dir = Path(args.out_dir)
    csv_path = out_dir / "qo_analysis.csv"
    d_padded = [math.nan] + list(report.d_of_n)
    rows = []
    for n in range(len(report.c_of_n)):
        d_val = d_padded[n] if n < len(d_padded) else math.nan
        rows.append((n, report.c_of_n[n], report.c_bound, d_val))
    _write_csv(csv_path, ["N", "c_empirical_max", "c_bound", "d_of_n"], rows)
    print(f"wrote {csv_path}")
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="qoadapt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_lu = sub.add_parser("hilbert-lu", help="LU factor growth of the modified Hilbert matrix")
    p_lu.add_argument("--sizes", type=_parse_sizes,
                      default=[2**k for k in range(4, 13)],
                      help="comma-separated matrix sizes (default 16..4096 dyadic)")
    p_lu.add_argument("--block-size", type=int, default=1)
    p_lu.add_argument("--identity", action="store_true",
                      help="use the identity family instead (all ratios 1)")
    p_lu.add_argument("--out-dir", default=".")
    p_lu.add_argument("--svg", action="store_true")
    p_lu.add_argument("--seed", type=int, default=0)
    p_lu.set_defaults(func=_cmd_hilbert_lu)

    p_heat = sub.add_parser("heat-adaptive", help="adaptive Crank-Nicolson heat experiment")
    p_heat.add_argument("--spatial", choices=("1d", "2d"), default="1d")
    p_heat.add_argument("--n-space", type=int, default=64)
    p_heat.add_argument("--theta", type=float, default=0.5)
    p_heat.add_argument("--steps", type=int, default=24,
                        help="adaptive iterations (trace length)")
    p_heat.add_argument("--steps-uniform", type=int, default=10)
    p_heat.add_argument("--t-end", type=float, default=1.0)
    p_heat.add_argument("--seed", type=int, default=0)
    p_heat.add_argument("--out-dir", default=".")
    p_heat.add_argument("--svg", action="store_true")
    p_heat.set_defaults(func=_cmd_heat_adaptive)

    p_qo = sub.add_parser("qo-analyze", help="quasi-orthogonality analysis of a hierarchy")
    src = p_qo.add_mutually_exclusive_group(required=True)
    src.add_argument("--bundle", help="matrix-bundle file")
    src.add_argument("--heat", action="store_true", help="build the hierarchy from a heat run")
    p_qo.add_argument("--spatial", choices=("1d", "2d"), default="1d")
    p_qo.add_argument("--n-space", type=int, default=17)
    p_qo.add_argument("--levels", type=int, default=6)
    p_qo.add_argument("--theta", type=float, default=0.5)
    p_qo.add_argument("--t-end", type=float, default=1.0)
    p_qo.add_argument("--tol", type=float, default=1e-8, help="basis rank tolerance")
    p_qo.add_argument("--kappa", type=float, default=None)
    p_qo.add_argument("--c-est", type=float, default=None)
    p_qo.add_argument("--c-rel", type=float, default=None)
    p_qo.add_argument("--c-mon", type=float, default=None)
    p_qo.add_argument("--seed", type=int, default=0)
    p_qo.add_argument("--out-dir", default=".")
    p_qo.set_defaults(func=_cmd_qo_analyze)
    return parser


def _validate(parser: _Parser, args) -> None:
    if args.command == "heat-adaptive" and not 0.0 < args.theta < 1.0:
        parser.error(f"--theta must lie in (0, 1), got {args.theta}")
    if args.command == "heat-adaptive" and (args.steps < 0 or args.steps_uniform < 0):
        parser.error("step counts must be >= 0")
    if args.command == "qo-analyze" and args.heat and not 0.0 < args.theta < 1.0:
        parser.error(f"--theta must lie in (0, 1), got {args.theta}")
    if args.command == "hilbert-lu" and args.block_size < 1:
        parser.error("--block-size must be >= 1")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
