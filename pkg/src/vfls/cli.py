"""Command line entry point.

Exit codes: 0 when a run converges (or a utility command succeeds), 2 when a
run stops at its iteration cap, 1 on any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .benchmarks import benchmark_config, benchmark_names
from .config import ConfigError, ProblemConfig, load_config
from .driver import build_problem, run_optimization
from .fem import (
    ReducedFactorization,
    assemble_stiffness,
    element_stresses,
    solve_equilibrium,
)
from .gradcheck import run_all
from .outputs import write_outputs

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ITERATION_CAP = 2


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (default: from the config)")
    parser.add_argument("--max-iter", type=int, default=None,
                        help="override the iteration cap")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress per-iteration progress lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vfls",
        description="Level set topology optimization with B-spline velocity "
                    "fields under stress and buckling constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="optimize the problem in a config file")
    run_p.add_argument("config", type=Path, help="path to a key = value config file")
    _add_run_options(run_p)

    check_p = sub.add_parser(
        "check-gradients",
        help="finite-difference verification of the gradients on a small "
             "fixture derived from the config",
    )
    check_p.add_argument("config", type=Path)

    bench_p = sub.add_parser("benchmarks", help="built-in benchmark problems")
    bench_sub = bench_p.add_subparsers(dest="benchmark_command", required=True)
    bench_sub.add_parser("list", help="list benchmark names")
    bench_run = bench_sub.add_parser("run", help="run a named benchmark")
    bench_run.add_argument("name", help="benchmark name (see: benchmarks list)")
    _add_run_options(bench_run)
    return parser


def _progress_printer(record) -> None:
    print(
        f"iter {record.iteration:4d}  V={record.volume:.6f}  "
        f"sigma_pm={record.sigma_pm:.6g}  ks_mu={record.ks_mu:.6g}  "
        f"lambda1={record.lambda1:.6g}  rel={record.rel_change:.3g}"
    )


def _final_von_mises(problem, density):
    k = assemble_stiffness(problem.mesh, density, problem.material)
    fact = ReducedFactorization(k, problem.mesh)
    u = solve_equilibrium(k, problem.mesh, problem.loads_stress, fact)
    return element_stresses(problem.mesh, u, density, problem.material).von_mises


def _execute(config: ProblemConfig, out, max_iter, quiet: bool) -> int:
    if max_iter is not None:
        if max_iter < 0:
            raise ConfigError("run.max_iterations: must be nonnegative")
        config = dataclasses.replace(config, max_iterations=max_iter)
    if out is not None:
        config = dataclasses.replace(config, out_dir=str(out))
    config.validate()

    problem = build_problem(config)
    progress = None if quiet else _progress_printer
    result = run_optimization(problem, progress=progress)

    von_mises = None
    if config.stress_constraint:
        von_mises = _final_von_mises(problem, result.density)
    paths = write_outputs(
        result.history,
        result.density,
        result.levelset,
        problem.mesh,
        config.out_dir,
        von_mises=von_mises,
        vtk=config.write_vtk,
    )
    final_volume = float(result.density.mean()) if result.density.size else 0.0
    print(
        f"{result.status} after {result.iterations} iteration(s), "
        f"final volume fraction {final_volume:.6f}"
    )
    print("wrote: " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK if result.status == "converged" else EXIT_ITERATION_CAP


def _run_checks(config: ProblemConfig) -> int:
    results = run_all(config)
    width = max(len(r.name) for r in results)
    all_passed = True
    for r in results:
        flag = "PASS" if r.passed else "FAIL"
        print(
            f"{r.name:<{width}}  max rel error {r.max_rel_error:.3e}  "
            f"tolerance {r.tolerance:.0e}  {flag}"
        )
        all_passed &= r.passed
    return EXIT_OK if all_passed else EXIT_ERROR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _execute(load_config(args.config), args.out, args.max_iter,
                            args.quiet)
        if args.command == "check-gradients":
            return _run_checks(load_config(args.config))
        if args.command == "benchmarks":
            if args.benchmark_command == "list":
                for name in benchmark_names():
                    print(name)
                return EXIT_OK
            config = benchmark_config(args.name)
            return _execute(config, args.out, args.max_iter, args.quiet)
        raise AssertionError(f"unhandled command {args.command!r}")
    except (ConfigError, KeyError, OSError, RuntimeError, ValueError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
