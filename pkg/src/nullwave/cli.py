"""Command-line entry point.

Exit codes: 0 success, 1 I/O or malformed data file, 2 the pointwise solve
for ``d_t^2 u`` failed during a run, 3 invalid configuration or usage.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .diagnostics import fit_growth
from .experiment import (
    ConfigError,
    ScenarioConfig,
    initial_profiles,
    format_summary,
    load_config,
    read_table,
    run,
)
from .grid import GridField
from .nullform import MINKOWSKI, is_null, symmetrize
from .solver import WaveState
from .transform import (
    DegenerateOperatorError,
    QuasilinearIVP,
    WrongCaseError,
    transform_case_a,
    transform_case_b,
    transform_prototype,
)

EXIT_OK, EXIT_IO, EXIT_NONCONVERGENCE, EXIT_CONFIG = 0, 1, 2, 3

log = logging.getLogger("nullwave")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg = dataclasses.replace(cfg, output_path=args.output)
    summary = run(cfg)
    if not args.quiet:
        print(format_summary(summary.reports, summary, cfg), end="")
        print(f"wall_time: {summary.wall_time:.2f}s")
    return summary.exit_code


def _cmd_check_tensor(args) -> int:
    tensor = nio.read_tensor(args.tensor)
    null = is_null(tensor, args.tol)
    sym = symmetrize(tensor)
    if args.output:
        nio.write_tensor(sym, args.output)
    if not args.quiet:
        print(f"null: {null}")
        print(f"pair_symmetric: {tensor.has_pair_symmetry()}")
        if args.output:
            print(f"symmetrized tensor written to {args.output}")
    return EXIT_OK


def _transform_grid_config(args) -> ScenarioConfig:
    if args.config:
        return load_config(args.config)
    return ScenarioConfig(scenario="quasi_case_b")


def _cmd_transform(args) -> int:
    form = nio.read_quasi(args.quasi)
    cfg = _transform_grid_config(args)
    grid = cfg.grid
    if form.degenerate:
        log.warning("A = 0: the equation reduces to the linear wave equation")
    bump, ring = initial_profiles(cfg)
    v0, v1 = GridField(grid, bump), GridField(grid, ring)
    if args.case == "prototype":
        if not (np.array_equal(form.a, [1.0, 0.0, 0.0]) and np.array_equal(form.m, MINKOWSKI)):
            log.warning("case prototype ignores the form in %s and uses A = (1, 0, 0), m = diag(1, -1, -1)",
                        args.quasi)
        ivp = transform_prototype(v0, v1)
    elif args.case == "a":
        if form.a[1] == 0.0:
            raise ConfigError("case a needs A1 != 0")
        ivp = transform_case_a(QuasilinearIVP(form, v0, v1))
    else:
        ivp = transform_case_b(QuasilinearIVP(form, v0, v1))
    out = args.output or "transformed.dat"
    nio.write_checkpoint(WaveState.from_fields(ivp.phi, ivp.psi), out, fmt=args.format)
    if not args.quiet:
        for w in ivp.warnings:
            print(f"warning: {w}")
        print(f"wrote (phi, psi) on n={grid.n} L={grid.half_width:.6g} to {out} [{args.format}]")
    return EXIT_OK


def _cmd_fit(args) -> int:
    rows = read_table(args.csv)
    lines = []
    for channel in ("E1", "E2"):
        series = [(r["t"], r[channel]) for r in rows if r["t"] >= args.t_min]
        try:
            fit = fit_growth(series)
        except ValueError as exc:
            lines.append(f"{channel}: no fit ({exc})")
            continue
        lines.append(f"{channel}: gamma_hat={fit.gamma_hat!r} window={fit.t_window} "
                     f"residual={fit.residual!r} samples={fit.samples}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    if not args.quiet:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="output file")
    common.add_argument("--format", choices=("csv", "binary"), default="binary",
                        help="encoding for field output (default: binary)")
    common.add_argument("--quiet", "-q", action="store_true", help="suppress console output")

    parser = argparse.ArgumentParser(prog="nullwave", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run a scenario from a key=value config file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("check-tensor", parents=[common], help="test a coefficient file for the null condition")
    p.add_argument("tensor")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=_cmd_check_tensor)

    p = sub.add_parser("transform", parents=[common],
                       help="build fully nonlinear initial data from a quasilinear form")
    p.add_argument("quasi")
    p.add_argument("--case", choices=("a", "b", "prototype"), required=True)
    p.add_argument("--config", help="config file supplying grid and data profile")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("fit", parents=[common], help="fit power-law growth to a report CSV")
    p.add_argument("csv")
    p.add_argument("--t-min", type=float, default=1.0)
    p.set_defaults(func=_cmd_fit)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage, which would read as a solver failure
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, WrongCaseError, DegenerateOperatorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, nio.FormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # read_table raises plain ValueError for a wrong header
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
