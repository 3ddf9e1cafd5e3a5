from __future__ import annotations

import argparse
import os
import sys
from typing import Any, Sequence

from pydantic import ValidationError

from backend.dirac_waveguide.config import logger, settings
from backend.dirac_waveguide.models import SUBCOMMANDS
from backend.dirac_waveguide.parsers import RunConfigParseError, load_run_config


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
_K_GRID_POINTS = 41


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dirac-waveguide",
        description="Dirac operator with infinite-mass boundary conditions on curved planar waveguides",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="YAML run configuration")
    parser.add_argument("--epsilon", type=float, help="waveguide half-width ε")
    parser.add_argument("--mass", type=float, help="mass m")
    parser.add_argument("--p", dest="p_range", help="transverse mode range A..B (or a single index)")
    parser.add_argument("--k-max", type=float, help="dispersion k-grid on [0, K]")
    parser.add_argument("--n-s", type=int, help="grid nodes along s")
    parser.add_argument("--n-t", type=int, help="grid nodes along t (odd)")
    parser.add_argument("--S", dest="S", type=float, help="truncation half-length S")
    parser.add_argument("--count", type=int, help="number of eigenpairs")
    parser.add_argument("--seed", type=int, help="solver seed")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--format", dest="formats", help="comma separated subset of csv,json,svg")
    parser.add_argument("--threads", type=int, help="BLAS/OpenMP thread count")
    parser.add_argument("--export-matrices", action="store_true", help="write A and B as Matrix Market")
    return parser


def _parse_p_range(raw: str) -> list[int]:
    text = raw.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            first, last = int(lo), int(hi)
            if last < first:
                raise ValueError
            return list(range(first, last + 1))
        return [int(text)]
    except ValueError as exc:
        raise RunConfigParseError(f"--p expects A..B with A <= B, got {raw!r}") from exc


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if args.epsilon is not None:
        out["epsilon"] = args.epsilon
    if args.mass is not None:
        out["mass"] = args.mass
    if args.p_range:
        out.setdefault("transverse", {})["p_values"] = _parse_p_range(args.p_range)
    if args.k_max is not None:
        if args.k_max <= 0:
            raise RunConfigParseError(f"--k-max must be positive, got {args.k_max}")
        step = args.k_max / (_K_GRID_POINTS - 1)
        out["sweep"] = {"variable": "k", "values": [i * step for i in range(_K_GRID_POINTS)]}
    grid: dict[str, Any] = {}
    if args.n_s is not None:
        grid["n_s"] = args.n_s
    if args.n_t is not None:
        grid["n_t"] = args.n_t
    if args.S is not None:
        grid["S_override"] = args.S
    if grid:
        out["grid"] = grid
    solver: dict[str, Any] = {}
    if args.count is not None:
        solver["count"] = args.count
    if args.seed is not None:
        solver["seed"] = args.seed
    if solver:
        out["solver"] = solver
    output: dict[str, Any] = {}
    if args.out:
        output["dir"] = args.out
    if args.formats:
        output["formats"] = [f.strip() for f in args.formats.split(",") if f.strip()]
    if args.export_matrices:
        output["export_matrices"] = True
    if output:
        out["output"] = output
    return out


def apply_thread_limit(threads: int | None) -> None:
    """Must run before numpy is first imported."""
    n = threads if threads is not None else settings.threads
    if not n or n <= 0:
        return
    for name in _THREAD_VARS:
        os.environ[name] = str(n)


def _paint(text: str, code: str) -> str:
    if settings.no_color or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    apply_thread_limit(args.threads)

    try:
        config = load_run_config(args.config, overrides_from_args(args))
    except RunConfigParseError as exc:
        where = f" (line {exc.line})" if exc.line else ""
        print(f"config error{where}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    from backend.dirac_waveguide.services.run_service import run
    from backend.dirac_waveguide.storage import ArtifactWriteError, emit

    try:
        result = run(args.subcommand, config)
    except ValueError as exc:
        # 几何、证书等模块的输入错误都派生自 ValueError
        print(f"{args.subcommand}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:
        logger.exception("%s failed", args.subcommand)
        return EXIT_FAILURE

    try:
        written = emit(result, config.output.formats, config.output.dir)
    except ArtifactWriteError as exc:
        print(f"{args.subcommand}: {exc}", file=sys.stderr)
        return EXIT_FAILURE

    if result.error is not None:
        print(f"{args.subcommand}: solver did not converge: {result.error}", file=sys.stderr)
        print(_paint(f"{args.subcommand}: partial results, {len(written)} file(s) in {config.output.dir}", "33"))
        return EXIT_NOT_CONVERGED
    print(_paint(f"{args.subcommand}: ok, {len(written)} file(s) in {config.output.dir}", "32"))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
