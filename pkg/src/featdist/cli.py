"""Command-line entry point: evaluate, attack, sweep, report.

Exit codes: 0 success, 1 validation failure (the message names the offending
field or cell), 2 numerical failure (names the failing computation).  All
randomness flows from the recipe seed (optionally overridden by --seed); no
wall clock or OS entropy touches any code path.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import FeatdistError, NumericalError, ValidationError
from .recipe import (
    DEFAULT_SWEEP_SIZES,
    load_recipe,
    run_attack,
    run_evaluate,
    run_sweep,
)
from .report import parse_report, render_report


def _default_threads() -> int:
    return os.cpu_count() or 1


def _emit(data: bytes, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "wb") as fh:
            fh.write(data)


def _apply_overrides(recipe, args):
    if getattr(args, "seed", None) is not None:
        recipe = replace(recipe, seed=args.seed)
    if getattr(args, "format", None) is not None:
        recipe = replace(recipe, format=args.format)
    if getattr(args, "out", None) is not None:
        recipe = replace(recipe, output=args.out)
    return recipe


def _write_report(report, recipe) -> None:
    data = render_report(report, format=recipe.format)
    _emit(data, recipe.output)


def cmd_evaluate(args) -> int:
    recipe = _apply_overrides(load_recipe(args.recipe), args)
    report = run_evaluate(recipe, threads=args.threads)
    _write_report(report, recipe)
    return 0


def cmd_attack(args) -> int:
    recipe = _apply_overrides(load_recipe(args.recipe), args)
    report = run_attack(
        recipe,
        pool_manifest_path=args.pool,
        m=args.m,
        pool_labels_path=args.pool_labels,
        real_labels_path=args.real_labels,
        threads=args.threads,
    )
    _write_report(report, recipe)
    return 0


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ValidationError(f"--sizes must be comma-separated integers: {text!r}") from exc
    if not sizes:
        raise ValidationError("--sizes is empty")
    return sizes


def cmd_sweep(args) -> int:
    recipe = _apply_overrides(load_recipe(args.recipe), args)
    sizes = _parse_sizes(args.sizes) if args.sizes else list(DEFAULT_SWEEP_SIZES)
    report = run_sweep(recipe, sizes=sizes, threads=args.threads)
    _write_report(report, recipe)
    return 0


def cmd_report(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise ValidationError(f"report not found: {path}")
    report = parse_report(path.read_bytes())
    _emit(render_report(report, format=args.format), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featdist",
        description="Distributional distances between real and synthesized feature sets",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--recipe", required=True, help="recipe JSON path")
        p.add_argument("--out", default=None, help="output path (default: recipe output or stdout)")
        p.add_argument("--format", choices=["json", "csv", "table"], default=None)
        p.add_argument("--threads", type=int, default=_default_threads())
        p.add_argument("--seed", type=int, default=None, help="override the recipe seed")

    p_eval = sub.add_parser("evaluate", help="run every metric cell in a recipe")
    common(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_attack = sub.add_parser("attack", help="histogram-matching attack harness")
    common(p_attack)
    p_attack.add_argument("--pool", required=True, help="pool feature manifest JSON")
    p_attack.add_argument("--pool-labels", default=None, help="pool labels NPY (default: <features>.labels.npy)")
    p_attack.add_argument("--real-labels", default=None, help="real labels NPY (default: <features>.labels.npy)")
    p_attack.add_argument("--m", type=int, required=True, help="subset size")
    p_attack.set_defaults(func=cmd_attack)

    p_sweep = sub.add_parser("sweep", help="sample-efficiency sweep")
    common(p_sweep)
    p_sweep.add_argument(
        "--sizes",
        default=None,
        help=f"comma-separated sizes (default: {','.join(map(str, DEFAULT_SWEEP_SIZES))})",
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="re-render an existing JSON report")
    p_report.add_argument("--input", required=True, help="report JSON path")
    p_report.add_argument("--format", choices=["json", "csv", "table"], default="table")
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, FeatdistError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
