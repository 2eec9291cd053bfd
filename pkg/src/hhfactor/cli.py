"""Command-line driver: ``hhfactor <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

import numpy as np

from .experiments import (
    SweepSpec,
    fmt,
    run_bench,
    run_bounds,
    run_metric_demo,
    run_ortho_sweep,
    run_sym_sweep,
)
from .reflectors import FactoredSymmetric, apply, apply_symmetric, apply_transpose
from .serialization import deserialize

RUNNERS = {
    "ortho": run_ortho_sweep,
    "sym": run_sym_sweep,
    "bounds": run_bounds,
    "bench": run_bench,
    "metric": run_metric_demo,
}

DEFAULT_N = {"ortho": 32, "sym": 32, "bounds": 128, "bench": 1024, "metric": 10}
DEFAULT_H = {"ortho": 16, "sym": 8, "bounds": 16, "bench": 10, "metric": 3}


def _add_sweep_args(p: argparse.ArgumentParser, name: str) -> None:
    p.add_argument("--n", type=int, default=DEFAULT_N[name], help="matrix dimension")
    p.add_argument("--h", type=int, default=None, help="single reflector count")
    p.add_argument("--h-min", type=int, default=None, help="first h of a sweep")
    p.add_argument("--h-max", type=int, default=None, help="last h of a sweep")
    p.add_argument("--h-step", type=int, default=1)
    p.add_argument("--method", default=None, help="comma-separated method list")
    p.add_argument("--ensemble", default="indefinite", choices=["indefinite", "posdef"])
    p.add_argument("--seeds", type=int, default=1, help="number of realizations")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--iters", type=int, default=100, help="outer/training iterations")
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    p.add_argument("--trace", default=None, help="write per-iteration traces (sym)")
    p.add_argument("--workers", type=int, default=1, help="process pool size")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hhfactor",
        description="Approximate matrices with few Householder reflectors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_sweep_args(sub.add_parser("ortho", help="orthonormal approximation sweep"), "ortho")
    _add_sweep_args(sub.add_parser("sym", help="symmetric factorization sweep"), "sym")
    pb = sub.add_parser("bounds", help="Monte-Carlo means against closed-form bounds")
    _add_sweep_args(pb, "bounds")
    pb.add_argument("--kind", default="ortho", choices=["ortho", "sym"])
    _add_sweep_args(sub.add_parser("bench", help="dense vs factored apply"), "bench")
    pm = sub.add_parser("metric", help="metric-learning demo")
    _add_sweep_args(pm, "metric")
    pm.add_argument("--data", default=None, help="CSV dataset, label in last column")
    pm.add_argument("--header", action="store_true", help="CSV has a header row")
    pm.add_argument("--points", type=int, default=600, help="synthetic dataset size")

    pa = sub.add_parser("apply", help="apply a stored factor to a vector")
    pa.add_argument("factor", help="HHF1 factor file")
    pa.add_argument("vector", help="CSV file with the vector entries")
    pa.add_argument("--transpose", action="store_true", help="apply the transpose")
    return parser


def _spec_from_args(args: argparse.Namespace) -> SweepSpec:
    if args.h is not None and (args.h_min is not None or args.h_max is not None):
        raise ValueError("use either --h or --h-min/--h-max")
    if args.h is not None:
        h_min, h_max = args.h, None
    else:
        h_min = args.h_min if args.h_min is not None else DEFAULT_H[args.command]
        h_max = args.h_max
    methods = tuple(m.strip() for m in args.method.split(",")) if args.method else ()
    extra = {}
    if args.command == "bounds":
        extra["kind"] = args.kind
    if args.command == "metric":
        extra.update(data=args.data, header=args.header, points=args.points)
    return SweepSpec(
        experiment=args.command,
        n=args.n,
        h_min=h_min,
        h_max=h_max,
        h_step=args.h_step,
        methods=methods,
        ensemble=args.ensemble,
        seeds=args.seeds,
        base_seed=args.seed,
        out=args.out,
        iters=args.iters,
        trace=args.trace,
        workers=args.workers,
        extra=extra,
    )


def _read_vector(path: str) -> np.ndarray:
    with open(path) as fh:
        text = fh.read().replace(",", " ").split()
    if not text:
        raise ValueError(f"{path}: empty vector")
    return np.array([float(t) for t in text])


def _run_apply(args: argparse.Namespace) -> str:
    with open(args.factor, "rb") as fh:
        obj = deserialize(fh)
    x = _read_vector(args.vector)
    if isinstance(obj, FactoredSymmetric):
        y = apply_symmetric(obj, x)
    elif args.transpose:
        y = apply_transpose(obj, x)
    else:
        y = apply(obj, x)
    return "\n".join(fmt(float(v)) for v in y) + "\n"


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "apply":
            text = _run_apply(args)
        else:
            spec = _spec_from_args(args)
            text = RUNNERS[args.command](spec)
            if spec.out is not None:
                text = ""
    except (ValueError, OSError) as exc:
        print(f"hhfactor: error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
