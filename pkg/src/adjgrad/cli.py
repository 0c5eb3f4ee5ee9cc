"""Command-line front end: ``adjgrad {grad,check,bench,solve}``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import bench_csv, run_bench, solve, solve_csv
from .config import ConfigError, load_config
from .oracle import FdSpec, relative_deviation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

log = logging.getLogger("adjgrad")


class NumericalFailure(RuntimeError):
    pass


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _apply_overrides(cfg, args):
    if getattr(args, "workers", None) is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg.workers = args.workers
    if getattr(args, "reps", None) is not None:
        if args.reps < 1:
            raise ConfigError("--reps must be at least 1")
        cfg.repetitions = args.reps
    if getattr(args, "seed", None) is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.output = args.out
    return cfg


def _finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalFailure("non-finite values in cost or gradient")


def cmd_grad(cfg, args) -> int:
    problem = cfg.problem()
    u = cfg.initial_controls(problem)
    res = problem.gradient(u)
    _finite(res.cost, res.grad)
    doc = {
        "system": cfg.system,
        "mode": cfg.mode,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "num_nodes": problem.num_nodes,
        "cost": res.cost,
        "gradient": res.grad.tolist(),
    }
    if args.states:
        doc["states"] = res.states.tolist()
    text = json.dumps(doc, indent=2) + "\n"
    _emit(text, cfg.output)
    if cfg.output:
        print(f"cost {res.cost!r}  |grad| {float(np.linalg.norm(res.grad))!r}  -> {cfg.output}")
    return EXIT_OK


def cmd_check(cfg, args) -> int:
    spec = FdSpec(tol=args.tol)
    problem = cfg.problem()
    u = cfg.initial_controls(problem)
    if args.random_controls:
        u = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, problem.num_controls)
    grad = problem.gradient(u).grad
    fd = problem.fd_gradient(u, spec)
    _finite(grad, fd)
    dev = relative_deviation(grad, fd)
    worst = int(np.argmax(dev))
    ok = bool(dev[worst] <= spec.tol)
    print(f"{cfg.system} {cfg.mode} horizon={cfg.horizon} controls={grad.size}")
    print(f"max relative deviation {dev[worst]:.3e} (tol {spec.tol:.1e}) "
          f"at coordinate {worst}: adjoint {grad[worst]!r} fd {fd[worst]!r}")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_bench(cfg, args) -> int:
    sizes = args.sizes or cfg.sizes
    if not sizes:
        raise ConfigError("bench needs --sizes or a 'sizes' field in the config")
    records = run_bench(cfg, sizes, warmup=args.warmup)
    for rec in records:
        log.info("size %d: mean %.0f ns, min %d ns", rec.size, rec.mean_ns, rec.min_ns)
    _emit(bench_csv(records, cfg.seed), cfg.output)
    return EXIT_OK


def cmd_solve(cfg, args) -> int:
    problem = cfg.problem()
    trace, _ = solve(problem, cfg.initial_controls(problem), steps=args.steps,
                     alpha0=args.alpha0)
    _finite([s.cost for s in trace])
    if any(b.cost > a.cost for a, b in zip(trace, trace[1:])):
        raise NumericalFailure("cost increased during descent")
    _emit(solve_csv(trace, cfg.seed), cfg.output)
    return EXIT_OK


def _sizes(text: str) -> list[int]:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive integers")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adjgrad", description="Adjoint gradients for deterministic and scenario-tree OCPs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--workers", type=int, help="worker threads for the tree sweep")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="seed for random controls")
        p.set_defaults(func=func)
        return p

    p = add("grad", cmd_grad, "compute cost and gradient, write JSON")
    p.add_argument("--states", action="store_true", help="include node states")
    p = add("check", cmd_check, "compare the adjoint gradient with finite differences")
    p.add_argument("--tol", type=float, default=FdSpec.tol)
    p.add_argument("--random-controls", action="store_true",
                   help="check at seeded random controls instead of the configured init")
    p = add("bench", cmd_bench, "time gradient evaluations, write CSV")
    p.add_argument("--reps", type=int)
    p.add_argument("--sizes", type=_sizes, help="comma-separated horizons or tree depths")
    p.add_argument("--warmup", type=int)
    p = add("solve", cmd_solve, "gradient descent with backtracking, write cost trace CSV")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--alpha0", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if getattr(args, "tol", 1.0) <= 0:
            raise ConfigError("--tol must be positive")
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
