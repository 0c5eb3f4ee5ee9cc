"""Wall-clock benchmarks of the gradient sweeps and a demo descent solver."""

from __future__ import annotations

import csv
import gc
import io
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .config import Problem, RunConfig
from .model import OPERATIONS, CountingModel


@dataclass
class BenchRecord:
    label: str
    size: int
    num_nodes: int
    repetitions: int
    mean_ns: float
    min_ns: int
    calls: dict

    def row(self) -> dict:
        d = asdict(self)
        calls = d.pop("calls")
        d.update({f"calls_{op}": calls.get(op, 0) for op in OPERATIONS})
        d["calls_total"] = sum(calls.values())
        return d


BENCH_FIELDS = (["label", "size", "num_nodes", "repetitions", "mean_ns", "min_ns"]
                + [f"calls_{op}" for op in OPERATIONS] + ["calls_total"])


def time_gradients(problems, controls, repetitions: int,
                   warmup: int = 100) -> list[tuple[float, int]]:
    """Mean and minimum nanoseconds per gradient evaluation, per problem.

    Repetitions are interleaved round-robin across the problems so that
    slow periods of the machine are shared between all sizes. Each call is
    timed on its own with a monotonic clock; warm-up runs are discarded and
    garbage collection is paused while timing.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    pairs = list(zip(problems, controls))
    for problem, u in pairs:
        for _ in range(warmup):
            problem.gradient(u)
    clock = time.perf_counter_ns
    totals = [0] * len(pairs)
    best = [None] * len(pairs)
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repetitions):
            for k, (problem, u) in enumerate(pairs):
                start = clock()
                problem.gradient(u)
                elapsed = clock() - start
                totals[k] += elapsed
                if best[k] is None or elapsed < best[k]:
                    best[k] = elapsed
    finally:
        if gc_was_enabled:
            gc.enable()
    return [(total / repetitions, b) for total, b in zip(totals, best)]


def time_gradient(problem: Problem, u, repetitions: int, warmup: int = 100) -> tuple[float, int]:
    return time_gradients([problem], [u], repetitions, warmup)[0]


def count_calls(problem: Problem, u) -> dict:
    counter = CountingModel(problem.model)
    problem.gradient(u, model=counter)
    return dict(counter.counts)


def run_bench(cfg: RunConfig, sizes, repetitions: int | None = None,
              warmup: int | None = None) -> list[BenchRecord]:
    """One record per horizon (deterministic) or tree depth (stochastic).

    Inputs are drawn once per size from the configured seed, before timing.
    """
    reps = cfg.repetitions if repetitions is None else repetitions
    warm = cfg.warmup if warmup is None else warmup
    problems, controls = [], []
    for size in sizes:
        problem = cfg.problem(horizon=size)
        rng = np.random.default_rng([cfg.seed, size])
        problems.append(problem)
        controls.append(rng.uniform(-1.0, 1.0, problem.num_controls))
    timings = time_gradients(problems, controls, reps, warm)
    return [
        BenchRecord(label=f"{cfg.system}-{cfg.mode}", size=size, num_nodes=problem.num_nodes,
                    repetitions=reps, mean_ns=mean_ns, min_ns=min_ns,
                    calls=count_calls(problem, u))
        for size, problem, u, (mean_ns, min_ns) in zip(sizes, problems, controls, timings)
    ]


def bench_csv(records, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    writer = csv.DictWriter(buf, fieldnames=BENCH_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def fit_affine(x, y) -> tuple[float, float, float]:
    """Least-squares ``y ~ a + b x``; returns ``(a, b, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), float(r2)


@dataclass
class SolveStep:
    iteration: int
    cost: float
    grad_norm: float
    step: float


def solve(problem: Problem, u0, steps: int = 100, alpha0: float = 1.0,
          armijo: float = 1e-4, shrink: float = 0.5, min_step: float = 1e-16):
    """Gradient descent with backtracking line search.

    A step is accepted only under the Armijo condition, so the cost trace
    is non-increasing. Stops early at a zero gradient or when backtracking
    cannot find a decrease. Returns the trace and the final controls.
    """
    u = np.array(u0, dtype=float)
    res = problem.gradient(u)
    cost, g = res.cost, res.grad
    gnorm2 = float(g @ g)
    trace = [SolveStep(0, cost, math.sqrt(gnorm2), 0.0)]
    step = alpha0
    for k in range(1, steps + 1):
        if gnorm2 == 0.0:
            break
        step = min(alpha0, 2.0 * step)
        while step >= min_step:
            trial = u - step * g
            trial_cost = problem.cost(trial)
            if trial_cost <= cost - armijo * step * gnorm2:
                break
            step *= shrink
        else:
            break
        u = trial
        res = problem.gradient(u)
        cost, g = res.cost, res.grad
        gnorm2 = float(g @ g)
        trace.append(SolveStep(k, cost, math.sqrt(gnorm2), step))
    return trace, u


def solve_csv(trace, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# seed={seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "cost", "grad_norm", "step"])
    for s in trace:
        writer.writerow([s.iteration, repr(s.cost), repr(s.grad_norm), repr(s.step)])
    return buf.getvalue()
