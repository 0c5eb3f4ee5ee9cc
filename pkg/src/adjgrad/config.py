"""Run configuration and the problem wrapper shared by the CLI commands.

A configuration is a JSON object::

    {
      "system": "pendulum" | "ballbeam",
      "params": {"Ts": 0.01, ...},
      "mode": "deterministic" | "stochastic",
      "horizon": 20,
      "x0": [0.3, 0.0],
      "chain": {"modes": [[0.01], [0.02], [0.1]],
                "transition": [[...], ...], "initial": [...]},
      "init": "zeros" | {"kind": "constant", "value": 0.5}
              | {"kind": "random", "scale": 1.0},
      "seed": 0, "workers": 1, "repetitions": 1000, "warmup": 100,
      "sizes": [10, 20, 40], "output": "result.json"
    }

``chain`` is required in stochastic mode only. Keys starting with an
underscore are ignored, so configs can carry comments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .grad_core import cost_det, grad_det
from .grad_tree import cost_tree, grad_tree
from .model import Model, model_from_config
from .oracle import FdSpec, fd_grad_det, fd_grad_tree
from .scenario_tree import MarkovChain, ScenarioTree, build_from_markov, chain_from_json

MODES = ("deterministic", "stochastic")
KNOWN_KEYS = {"system", "params", "mode", "horizon", "x0", "chain", "init", "seed",
              "workers", "repetitions", "warmup", "sizes", "output"}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass
class RunConfig:
    system: str
    horizon: int
    x0: np.ndarray
    mode: str = "deterministic"
    params: dict = field(default_factory=dict)
    chain: MarkovChain | None = None
    init: str = "zeros"
    init_value: float = 0.0
    seed: int = 0
    workers: int = 1
    repetitions: int = 1000
    warmup: int = 100
    sizes: list[int] | None = None
    output: str | None = None

    def model(self) -> Model:
        return model_from_config(self.system, self.params)

    def problem(self, horizon: int | None = None) -> "Problem":
        horizon = self.horizon if horizon is None else horizon
        model = self.model()
        if len(self.x0) != model.n_x:
            raise ConfigError(f"x0 has {len(self.x0)} entries, {self.system} has n_x={model.n_x}")
        tree = None
        if self.mode == "stochastic":
            tree = build_from_markov(self.chain, horizon)
            if tree.n_w != model.n_w:
                raise ConfigError(f"chain modes have dimension {tree.n_w}, model expects {model.n_w}")
        return Problem(model, self.x0, horizon, tree, self.workers)

    def initial_controls(self, problem: "Problem") -> np.ndarray:
        n = problem.num_controls
        if self.init == "zeros":
            return np.zeros(n)
        if self.init == "constant":
            return np.full(n, self.init_value)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(-self.init_value, self.init_value, n)


def _require(doc: dict, key: str, kind, what: str):
    if key not in doc:
        raise ConfigError(f"missing required field {key!r}")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, kind):
        raise ConfigError(f"{key!r} must be {what}, got {value!r}")
    return value


def _positive_int(doc: dict, key: str, default: int, minimum: int = 1) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key!r} must be an integer >= {minimum}, got {value!r}")
    return value


def parse_config(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = {k for k in doc if not k.startswith("_")} - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration fields {sorted(unknown)}")

    system = _require(doc, "system", str, "a string")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    mode = doc.get("mode", "deterministic")
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {MODES}, got {mode!r}")
    horizon = _require(doc, "horizon", int, "an integer")
    if horizon < 1:
        raise ConfigError("'horizon' must be at least 1")
    x0 = _require(doc, "x0", list, "an array")
    try:
        x0 = np.asarray(x0, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError("'x0' must be an array of numbers") from None

    chain = None
    if mode == "stochastic":
        chain_doc = doc.get("chain")
        if not isinstance(chain_doc, dict):
            raise ConfigError("stochastic mode requires a 'chain' object")
        try:
            chain = chain_from_json(chain_doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid chain: {exc}") from None

    init, init_value = doc.get("init", "zeros"), 0.0
    if isinstance(init, dict):
        kind = init.get("kind")
        if kind == "constant":
            init_value = init.get("value")
        elif kind == "random":
            init_value = init.get("scale", 1.0)
        if isinstance(init_value, bool) or not isinstance(init_value, (int, float)):
            raise ConfigError(f"bad 'init' specification {init!r}")
        init = kind
    if init not in ("zeros", "constant", "random"):
        raise ConfigError(f"'init' must be zeros, constant or random, got {init!r}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"'seed' must be an unsigned 64-bit integer, got {seed!r}")
    sizes = doc.get("sizes")
    if sizes is not None and (not isinstance(sizes, list) or not all(
            isinstance(s, int) and not isinstance(s, bool) and s >= 1 for s in sizes)):
        raise ConfigError(f"'sizes' must be a list of positive integers, got {sizes!r}")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("'output' must be a path string")

    cfg = RunConfig(
        system=system, horizon=horizon, x0=x0, mode=mode, params=params, chain=chain,
        init=init, init_value=float(init_value), seed=seed,
        workers=_positive_int(doc, "workers", 1),
        repetitions=_positive_int(doc, "repetitions", 1000),
        warmup=_positive_int(doc, "warmup", 100, minimum=0),
        sizes=sizes, output=output,
    )
    try:
        cfg.model()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    return parse_config(doc)


class Problem:
    """Deterministic or tree-structured OCP behind one interface."""

    def __init__(self, model: Model, x0, horizon: int, tree: ScenarioTree | None = None,
                 workers: int = 1):
        self.model = model
        self.x0 = np.asarray(x0, dtype=float)
        self.horizon = horizon
        self.tree = tree
        self.workers = workers

    @property
    def stochastic(self) -> bool:
        return self.tree is not None

    @property
    def num_blocks(self) -> int:
        return self.tree.num_nonleaf_nodes if self.stochastic else self.horizon

    @property
    def num_controls(self) -> int:
        return self.num_blocks * self.model.n_u

    @property
    def num_nodes(self) -> int:
        return self.tree.num_nodes if self.stochastic else self.horizon + 1

    def cost(self, u) -> float:
        if self.stochastic:
            return cost_tree(self.model, self.tree, self.x0, u)
        return cost_det(self.model, self.x0, u)

    def gradient(self, u, model: Model | None = None):
        """Full result object of the adjoint sweep (``grad``, ``states``, ``cost``)."""
        model = model or self.model
        if self.stochastic:
            return grad_tree(model, self.tree, self.x0, u, self.workers)
        return grad_det(model, self.x0, u)

    def fd_gradient(self, u, spec: FdSpec = FdSpec()) -> np.ndarray:
        if self.stochastic:
            return fd_grad_tree(self.model, self.tree, self.x0, u, spec)
        return fd_grad_det(self.model, self.x0, u, spec)
