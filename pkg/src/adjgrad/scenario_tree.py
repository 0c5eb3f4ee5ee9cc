"""Scenario trees generated by finite Markov chains.

Nodes are numbered breadth-first and stage-contiguously: every node of
stage ``t`` precedes every node of stage ``t + 1`` and the children of a
node occupy a contiguous, ascending id range. Probabilities are
unconditional, i.e. ``prob[i]`` is the probability that node ``i`` occurs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class InvalidChainError(ValueError):
    """Raised when a Markov chain violates stochasticity."""


class InvalidTreeError(ValueError):
    """Raised when an explicit tree description is inconsistent."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MarkovChain:
    """Disturbance modes, transition matrix and initial distribution.

    ``modes`` has shape ``(num_modes, n_w)``. ``transition[m, m2]`` is the
    probability of moving from mode ``m`` to ``m2``.
    """

    modes: np.ndarray
    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        modes = np.asarray(self.modes, dtype=float)
        if modes.ndim == 1:
            modes = modes[:, None]
        if modes.ndim != 2:
            raise InvalidChainError("modes must be a list of vectors")
        transition = np.asarray(self.transition, dtype=float)
        initial = np.asarray(self.initial, dtype=float)
        k = modes.shape[0]
        if transition.shape != (k, k):
            raise InvalidChainError(
                f"transition has shape {transition.shape}, expected ({k}, {k})")
        if initial.shape != (k,):
            raise InvalidChainError(
                f"initial has shape {initial.shape}, expected ({k},)")
        if np.any(transition < 0) or not np.all(np.isfinite(transition)):
            raise InvalidChainError("transition has negative or non-finite entries")
        bad_rows = np.flatnonzero(np.abs(transition.sum(axis=1) - 1.0) > PROB_TOL)
        if bad_rows.size:
            raise InvalidChainError(
                f"transition rows {bad_rows.tolist()} do not sum to 1")
        if np.any(initial < 0) or not np.all(np.isfinite(initial)):
            raise InvalidChainError("initial has negative or non-finite entries")
        if abs(initial.sum() - 1.0) > PROB_TOL:
            raise InvalidChainError(f"initial sums to {initial.sum()!r}, not 1")
        object.__setattr__(self, "modes", _readonly(modes))
        object.__setattr__(self, "transition", _readonly(transition))
        object.__setattr__(self, "initial", _readonly(initial))

    @property
    def num_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def n_w(self) -> int:
        return self.modes.shape[1]


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """Immutable stage-indexed tree topology.

    Build instances with :func:`build_from_markov` or
    :func:`build_explicit`; the constructor does not validate.

    Attributes:
        horizon: number of stages N; nodes live at stages 0..N.
        stage: stage index of every node.
        anc: ancestor of every node (``-1`` for the root).
        child_start, child_end: children of node ``i`` are
            ``range(child_start[i], child_end[i])`` (empty for leaves).
        prob: unconditional node probabilities.
        disturbance: disturbance realised on the edge into each node,
            shape ``(num_nodes, n_w)``; the root row is zero and unused.
        stage_start: nodes of stage ``t`` are
            ``range(stage_start[t], stage_start[t + 1])``.
    """

    horizon: int
    stage: np.ndarray
    anc: np.ndarray
    child_start: np.ndarray
    child_end: np.ndarray
    prob: np.ndarray
    disturbance: np.ndarray
    stage_start: np.ndarray

    @property
    def num_nodes(self) -> int:
        return int(self.stage.shape[0])

    @property
    def num_nonleaf_nodes(self) -> int:
        return int(self.stage_start[self.horizon])

    @property
    def n_w(self) -> int:
        return int(self.disturbance.shape[1])

    def nodes_at(self, t: int) -> range:
        return range(int(self.stage_start[t]), int(self.stage_start[t + 1]))

    def children(self, i: int) -> range:
        return range(int(self.child_start[i]), int(self.child_end[i]))

    def leaves(self) -> range:
        return self.nodes_at(self.horizon)

    def stage_counts(self) -> list[int]:
        return np.diff(self.stage_start).tolist()

    def path_to(self, j: int) -> list[int]:
        """Node ids from the root down to node ``j`` (inclusive)."""
        path = [j]
        while path[-1] != 0:
            path.append(int(self.anc[path[-1]]))
        return path[::-1]

    def same_as(self, other: "ScenarioTree") -> bool:
        """Exact structural and numerical equality."""
        return self.horizon == other.horizon and all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("stage", "anc", "child_start", "child_end", "prob",
                         "disturbance", "stage_start"))


def _finalise(horizon: int, anc: list[int], prob: list[float],
              disturbance: np.ndarray, counts: list[int]) -> ScenarioTree:
    num_nodes = len(anc)
    stage_start = np.zeros(horizon + 2, dtype=np.int64)
    stage_start[1:] = np.cumsum(counts)
    stage = np.repeat(np.arange(horizon + 1, dtype=np.int64), counts)
    anc_arr = np.asarray(anc, dtype=np.int64)
    child_start = np.zeros(num_nodes, dtype=np.int64)
    child_end = np.zeros(num_nodes, dtype=np.int64)
    # ancestors are nondecreasing within a stage, so children are contiguous
    for i in range(num_nodes - 1, 0, -1):
        p = anc_arr[i]
        if child_end[p] == 0:
            child_end[p] = i + 1
        child_start[p] = i
    return ScenarioTree(
        horizon=horizon,
        stage=_readonly(stage),
        anc=_readonly(anc_arr),
        child_start=_readonly(child_start),
        child_end=_readonly(child_end),
        prob=_readonly(np.asarray(prob, dtype=float)),
        disturbance=_readonly(disturbance),
        stage_start=_readonly(stage_start),
    )


def build_from_markov(chain: MarkovChain, horizon: int) -> ScenarioTree:
    """Expand a Markov chain into a scenario tree with ``horizon`` stages.

    Stage-1 nodes are the modes with positive initial probability; every
    node spawns one child per reachable mode. Zero-probability branches
    are pruned.
    """
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon!r}")
    if not isinstance(chain, MarkovChain):
        raise TypeError("chain must be a MarkovChain")

    anc = [-1]
    prob = [1.0]
    mode_of = [-1]
    counts = [1]
    frontier_lo, frontier_hi = 0, 1
    for t in range(1, horizon + 1):
        for i in range(frontier_lo, frontier_hi):
            if t == 1:
                weights = chain.initial
            else:
                weights = chain.transition[mode_of[i]]
            spawned = 0
            for m in np.flatnonzero(weights > 0):
                p = prob[i] * float(weights[m])
                if p == 0.0:
                    continue  # underflow; treated as a zero-probability branch
                anc.append(i)
                prob.append(p)
                mode_of.append(int(m))
                spawned += 1
            if not spawned:
                raise InvalidChainError(f"probability of every child of node {i} underflows")
        frontier_lo, frontier_hi = frontier_hi, len(anc)
        counts.append(frontier_hi - frontier_lo)

    disturbance = np.zeros((len(anc), chain.n_w))
    modes = np.asarray(mode_of[1:])
    disturbance[1:] = chain.modes[modes]
    return _finalise(horizon, anc, prob, disturbance, counts)


def _record_fields(rec: Any) -> tuple[int, float, Any]:
    if isinstance(rec, Mapping):
        return rec["anc"], rec["prob"], rec.get("disturbance", ())
    anc, p, *rest = rec
    return anc, p, rest[0] if rest else ()


def build_explicit(stages: Sequence[Iterable[Any]]) -> ScenarioTree:
    """Build and validate a tree from per-stage node records.

    ``stages[t - 1]`` lists the nodes of stage ``t`` (t = 1..N) in id
    order; the root (id 0, probability 1) is implicit. Each record is a
    mapping with keys ``anc``, ``prob`` and optionally ``disturbance``, or
    an ``(anc, prob[, disturbance])`` tuple.

    >>> tree = build_explicit([[(0, 0.6), (0, 0.4)],
    ...                        [(1, 0.3), (1, 0.3), (2, 0.4)]])
    >>> tree.num_nodes, list(tree.leaves())
    (6, [3, 4, 5])
    """
    if len(stages) < 1:
        raise InvalidTreeError("at least one stage beyond the root is required")
    horizon = len(stages)
    anc: list[int] = [-1]
    prob: list[float] = [1.0]
    dist: list[np.ndarray] = []
    counts = [1]
    prev_lo, prev_hi = 0, 1
    for t, records in enumerate(stages, start=1):
        records = list(records)
        if not records:
            raise InvalidTreeError(f"stage {t} has no nodes")
        last_anc = prev_lo
        for rec in records:
            a, p, w = _record_fields(rec)
            a = int(a)
            i = len(anc)
            if not prev_lo <= a < prev_hi:
                raise InvalidTreeError(
                    f"node {i} at stage {t}: ancestor {a} is not a stage-{t - 1} node")
            if a < last_anc:
                raise InvalidTreeError(
                    f"node {i} at stage {t}: children of node {a} are not contiguous")
            if not p > 0:
                raise InvalidTreeError(f"node {i}: probability must be positive, got {p!r}")
            last_anc = a
            anc.append(a)
            prob.append(float(p))
            dist.append(np.atleast_1d(np.asarray(w, dtype=float)))
        lo, hi = prev_hi, len(anc)
        parents = set(anc[lo:hi])
        orphans = [i for i in range(prev_lo, prev_hi) if i not in parents]
        if orphans:
            raise InvalidTreeError(f"stage-{t - 1} nodes {orphans} have no children")
        mass = np.bincount(np.asarray(anc[lo:hi]) - prev_lo,
                           weights=prob[lo:hi], minlength=prev_hi - prev_lo)
        for k in np.flatnonzero(np.abs(mass - prob[prev_lo:prev_hi]) > PROB_TOL):
            parent = prev_lo + int(k)
            raise InvalidTreeError(
                f"probability not conserved at node {parent}: children sum to "
                f"{mass[k]!r}, node has {prob[parent]!r}")
        counts.append(hi - lo)
        prev_lo, prev_hi = lo, hi

    n_w = {w.shape for w in dist}
    if len(n_w) != 1:
        raise InvalidTreeError(f"disturbances have inconsistent shapes {sorted(n_w)}")
    (shape,) = n_w
    disturbance = np.zeros((len(anc),) + shape)
    disturbance[1:] = np.stack(dist)
    return _finalise(horizon, anc, prob, disturbance, counts)


def chain_from_json(doc: Mapping[str, Any]) -> MarkovChain:
    """Read a chain from a JSON-like mapping (``modes``, ``transition``, ``initial``)."""
    for key in ("modes", "transition", "initial"):
        if key not in doc:
            raise InvalidChainError(f"chain specification is missing {key!r}")
    return MarkovChain(
        modes=np.asarray(doc["modes"], dtype=np.float64),
        transition=np.asarray(doc["transition"], dtype=np.float64),
        initial=np.asarray(doc["initial"], dtype=np.float64),
    )


def tree_from_json(doc: Mapping[str, Any]) -> ScenarioTree:
    """Build a tree from a document that also carries an integer ``horizon``."""
    horizon = doc.get("horizon")
    if isinstance(horizon, bool) or not isinstance(horizon, int):
        raise InvalidChainError(f"horizon must be an integer, got {horizon!r}")
    return build_from_markov(chain_from_json(doc), horizon)
