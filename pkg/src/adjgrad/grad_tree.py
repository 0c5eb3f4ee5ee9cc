"""Expected cost on a scenario tree and its stage-parallel adjoint gradient."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grad_core import DimensionError, as_state
from .model import Model
from .scenario_tree import ScenarioTree


@dataclass
class TreeGradResult:
    """Gradient blocks per nonleaf node, node states and adjoints.

    ``grad`` is flat with one ``n_u`` block per nonleaf node in node order.
    ``adjoints[i]`` is the adjoint of node ``i``; the root row is NaN since
    the sweep never needs it.
    """

    grad: np.ndarray
    states: np.ndarray
    adjoints: np.ndarray
    cost: float


def as_tree_controls(model: Model, tree: ScenarioTree, u) -> np.ndarray:
    """Controls as a ``(num_nonleaf_nodes, n_u)`` array."""
    U = np.asarray(u, dtype=float)
    if U.ndim == 1 and U.size == tree.num_nonleaf_nodes * model.n_u:
        U = U.reshape(-1, model.n_u)
    if U.shape != (tree.num_nonleaf_nodes, model.n_u):
        raise DimensionError(
            f"controls of shape {U.shape} do not match "
            f"({tree.num_nonleaf_nodes}, {model.n_u}) for this tree")
    return U


def _check_disturbance(model: Model, tree: ScenarioTree):
    if tree.n_w != model.n_w:
        raise DimensionError(f"tree disturbances have n_w={tree.n_w}, model has n_w={model.n_w}")


def rollout_tree(model: Model, tree: ScenarioTree, x0, u) -> np.ndarray:
    """State of every node, shape ``(num_nodes, n_x)``."""
    x0 = as_state(model, x0)
    U = as_tree_controls(model, tree, u)
    _check_disturbance(model, tree)
    states = np.empty((tree.num_nodes, model.n_x))
    states[0] = x0
    anc, W = tree.anc, tree.disturbance
    for i in range(1, tree.num_nodes):
        p = anc[i]
        states[i] = model.f(states[p], U[p], W[i])
    return states


def _expected_cost(model: Model, tree: ScenarioTree, states, U) -> float:
    anc, W, prob = tree.anc, tree.disturbance, tree.prob
    total = 0.0
    for i in range(1, tree.num_nodes):
        p = anc[i]
        total += prob[i] * model.l(states[p], U[p], W[i])
    for j in tree.leaves():
        total += prob[j] * model.vf(states[j])
    return float(total)


def cost_tree(model: Model, tree: ScenarioTree, x0, u) -> float:
    """Probability-weighted stage costs on every edge plus weighted terminal costs."""
    U = as_tree_controls(model, tree, u)
    states = rollout_tree(model, tree, x0, U)
    return _expected_cost(model, tree, states, U)


def _chunks(r: range, parts: int) -> list[range]:
    n = len(r)
    parts = max(1, min(parts, n))
    bounds = [r.start + (n * k) // parts for k in range(parts + 1)]
    return [range(bounds[k], bounds[k + 1]) for k in range(parts)]


class _Sweep:
    """Per-call state shared read-only by workers; each node slot has one writer."""

    def __init__(self, model, tree, states, U, grad, adj):
        self.model, self.tree = model, tree
        self.states, self.U = states, U
        self.grad, self.adj = grad, adj

    def seed_leaves(self, nodes: range):
        model, prob, states, adj = self.model, self.tree.prob, self.states, self.adj
        for j in nodes:
            adj[j] = prob[j] * model.vf_grad(states[j])

    def stage(self, nodes: range, with_adjoint: bool):
        model, tree = self.model, self.tree
        prob, W = tree.prob, tree.disturbance
        cs, ce = tree.child_start, tree.child_end
        for i in nodes:
            x, u = self.states[i], self.U[i]
            g = np.zeros(model.n_u)
            a = np.zeros(model.n_x)
            # fixed ascending child order keeps the reduction bitwise reproducible
            for c in range(cs[i], ce[i]):
                w, ac, pc = W[c], self.adj[c], prob[c]
                g = g + (pc * model.lu(x, u, w) + model.fu_adj(x, u, w, ac))
                if with_adjoint:
                    a = a + (pc * model.lx(x, u, w) + model.fx_adj(x, u, w, ac))
            self.grad[i] = g
            if with_adjoint:
                self.adj[i] = a


def grad_tree(model: Model, tree: ScenarioTree, x0, u, workers: int = 1) -> TreeGradResult:
    """Gradient of the expected cost with respect to every nonleaf control.

    Leaf adjoints are seeded with ``prob[j] * grad Vf(x_j)``; then, stage by
    stage from N-1 down to 0, every node reduces over its children:

        grad_i = sum_c  prob[c] * lu(x_i, u_i, w_c) + fu^T(x_i, u_i, w_c) a_c
        a_i    = sum_c  prob[c] * lx(x_i, u_i, w_c) + fx^T(x_i, u_i, w_c) a_c

    Nodes of one stage are split into ``workers`` contiguous ranges and
    processed concurrently; stages are separated by a join. The result is
    bitwise identical for every worker count.
    """
    if not isinstance(workers, (int, np.integer)) or workers < 1:
        raise ValueError(f"workers must be a positive integer, got {workers!r}")
    U = as_tree_controls(model, tree, u)
    states = rollout_tree(model, tree, x0, U)
    cost = _expected_cost(model, tree, states, U)

    grad = np.empty((tree.num_nonleaf_nodes, model.n_u))
    adj = np.full((tree.num_nodes, model.n_x), np.nan)
    sweep = _Sweep(model, tree, states, U, grad, adj)
    N = tree.horizon

    if workers == 1:
        sweep.seed_leaves(tree.leaves())
        for t in range(N - 1, -1, -1):
            sweep.stage(tree.nodes_at(t), t >= 1)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            def run(fn, nodes, *args):
                # join: every chunk of this stage finishes before the next starts
                for fut in [pool.submit(fn, r, *args) for r in _chunks(nodes, workers)]:
                    fut.result()

            run(sweep.seed_leaves, tree.leaves())
            for t in range(N - 1, -1, -1):
                run(sweep.stage, tree.nodes_at(t), t >= 1)

    return TreeGradResult(grad=grad.reshape(-1), states=states, adjoints=adj, cost=cost)
