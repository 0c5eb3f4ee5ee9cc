"""Independent gradient oracles used to check the adjoint sweeps.

None of these routines share code with the backward recursions: finite
differences only call the cost functions, scenario enumeration propagates
dense forward sensitivities along each root-to-leaf path, and the LQ oracle
differentiates the stacked quadratic form directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grad_core import DimensionError, as_controls, as_state, cost_det
from .grad_tree import as_tree_controls, cost_tree
from .model import Model
from .scenario_tree import ScenarioTree

MAX_ENUM_PATHS = 10_000


@dataclass(frozen=True)
class FdSpec:
    """Central differences with step ``h0 * (1 + |u_k|)``; ``tol`` is relative."""

    h0: float = 1e-6
    tol: float = 1e-5

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def relative_deviation(value, reference) -> np.ndarray:
    """Componentwise ``|value - reference| / (1 + |reference|)``."""
    value = np.asarray(value, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return np.abs(value - reference) / (1.0 + np.abs(reference))


def _central_gradient(fun, v: np.ndarray, h0: float) -> np.ndarray:
    v = np.array(v, dtype=float).reshape(-1)
    out = np.empty_like(v)
    for k in range(v.size):
        h = h0 * (1.0 + abs(v[k]))
        orig = v[k]
        v[k] = orig + h
        up = fun(v)
        v[k] = orig - h
        down = fun(v)
        v[k] = orig
        out[k] = (up - down) / (2 * h)
    return out


def fd_grad_det(model: Model, x0, u, spec: FdSpec = FdSpec()) -> np.ndarray:
    """Central-difference gradient of :func:`cost_det`, flat like ``u``."""
    U = as_controls(model, u)
    x0 = as_state(model, x0)
    shape = U.shape
    return _central_gradient(lambda v: cost_det(model, x0, v.reshape(shape)), U, spec.h0)


def fd_grad_tree(model: Model, tree: ScenarioTree, x0, u, spec: FdSpec = FdSpec()) -> np.ndarray:
    """Central-difference gradient of :func:`cost_tree` over every nonleaf block."""
    U = as_tree_controls(model, tree, u)
    x0 = as_state(model, x0)
    shape = U.shape
    return _central_gradient(
        lambda v: cost_tree(model, tree, x0, v.reshape(shape)), U, spec.h0)


def _jacobians(model: Model, x, u, w) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``J_x f`` and ``J_u f`` recovered row by row from adjoint products."""
    eye = np.eye(model.n_x)
    Jx = np.stack([model.fx_adj(x, u, w, e) for e in eye])
    Ju = np.stack([model.fu_adj(x, u, w, e) for e in eye])
    return Jx, Ju


def scenario_enum_grad(model: Model, tree: ScenarioTree, x0, u) -> np.ndarray:
    """Expected-cost gradient by enumerating every scenario.

    For each leaf, the path cost (stage costs along the path plus the
    terminal cost) is differentiated with forward sensitivities
    ``dx_t/du_s`` and the result, weighted by the leaf probability, is
    scatter-added into the control slots of the nodes on the path.
    """
    U = as_tree_controls(model, tree, u)
    x0 = as_state(model, x0)
    leaves = tree.leaves()
    if len(leaves) > MAX_ENUM_PATHS:
        raise ValueError(
            f"tree has {len(leaves)} scenarios; enumeration is limited to {MAX_ENUM_PATHS}")
    n_x, n_u, N = model.n_x, model.n_u, tree.horizon
    grad = np.zeros((tree.num_nonleaf_nodes, n_u))
    for leaf in leaves:
        path = tree.path_to(leaf)
        xs = [x0]
        for t in range(N):
            xs.append(np.asarray(model.f(xs[t], U[path[t]], tree.disturbance[path[t + 1]])))
        # sens[s] = d x_t / d u_s for the current t
        sens = np.zeros((N, n_x, n_u))
        g = np.zeros((N, n_u))
        for t in range(N):
            node, w = path[t], tree.disturbance[path[t + 1]]
            x, ut = xs[t], U[node]
            g += np.einsum("i,sij->sj", model.lx(x, ut, w), sens)
            g[t] += model.lu(x, ut, w)
            Jx, Ju = _jacobians(model, x, ut, w)
            sens = np.einsum("ij,sjk->sik", Jx, sens)
            sens[t] += Ju
        g += np.einsum("i,sij->sj", model.vf_grad(xs[N]), sens)
        for t in range(N):
            grad[path[t]] += tree.prob[leaf] * g[t]
    return grad.reshape(-1)


def lq_dense_grad(A, B, x0, u, terminal_weight: float = 10.0) -> np.ndarray:
    """Exact gradient for ``x+ = A x + B u`` with costs ``|x|^2 + |u|^2`` and
    ``terminal_weight * |x_N|^2``, from the stacked prediction matrices."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n_x, n_u = B.shape
    if A.shape != (n_x, n_x):
        raise DimensionError(f"A has shape {A.shape}, B has shape {B.shape}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (n_x,):
        raise DimensionError(f"x0 has {x0.size} entries, expected {n_x}")
    uf = np.asarray(u, dtype=float).reshape(-1)
    if uf.size % n_u:
        raise DimensionError(f"{uf.size} controls is not a multiple of n_u={n_u}")
    N = uf.size // n_u

    # X = Phi x0 + Gamma u stacks x_0..x_N
    Phi = np.zeros(((N + 1) * n_x, n_x))
    Gamma = np.zeros(((N + 1) * n_x, N * n_u))
    power = np.eye(n_x)
    for t in range(N + 1):
        Phi[t * n_x:(t + 1) * n_x] = power
        power = A @ power
    for t in range(1, N + 1):
        for s in range(t):
            Gamma[t * n_x:(t + 1) * n_x, s * n_u:(s + 1) * n_u] = \
                np.linalg.matrix_power(A, t - 1 - s) @ B
    q = np.ones((N + 1) * n_x)
    q[N * n_x:] = terminal_weight
    X = Phi @ x0 + Gamma @ uf
    return 2.0 * Gamma.T @ (q * X) + 2.0 * uf
