"""Deterministic single-shooting cost and its adjoint gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Model


class DimensionError(ValueError):
    pass


@dataclass
class DetGradResult:
    """Gradient of the total cost plus the trajectory it was computed on.

    ``grad`` is flat, ``N * n_u`` long, stage blocks in order. ``states``
    has shape ``(N + 1, n_x)``. ``adjoint_final`` is the adjoint at stage 0.
    """

    grad: np.ndarray
    states: np.ndarray
    cost: float
    adjoint_final: np.ndarray

    def grad_blocks(self) -> np.ndarray:
        return self.grad.reshape(self.states.shape[0] - 1, -1)


def as_controls(model: Model, u, horizon: int | None = None) -> np.ndarray:
    """Return the control sequence as a ``(N, n_u)`` array (a view when possible)."""
    U = np.asarray(u, dtype=float)
    if U.ndim == 1:
        if U.size % model.n_u:
            raise DimensionError(f"{U.size} controls is not a multiple of n_u={model.n_u}")
        U = U.reshape(-1, model.n_u)
    if U.ndim != 2 or U.shape[1] != model.n_u:
        raise DimensionError(f"controls of shape {U.shape} do not match n_u={model.n_u}")
    if horizon is not None and U.shape[0] != horizon:
        raise DimensionError(f"expected {horizon} control blocks, got {U.shape[0]}")
    return U


def as_state(model: Model, x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (model.n_x,):
        raise DimensionError(f"initial state has {x0.size} entries, model has n_x={model.n_x}")
    return x0


def rollout_det(model: Model, x0, u) -> np.ndarray:
    """States ``x_0..x_N`` obtained by applying ``u`` from ``x0``; shape ``(N + 1, n_x)``."""
    x0 = as_state(model, x0)
    U = as_controls(model, u)
    w = model.nominal_w
    states = np.empty((U.shape[0] + 1, model.n_x))
    states[0] = x0
    for t in range(U.shape[0]):
        states[t + 1] = model.f(states[t], U[t], w)
    return states


def cost_det(model: Model, x0, u) -> float:
    """Total cost: stage costs along the rollout plus the terminal cost."""
    U = as_controls(model, u)
    states = rollout_det(model, x0, U)
    w = model.nominal_w
    total = 0.0
    for t in range(U.shape[0]):
        total += model.l(states[t], U[t], w)
    return total + model.vf(states[-1])


def grad_det(model: Model, x0, u) -> DetGradResult:
    """Gradient of the total cost with respect to every control block.

    One forward pass stores the trajectory; one backward pass propagates
    the adjoint from the terminal-cost gradient:

        grad_t  = lu_t + fu_t^T a_t
        a_{t-1} = lx_t + fx_t^T a_t,   a_{N-1} = grad Vf(x_N)

    The cost of the trajectory is accumulated during the forward pass.
    """
    x0 = as_state(model, x0)
    U = as_controls(model, u)
    N = U.shape[0]
    if N < 1:
        raise DimensionError("horizon must be at least 1")
    w = model.nominal_w

    states = np.empty((N + 1, model.n_x))
    states[0] = x0
    cost = 0.0
    for t in range(N):
        states[t + 1] = model.f(states[t], U[t], w)
        cost += model.l(states[t], U[t], w)
    cost += model.vf(states[N])

    grad = np.empty((N, model.n_u))
    a = model.vf_grad(states[N])
    for t in range(N - 1, 0, -1):
        x, ut = states[t], U[t]
        grad[t] = model.lu(x, ut, w) + model.fu_adj(x, ut, w, a)
        a = model.lx(x, ut, w) + model.fx_adj(x, ut, w, a)
    grad[0] = model.lu(states[0], U[0], w) + model.fu_adj(states[0], U[0], w, a)

    return DetGradResult(grad=grad.reshape(-1), states=states, cost=cost,
                         adjoint_final=np.asarray(a, dtype=float))
