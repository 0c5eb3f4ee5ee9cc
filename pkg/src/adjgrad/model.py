"""System models: dynamics, costs and their adjoint-vector products.

Every model exposes the discrete dynamics ``f(x, u, w)`` together with
Jacobian-transpose products ``fx_adj(x, u, w, d) = J_x f(x, u, w)^T d`` and
``fu_adj(x, u, w, d) = J_u f(x, u, w)^T d``. Dense Jacobians are never
required by the gradient routines.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np


class Model(ABC):
    """Discrete-time system with stage and terminal costs.

    Subclasses set ``n_x``, ``n_u``, ``n_w`` and ``nominal_w`` and
    implement the eight operations below. All operations must be pure.
    """

    n_x: int
    n_u: int
    n_w: int
    nominal_w: np.ndarray

    @abstractmethod
    def f(self, x, u, w) -> np.ndarray: ...

    @abstractmethod
    def fx_adj(self, x, u, w, d) -> np.ndarray: ...

    @abstractmethod
    def fu_adj(self, x, u, w, d) -> np.ndarray: ...

    @abstractmethod
    def l(self, x, u, w) -> float: ...

    @abstractmethod
    def lx(self, x, u, w) -> np.ndarray: ...

    @abstractmethod
    def lu(self, x, u, w) -> np.ndarray: ...

    @abstractmethod
    def vf(self, x) -> float: ...

    @abstractmethod
    def vf_grad(self, x) -> np.ndarray: ...


class QuadraticCost:
    """Stage cost ``|x|^2 + |u|^2`` and terminal cost ``terminal_weight * |x|^2``."""

    terminal_weight: float = 10.0

    def l(self, x, u, w):
        return float(x @ x + u @ u)

    def lx(self, x, u, w):
        return 2.0 * x

    def lu(self, x, u, w):
        return 2.0 * u

    def vf(self, x):
        return float(self.terminal_weight * (x @ x))

    def vf_grad(self, x):
        return (2.0 * self.terminal_weight) * x


@dataclass(frozen=True)
class PendulumParams:
    """Inverted pendulum on a cart.

    ``L`` is the rod half-length; its default of 0.5 m is a placeholder.
    """

    m: float = 1.0
    M: float = 3.0
    L: float = 0.5
    g: float = 9.81
    Ts: float = 0.01

    def __post_init__(self):
        for name in ("m", "M", "L", "Ts"):
            if not getattr(self, name) > 0:
                raise ValueError(f"pendulum parameter {name} must be positive")


@dataclass(frozen=True)
class BallBeamParams:
    """Ball on a beam. ``m`` and ``I`` defaults are placeholder values."""

    m: float = 0.1
    I: float = 0.05
    g: float = 9.81
    Ts: float = 0.01

    def __post_init__(self):
        for name in ("m", "I", "Ts"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ball-and-beam parameter {name} must be positive")


class Pendulum(QuadraticCost, Model):
    """Euler-discretised inverted pendulum, state (theta, omega), input force.

    The disturbance is the sampling time of the Euler step.
    """

    n_x, n_u, n_w = 2, 1, 1

    def __init__(self, params: PendulumParams = PendulumParams()):
        self.params = params
        self.nominal_w = np.array([params.Ts])
        self._m_tot = params.M + params.m

    def _accel(self, th, om, F):
        p = self.params
        num = 0.5 * p.m * p.L * om * om * math.sin(2 * th) + F * math.cos(th) \
            - self._m_tot * p.g * math.sin(th)
        den = (4 * self._m_tot - 3 * p.m * math.cos(th) ** 2) * p.L
        return num, den

    def _accel_partials(self, th, om, F):
        """Return (d/dtheta, d/domega, d/dF) of the angular acceleration."""
        p = self.params
        num, den = self._accel(th, om, F)
        num_th = p.m * p.L * om * om * math.cos(2 * th) - F * math.sin(th) \
            - self._m_tot * p.g * math.cos(th)
        num_om = p.m * p.L * om * math.sin(2 * th)
        den_th = 3 * p.m * p.L * math.sin(2 * th)
        d_th = -3 * (num_th * den - num * den_th) / (den * den)
        return d_th, -3 * num_om / den, -3 * math.cos(th) / den

    def f(self, x, u, w):
        th, om = x
        num, den = self._accel(th, om, u[0])
        h = w[0]
        return np.array([th + h * om, om + h * (-3 * num / den)])

    def fx_adj(self, x, u, w, d):
        th, om = x
        a_th, a_om, _ = self._accel_partials(th, om, u[0])
        h = w[0]
        return np.array([d[0] + h * a_th * d[1], h * d[0] + (1 + h * a_om) * d[1]])

    def fu_adj(self, x, u, w, d):
        th, om = x
        p = self.params
        den = (4 * self._m_tot - 3 * p.m * math.cos(th) ** 2) * p.L
        return np.array([w[0] * (-3 * math.cos(th) / den) * d[1]])


class BallBeam(QuadraticCost, Model):
    """Euler-discretised ball and beam.

    State is (position, velocity, beam angle, beam angular rate); the
    input is the torque at the fulcrum; the disturbance is the sampling time.
    """

    n_x, n_u, n_w = 4, 1, 1

    def __init__(self, params: BallBeamParams = BallBeamParams()):
        self.params = params
        self.nominal_w = np.array([params.Ts])

    def f(self, x, u, w):
        p = self.params
        pos, vel, th, q = x
        h = w[0]
        ball = 5.0 / 7.0 * (pos * q * q - p.g * math.sin(th))
        inertia = p.m * pos * pos + p.I
        beam = (u[0] - 2 * p.m * pos * vel * q - p.m * p.g * pos * math.cos(th)) / inertia
        return np.array([pos + h * vel, vel + h * ball, th + h * q, q + h * beam])

    def fx_adj(self, x, u, w, d):
        p = self.params
        pos, vel, th, q = x
        h = w[0]
        c = 5.0 / 7.0
        ball_pos, ball_th, ball_q = c * q * q, -c * p.g * math.cos(th), 2 * c * pos * q
        inertia = p.m * pos * pos + p.I
        torque = u[0] - 2 * p.m * pos * vel * q - p.m * p.g * pos * math.cos(th)
        beam_pos = ((-2 * p.m * vel * q - p.m * p.g * math.cos(th)) * inertia
                    - torque * 2 * p.m * pos) / (inertia * inertia)
        beam_vel = -2 * p.m * pos * q / inertia
        beam_th = p.m * p.g * pos * math.sin(th) / inertia
        beam_q = -2 * p.m * pos * vel / inertia
        d0, d1, d2, d3 = d
        return np.array([
            d0 + h * (ball_pos * d1 + beam_pos * d3),
            h * d0 + d1 + h * beam_vel * d3,
            h * ball_th * d1 + d2 + h * beam_th * d3,
            h * ball_q * d1 + h * d2 + (1 + h * beam_q) * d3,
        ])

    def fu_adj(self, x, u, w, d):
        p = self.params
        return np.array([w[0] * d[3] / (p.m * x[0] * x[0] + p.I)])


class LinearModel(QuadraticCost, Model):
    """Linear dynamics ``A x + B u + E w`` with the quadratic costs."""

    def __init__(self, A, B, E=None, terminal_weight: float = 10.0, nominal_w=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.n_x, self.n_u = self.B.shape
        if self.A.shape != (self.n_x, self.n_x):
            raise ValueError(f"A has shape {self.A.shape}, B has shape {self.B.shape}")
        self.E = np.zeros((self.n_x, 1)) if E is None else np.atleast_2d(np.asarray(E, dtype=float))
        if self.E.shape[0] != self.n_x:
            raise ValueError(f"E has shape {self.E.shape}")
        self.n_w = self.E.shape[1]
        self.nominal_w = (np.zeros(self.n_w) if nominal_w is None
                          else np.atleast_1d(np.asarray(nominal_w, dtype=float)))
        self.terminal_weight = float(terminal_weight)

    def f(self, x, u, w):
        return self.A @ x + self.B @ u + self.E @ w

    def fx_adj(self, x, u, w, d):
        return self.A.T @ d

    def fu_adj(self, x, u, w, d):
        return self.B.T @ d


def _fd_step(v: np.ndarray, h0: float) -> np.ndarray:
    return h0 * (1.0 + np.abs(v))


def _central_jacobian(fun: Callable[[np.ndarray], np.ndarray], v: np.ndarray,
                      h0: float) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    steps = _fd_step(v, h0)
    cols = []
    for k in range(v.size):
        e = np.zeros_like(v)
        e[k] = steps[k]
        cols.append((np.atleast_1d(fun(v + e)) - np.atleast_1d(fun(v - e))) / (2 * steps[k]))
    return np.stack(cols, axis=-1)


class FiniteDifferenceModel(Model):
    """Complete a derivative-free model with central-difference derivatives.

    ``base`` needs ``f``, ``l``, ``vf``, ``n_x``, ``n_u`` and optionally
    ``n_w``/``nominal_w``. Each component is perturbed by
    ``h0 * (1 + |value|)``.
    """

    def __init__(self, base, h0: float = 1e-6):
        self.base = base
        self.h0 = h0
        self.n_x = base.n_x
        self.n_u = base.n_u
        self.n_w = getattr(base, "n_w", 1)
        self.nominal_w = np.asarray(getattr(base, "nominal_w", np.zeros(self.n_w)), dtype=float)

    def f(self, x, u, w):
        return np.asarray(self.base.f(x, u, w), dtype=float)

    def l(self, x, u, w):
        return float(self.base.l(x, u, w))

    def vf(self, x):
        return float(self.base.vf(x))

    def fx_adj(self, x, u, w, d):
        J = _central_jacobian(lambda z: self.base.f(z, u, w), x, self.h0)
        return J.T @ d

    def fu_adj(self, x, u, w, d):
        J = _central_jacobian(lambda z: self.base.f(x, z, w), u, self.h0)
        return J.T @ d

    def lx(self, x, u, w):
        return _central_jacobian(lambda z: self.base.l(z, u, w), x, self.h0)[0]

    def lu(self, x, u, w):
        return _central_jacobian(lambda z: self.base.l(x, z, w), u, self.h0)[0]

    def vf_grad(self, x):
        return _central_jacobian(self.base.vf, x, self.h0)[0]


OPERATIONS = ("f", "fx_adj", "fu_adj", "l", "lx", "lu", "vf", "vf_grad")


class CountingModel(Model):
    """Delegate to ``inner`` while counting invocations of every operation."""

    def __init__(self, inner: Model):
        self.inner = inner
        self.n_x, self.n_u, self.n_w = inner.n_x, inner.n_u, inner.n_w
        self.nominal_w = inner.nominal_w
        self.counts: Counter[str] = Counter()

    def reset(self):
        self.counts.clear()

    def total(self) -> int:
        return sum(self.counts.values())

    def f(self, x, u, w):
        self.counts["f"] += 1
        return self.inner.f(x, u, w)

    def fx_adj(self, x, u, w, d):
        self.counts["fx_adj"] += 1
        return self.inner.fx_adj(x, u, w, d)

    def fu_adj(self, x, u, w, d):
        self.counts["fu_adj"] += 1
        return self.inner.fu_adj(x, u, w, d)

    def l(self, x, u, w):
        self.counts["l"] += 1
        return self.inner.l(x, u, w)

    def lx(self, x, u, w):
        self.counts["lx"] += 1
        return self.inner.lx(x, u, w)

    def lu(self, x, u, w):
        self.counts["lu"] += 1
        return self.inner.lu(x, u, w)

    def vf(self, x):
        self.counts["vf"] += 1
        return self.inner.vf(x)

    def vf_grad(self, x):
        self.counts["vf_grad"] += 1
        return self.inner.vf_grad(x)


def pendulum_model(params: PendulumParams | None = None) -> Pendulum:
    return Pendulum(params or PendulumParams())


def ballbeam_model(params: BallBeamParams | None = None) -> BallBeam:
    return BallBeam(params or BallBeamParams())


SYSTEMS = {"pendulum": (Pendulum, PendulumParams), "ballbeam": (BallBeam, BallBeamParams)}


def model_from_config(system: str, params: dict | None = None) -> Model:
    """Instantiate a shipped model by name, e.g. ``model_from_config("pendulum", {"L": 0.3})``."""
    try:
        cls, param_cls = SYSTEMS[system]
    except KeyError:
        raise ValueError(f"unknown system {system!r}; expected one of {sorted(SYSTEMS)}") from None
    try:
        p = param_cls(**{k: float(v) for k, v in (params or {}).items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for {system}: {exc}") from None
    return cls(p)
