import math

import numpy as np
import pytest

from adjgrad.model import LinearModel, Model, QuadraticCost
from adjgrad.scenario_tree import MarkovChain, build_explicit

SAMPLING_TIMES = [[0.01], [0.02], [0.1]]


def random_chain(rng, num_modes=3, modes=None, zero_prob=0.0):
    """Random row-stochastic chain with uniform initial distribution."""
    P = rng.uniform(0.05, 1.0, (num_modes, num_modes))
    if zero_prob:
        mask = rng.uniform(size=P.shape) < zero_prob
        mask[np.arange(num_modes), rng.integers(0, num_modes, num_modes)] = False
        P[mask] = 0.0
    P /= P.sum(axis=1, keepdims=True)
    if modes is None:
        modes = SAMPLING_TIMES[:num_modes]
    return MarkovChain(modes, P, np.full(num_modes, 1.0 / num_modes))


def fig1_tree(w=(0.01, 0.02, 0.1, 0.02, 0.01)):
    """Root with two children; node 1 has two children, node 2 has one."""
    return build_explicit([
        [(0, 0.6, [w[0]]), (0, 0.4, [w[1]])],
        [(1, 0.2, [w[2]]), (1, 0.4, [w[3]]), (2, 0.4, [w[4]])],
    ])


def scalar_toy(nominal_w=0.0):
    """f = x + u + w, l = x^2 + u^2, Vf = 10 x^2."""
    return LinearModel([[1.0]], [[1.0]], E=[[1.0]], nominal_w=[nominal_w])


class ScalarNonlinear(QuadraticCost, Model):
    """f = x + w (sin x + x u + u^3), with hand-written derivatives."""

    n_x, n_u, n_w = 1, 1, 1
    nominal_w = np.array([0.1])

    def f(self, x, u, w):
        return np.array([x[0] + w[0] * (math.sin(x[0]) + x[0] * u[0] + u[0] ** 3)])

    def fx_adj(self, x, u, w, d):
        return np.array([(1 + w[0] * (math.cos(x[0]) + u[0])) * d[0]])

    def fu_adj(self, x, u, w, d):
        return np.array([w[0] * (x[0] + 3 * u[0] ** 2) * d[0]])


class WrongSignPendulum:
    """Pendulum whose input adjoint has the wrong sign (negative control)."""

    def __init__(self, inner):
        self.inner = inner
        self.n_x, self.n_u, self.n_w = inner.n_x, inner.n_u, inner.n_w
        self.nominal_w = inner.nominal_w

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def fu_adj(self, x, u, w, d):
        return -self.inner.fu_adj(x, u, w, d)


def random_state(rng, model):
    if model.n_x == 2:
        return rng.uniform([-1, -5], [1, 5])
    return rng.uniform([-0.5, -1, -0.5, -1], [0.5, 1, 0.5, 1])


def control_bound(model):
    return 20.0 if model.n_x == 2 else 5.0


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
