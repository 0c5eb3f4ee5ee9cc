import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adjgrad.model import (
    BallBeamParams,
    CountingModel,
    FiniteDifferenceModel,
    LinearModel,
    PendulumParams,
    ballbeam_model,
    model_from_config,
    pendulum_model,
)

from conftest import control_bound, random_state

MODELS = [pendulum_model(), ballbeam_model()]


def central_jacobian(fun, v, h0=1e-6):
    v = np.asarray(v, dtype=float)
    cols = []
    for k in range(v.size):
        h = h0 * (1 + abs(v[k]))
        e = np.zeros_like(v)
        e[k] = h
        cols.append((np.atleast_1d(fun(v + e)) - np.atleast_1d(fun(v - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def close(a, b, rtol):
    a, b = np.asarray(a), np.asarray(b)
    return np.all(np.abs(a - b) <= rtol * (1 + np.abs(b)))


def test_pendulum_equilibrium():
    m = pendulum_model()
    np.testing.assert_array_equal(m.f(np.zeros(2), np.zeros(1), np.array([0.01])), [0, 0])


def test_pendulum_force_at_upright():
    p = PendulumParams()
    m = pendulum_model(p)
    F = 7.0
    nxt = m.f(np.zeros(2), np.array([F]), np.array([p.Ts]))
    M_tot = p.M + p.m
    assert nxt[0] == 0.0
    assert math.isclose(nxt[1], -3 * F * p.Ts / ((4 * M_tot - 3 * p.m) * p.L), rel_tol=1e-14)


def test_pendulum_matches_written_dynamics():
    p = PendulumParams(m=0.7, M=2.0, L=0.4, g=9.81, Ts=0.02)
    th, om, F = 0.3, -1.2, 4.0
    M_tot = p.M + p.m
    acc = -3 * (0.5 * p.m * p.L * om ** 2 * math.sin(2 * th) + F * math.cos(th)
                - M_tot * p.g * math.sin(th)) / ((4 * M_tot - 3 * p.m * math.cos(th) ** 2) * p.L)
    nxt = pendulum_model(p).f(np.array([th, om]), np.array([F]), np.array([p.Ts]))
    np.testing.assert_allclose(nxt, [th + p.Ts * om, om + p.Ts * acc], rtol=1e-14)


def test_ballbeam_equilibrium_and_torque():
    p = BallBeamParams()
    m = ballbeam_model(p)
    w = np.array([p.Ts])
    np.testing.assert_array_equal(m.f(np.zeros(4), np.zeros(1), w), np.zeros(4))
    nxt = m.f(np.zeros(4), np.array([2.5]), w)
    np.testing.assert_allclose(nxt, [0, 0, 0, p.Ts * 2.5 / p.I], rtol=1e-15)


def test_ballbeam_matches_written_dynamics():
    p = BallBeamParams(m=0.2, I=0.03, g=9.81, Ts=0.01)
    x, v, th, q, u = 0.3, -0.2, 0.1, 0.5, 1.5
    xdd = (x * q ** 2 - p.g * math.sin(th)) / (7 / 5)
    thdd = (u - 2 * p.m * x * v * q - p.m * p.g * x * math.cos(th)) / (p.m * x ** 2 + p.I)
    nxt = ballbeam_model(p).f(np.array([x, v, th, q]), np.array([u]), np.array([p.Ts]))
    np.testing.assert_allclose(
        nxt, [x + p.Ts * v, v + p.Ts * xdd, th + p.Ts * q, q + p.Ts * thdd], rtol=1e-14)


@pytest.mark.parametrize("model", MODELS, ids=["pendulum", "ballbeam"])
def test_derivatives_match_finite_differences(model, rng):
    w = model.nominal_w
    for _ in range(100):
        x = random_state(rng, model)
        u = rng.uniform(-1, 1, 1) * control_bound(model)
        d = rng.normal(size=model.n_x)
        Jx = central_jacobian(lambda z: model.f(z, u, w), x)
        Ju = central_jacobian(lambda z: model.f(x, z, w), u)
        assert close(model.fx_adj(x, u, w, d), Jx.T @ d, 1e-5)
        assert close(model.fu_adj(x, u, w, d), Ju.T @ d, 1e-5)
        assert close(model.lx(x, u, w), central_jacobian(lambda z: model.l(z, u, w), x)[0], 1e-5)
        assert close(model.lu(x, u, w), central_jacobian(lambda z: model.l(x, z, w), u)[0], 1e-5)
        assert close(model.vf_grad(x), central_jacobian(model.vf, x)[0], 1e-5)


@pytest.mark.parametrize("model", MODELS, ids=["pendulum", "ballbeam"])
def test_adjoint_products_are_linear(model, rng):
    w = model.nominal_w
    for _ in range(50):
        x = random_state(rng, model)
        u = rng.uniform(-1, 1, 1) * control_bound(model)
        d1, d2 = rng.normal(size=(2, model.n_x))
        a, b = rng.normal(size=2)
        for op in (model.fx_adj, model.fu_adj):
            lhs = op(x, u, w, a * d1 + b * d2)
            rhs = a * op(x, u, w, d1) + b * op(x, u, w, d2)
            scale = 1 + np.abs(a * op(x, u, w, d1)) + np.abs(b * op(x, u, w, d2))
            assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale)


@settings(max_examples=100, deadline=None)
@given(th=st.floats(-1, 1), om=st.floats(-5, 5), F=st.floats(-20, 20),
       h1=st.floats(1e-3, 0.2), h2=st.floats(1e-3, 0.2))
def test_pendulum_euler_step_is_linear_in_sampling_time(th, om, F, h1, h2):
    m = pendulum_model()
    x, u = np.array([th, om]), np.array([F])
    r1 = (m.f(x, u, np.array([h1])) - x) / h1
    r2 = (m.f(x, u, np.array([h2])) - x) / h2
    # rounding of x + h*r is amplified by 1/h
    tol = 1e-12 * (1 + np.abs(r1)) + 4e-16 * np.abs(x) / min(h1, h2)
    assert np.all(np.abs(r1 - r2) <= tol)


def test_ballbeam_euler_step_is_linear_in_sampling_time(rng):
    m = ballbeam_model()
    for _ in range(100):
        x, u = random_state(rng, m), rng.uniform(-5, 5, 1)
        h1, h2 = rng.uniform(1e-3, 0.2, 2)
        r1 = (m.f(x, u, np.array([h1])) - x) / h1
        r2 = (m.f(x, u, np.array([h2])) - x) / h2
        tol = 1e-12 * (1 + np.abs(r1)) + 4e-16 * np.abs(x) / min(h1, h2)
        assert np.all(np.abs(r1 - r2) <= tol)


class _PendulumNoDerivatives:
    def __init__(self):
        self._inner = pendulum_model()
        self.n_x, self.n_u, self.n_w = 2, 1, 1
        self.nominal_w = self._inner.nominal_w
        self.f, self.l, self.vf = self._inner.f, self._inner.l, self._inner.vf


def test_fd_wrapper_agrees_with_analytic_pendulum(rng):
    analytic = pendulum_model()
    fd = FiniteDifferenceModel(_PendulumNoDerivatives())
    w = analytic.nominal_w
    for _ in range(30):
        x, u, d = rng.uniform(-1, 1, 2), rng.uniform(-10, 10, 1), rng.normal(size=2)
        assert close(fd.fx_adj(x, u, w, d), analytic.fx_adj(x, u, w, d), 1e-5)
        assert close(fd.fu_adj(x, u, w, d), analytic.fu_adj(x, u, w, d), 1e-5)
        assert close(fd.lx(x, u, w), analytic.lx(x, u, w), 1e-5)
        assert close(fd.vf_grad(x), analytic.vf_grad(x), 1e-5)


def test_fd_wrapper_linear_map(rng):
    A, B = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
    fd = FiniteDifferenceModel(LinearModel(A, B))
    x, u, d = rng.normal(size=3), rng.normal(size=2), rng.normal(size=3)
    w = np.zeros(1)
    np.testing.assert_allclose(fd.fx_adj(x, u, w, d), A.T @ d, atol=1e-9)
    np.testing.assert_allclose(fd.fu_adj(x, u, w, d), B.T @ d, atol=1e-9)


def test_fd_wrapper_constant_map():
    class Const:
        n_x, n_u = 2, 1

        def f(self, x, u, w):
            return np.array([1.0, -2.0])

        def l(self, x, u, w):
            return 3.0

        def vf(self, x):
            return 4.0

    fd = FiniteDifferenceModel(Const())
    x, u, w, d = np.array([0.3, 0.1]), np.array([2.0]), np.zeros(1), np.array([1.0, 5.0])
    for v in (fd.fx_adj(x, u, w, d), fd.fu_adj(x, u, w, d), fd.lx(x, u, w),
              fd.lu(x, u, w), fd.vf_grad(x)):
        assert np.all(v == 0)


def test_counting_model_counts():
    m = CountingModel(pendulum_model())
    x, u, w = np.zeros(2), np.zeros(1), m.nominal_w
    m.f(x, u, w)
    m.fx_adj(x, u, w, x)
    m.fx_adj(x, u, w, x)
    assert m.counts == {"f": 1, "fx_adj": 2}
    m.reset()
    assert m.total() == 0


def test_parameter_validation():
    with pytest.raises(ValueError):
        PendulumParams(M=0.0)
    with pytest.raises(ValueError):
        BallBeamParams(I=-1.0)
    with pytest.raises(ValueError, match="unknown system"):
        model_from_config("cartpole")
    with pytest.raises(ValueError, match="bad parameters"):
        model_from_config("pendulum", {"mass": 1.0})
    assert model_from_config("ballbeam", {"Ts": 0.02}).nominal_w.tolist() == [0.02]
