"""Adjoint gradients of single-shooting and scenario-tree optimal control costs."""

from .grad_core import DetGradResult, cost_det, grad_det, rollout_det
from .grad_tree import TreeGradResult, cost_tree, grad_tree, rollout_tree
from .model import (
    BallBeam,
    BallBeamParams,
    CountingModel,
    FiniteDifferenceModel,
    LinearModel,
    Model,
    Pendulum,
    PendulumParams,
    ballbeam_model,
    pendulum_model,
)
from .oracle import FdSpec, fd_grad_det, fd_grad_tree, lq_dense_grad, scenario_enum_grad
from .scenario_tree import MarkovChain, ScenarioTree, build_explicit, build_from_markov

__version__ = "0.1.0"
