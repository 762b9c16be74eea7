"""Simulation of piecewise deterministic Markov processes.

Exact (inversion) and approximate (continuous Runge-Kutta with
random-threshold event location) path generators, stochastic
Hodgkin-Huxley membrane models, and a pathwise convergence harness.
"""

from .core import (ContinuousKernel, DiscreteKernel, PdmpModel, PdmpState, Trajectory,
                   eval_dense, sample_jump_height)
from .crk import ButcherTableau, Method, builtin_tableau, dense_step_eval, solve_stages, step
from .errors import (DomainError, InsufficientDataError, ModelError, NumericalError,
                     PairingError, PdmpError, StepError, UnsupportedModelError)
from .hitting import CapReached, CrossingResult, find_crossing_in_step, integrate_until_threshold
from .rng import UniformStream, uniform_at
from .simulate import SimulationConfig, simulate_approx, simulate_exact_analytic, simulate_reference

__version__ = "0.1.0"

__all__ = [
    "ButcherTableau", "CapReached", "ContinuousKernel", "CrossingResult", "DiscreteKernel",
    "DomainError", "InsufficientDataError", "Method", "ModelError", "NumericalError",
    "PairingError", "PdmpError", "PdmpModel", "PdmpState", "SimulationConfig", "StepError",
    "Trajectory", "UniformStream", "UnsupportedModelError", "builtin_tableau",
    "dense_step_eval", "eval_dense", "find_crossing_in_step", "integrate_until_threshold",
    "sample_jump_height", "simulate_approx", "simulate_exact_analytic", "simulate_reference",
    "solve_stages", "step", "uniform_at",
]
