"""Robust small-sample learning of cellular cell load.

Modules: ``load_model`` (load-coupling fixed point and Jacobians),
``topology`` (scenarios and noisy samples), ``lp`` (monotone smoothing),
``limf`` (minimax Lipschitz-monotone predictor), ``baselines`` (k-NN),
``evaluation`` (metrics and experiment sweeps) and ``cli``.
"""

from .errors import (
    EmptyModel,
    IncompatibleData,
    InfeasibleScenario,
    LengthMismatch,
    LpInfeasible,
    LpUnbounded,
    NotConverged,
    SingularJacobian,
)
from .limf import LimfModel, estimate_lipschitz, fit, predict, sigma_bounds, uncertainty
from .load_model import Topology, load_map, solve_fixed_point
from .topology import SampleSet, ScenarioConfig, acquire_samples, generate_topology

__version__ = "0.1.0"
