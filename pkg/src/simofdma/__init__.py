"""Wideband OFDMA downlink with a stacked intelligent metasurface (SIM) precoder.

Joint optimization of the subcarrier assignment and the SIM phase shifts so
that the end-to-end channel of every subcarrier approximates a scaled
identity over the users that share it.
"""

from .allocation import AssignmentMatrix, MilpInstance, brute_force, solve_branch_and_bound
from .channel import ChannelRealization, Geometry, realize_channel
from .config import ExperimentConfig, OptimizerConfig, SystemConfig, load_config
from .errors import (ConfigError, DegenerateChannelError, DomainError, InfeasibleError,
                     IterationLimitError, SimError, SolverError)
from .optimizer import FitState, Problem, optimize
from .propagation import PhaseConfig, SimGeometry, SimStack, build_stack, cascade

__version__ = "0.1.0"

__all__ = [
    "AssignmentMatrix", "MilpInstance", "brute_force", "solve_branch_and_bound",
    "ChannelRealization", "Geometry", "realize_channel",
    "ExperimentConfig", "OptimizerConfig", "SystemConfig", "load_config",
    "ConfigError", "DegenerateChannelError", "DomainError", "InfeasibleError",
    "IterationLimitError", "SimError", "SolverError",
    "FitState", "Problem", "optimize",
    "PhaseConfig", "SimGeometry", "SimStack", "build_stack", "cascade",
]
