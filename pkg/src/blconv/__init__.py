"""Convergence analysis of a local weight-derivative learning rule for general neural networks."""

from .bl_core import (
    BLSystem,
    HierarchyReport,
    assemble_system,
    convergence_measure,
    hierarchy_analysis,
    iterate_wdot,
    solvability_and_solution,
    system_convergence_measure,
)
from .errors import (
    BLError,
    DegenerateStateError,
    DivergenceError,
    NoSolutionError,
    NumericalFailure,
    SingularMatrixError,
    UsageError,
)
from .learning import LearningConfig, bp_equivalence_check, finite_diff_gradient, train, train_step
from .model import Network, NetworkState, Neuron, Synapse, forward, network_error
from .netgen import GenParams, cm_over_trials, generate_network
from .numerics import RandomStream, lu_solve_det, random_stream, spectral_radius
from .sweep import SweepSpec, emit_outputs, run_sweep

__version__ = "0.1.0"
