"""Quantum experiments as causal graphs, simulated under local realism,
inflation superdeterminism, Parallel Lives, and Parallel Lives with inflation,
all checked against an exact state-vector oracle."""

from .causal import CausalGraph, CarrierEdge, EventNode, light_cone, locality_audit, topological_schedule
from .engine import Execution, execute, fluid_audit, terminal_distribution
from .hilbert import DensityMatrix, Ket, MeasurementContext, OutcomeDistribution, PauliWord, prepare_state
from .lives import Carrier, ChannelFlow, InteractionRecord, Life, interfere, join, project_merge, sample_life
from .models import (
    ModelKind,
    compare_models,
    run_inflation,
    run_local_realist,
    run_parallel_lives,
    run_pl_inflation,
)
from .pms import PMSquare, search_assignments, standard_square
from .scenarios import ScenarioDescriptor, build_graph, make_scenario

__version__ = "0.1.0"
