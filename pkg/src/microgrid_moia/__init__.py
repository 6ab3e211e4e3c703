"""Multiobjective price and dispatch design for a network of microgrids."""

from .model import (
    Antibody,
    DemandCurve,
    GridCostParams,
    MicrogridSpec,
    NetworkState,
    ObjectiveVector,
    ScenarioConfig,
    StepProblem,
    decision_bounds,
    evaluate,
)
from .moia import MoiaParams, ParetoArchive, dominates, knee_select, pareto_filter, run_moia
from .scenario import load_scenario, reference_scenario
from .simulator import SimulationTrace, StepRecord, simulate, simulate_step

__version__ = "0.1.0"
