"""Committed-minority control of coevolving actions and opinions."""
from ._backend import BACKEND
from .dynamics import (ActivationSchedule, ControlSets, PopulationState, Trajectory, best_response,
                       delta, increasing_differences_gap, simulate, step, utility)
from .equilibrium import (CandidateEquilibrium, EquilibriumReport, OpinionSolver, is_equilibrium, phi,
                          run_algorithm1, solve_opinion_equilibrium)
from .network import (LayeredNetwork, ModelParams, NetworkError, load_edge_list, make_complete,
                      make_family, normalize_rows, validate_network)
from .search import (AdmissibilityOracle, SearchConfig, brute_force_minimum, chain_step,
                     find_submodularity_violation, greedy_centrality_baseline, minimize_control_set)
from .thresholds import complete_graph_thresholds, condition_margin, sweep_complete

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ActivationSchedule", "ControlSets", "PopulationState", "Trajectory", "best_response",
    "delta", "increasing_differences_gap", "simulate", "step", "utility",
    "CandidateEquilibrium", "EquilibriumReport", "OpinionSolver", "is_equilibrium", "phi",
    "run_algorithm1", "solve_opinion_equilibrium",
    "LayeredNetwork", "ModelParams", "NetworkError", "load_edge_list", "make_complete", "make_family",
    "normalize_rows", "validate_network",
    "AdmissibilityOracle", "SearchConfig", "brute_force_minimum", "chain_step",
    "find_submodularity_violation", "greedy_centrality_baseline", "minimize_control_set",
    "complete_graph_thresholds", "condition_margin", "sweep_complete",
]
