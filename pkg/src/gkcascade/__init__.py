"""Default cascades on degree-correlated random banking networks.

Builds finite random directed networks with prescribed node- and edge-type
statistics, simulates zero-recovery default cascades on them, and computes the
infinite-network predictions: expected cascade size, the spectral cascade
condition, the critical buffer and the global-cascade frequency.
"""
__version__ = "0.1.0"

from .balance_sheets import (
    FullBalanceSheet,
    ReducedAccounting,
    ThresholdTable,
    gk_for,
    gk_specification,
    net_worth,
    thresholds,
)
from .cascade import ShockSpec, solve_cascade
from .degree_model import (
    DegreeModel,
    edge_assortativity,
    graph_assortativity,
    in_degree_joint,
    marginals,
    validate_consistency,
)
from .montecarlo import run_cascade, run_ensemble
from .networks import four_class, two_class
from .skeleton import GenerationConfig, SkeletonGraph, generate
from .stability import (
    cascade_condition,
    cascade_frequency,
    critical_gamma,
    spectral_radius,
    trigger_matrix,
)

__all__ = [
    "DegreeModel", "FullBalanceSheet", "GenerationConfig", "ReducedAccounting", "ShockSpec",
    "SkeletonGraph", "ThresholdTable", "cascade_condition", "cascade_frequency", "critical_gamma",
    "edge_assortativity", "four_class", "generate", "gk_for", "gk_specification",
    "graph_assortativity", "in_degree_joint", "marginals", "net_worth", "run_cascade",
    "run_ensemble", "solve_cascade", "spectral_radius", "thresholds", "trigger_matrix",
    "two_class", "validate_consistency",
]
