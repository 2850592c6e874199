"""Multi-slot guaranteed-display allocation: page-view constrained dual solver,
primal reference oracle, contract-roulette page assembly and delivery simulation."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Contract,
    Edge,
    ProblemInstance,
    SupplyNode,
    ValidationReport,
    compute_target_ratios,
    load_instance,
    validate_instance,
)
from .solver import AllocationPlan, DualState, SolverConfig, evaluate_objective, solve  # noqa: E402
from .kkt import kkt_residuals  # noqa: E402

__all__ = [
    "AllocationPlan",
    "Contract",
    "DualState",
    "Edge",
    "ProblemInstance",
    "SolverConfig",
    "SupplyNode",
    "ValidationReport",
    "compute_target_ratios",
    "evaluate_objective",
    "kkt_residuals",
    "load_instance",
    "solve",
    "validate_instance",
]
